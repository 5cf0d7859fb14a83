#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rmt/measure.hpp"

namespace rmt {

/// Counter-based generator: the k-th draw of stream s under seed x is a pure
/// function of (x, s, k), so generation order never changes the output.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  std::uint64_t poisson(double mean);
  /// Independent child stream.
  CounterRng split(std::uint64_t stream) const { return CounterRng(key_, stream); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

enum class GeneratorKind { kPoisson, kSmoothedDensity, kSegmentSingular, kLebesgueGrid, kMixture };

GeneratorKind parse_generator_kind(const std::string& name);
std::string to_string(GeneratorKind kind);

struct MixtureComponent;

/// Parameters of one random-measure realization. Zero-valued optional fields
/// pick defaults: bandwidth L/16, seed-point intensity = `intensity`,
/// segment length L/2.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kLebesgueGrid;
  /// Mass per unit volume; for kPoisson the point intensity of unit atoms.
  double intensity = 1.0;
  double point_intensity = 0.0;
  double bandwidth = 0.0;
  int segment_count = 4;
  double segment_length = 0.0;
  std::vector<MixtureComponent> components;
  std::uint64_t seed = 0;
};

struct MixtureComponent {
  double weight = 1.0;
  GeneratorSpec spec;
};

void validate(const GeneratorSpec& spec);

DiscreteMeasure generate(const GeneratorSpec& spec, const PeriodicDomain& domain);

/// xi = common + xi', eta = common + eta' with xi', eta' mutually singular
/// (cell-aligned parts live on opposite checkerboard parities) and equal mass.
std::pair<DiscreteMeasure, DiscreteMeasure> coupled_pair(const GeneratorSpec& spec_xi, const GeneratorSpec& spec_eta,
                                                         double common_weight, std::uint64_t seed,
                                                         const PeriodicDomain& domain);

}  // namespace rmt
