#include "rmt/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "rmt/network_simplex.hpp"

namespace rmt {

double displacement_weight(const PeriodicDomain& domain, const Point& displacement);

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Masses rounded to 30 significant bits, so summation-order noise in the
// inputs does not change the code.
std::uint64_t mass_code(double m) {
  int e = 0;
  const double f = std::frexp(m, &e);
  return static_cast<std::uint64_t>(std::llround(std::ldexp(f, 30))) ^ (static_cast<std::uint64_t>(e + 2048) << 40);
}

// Displacements alone tie on grids (every translate of an arc has the same
// weight), so the endpoint masses enter the hash as well.
double arc_weight(const PeriodicDomain& dom, const Point& displacement, double from_mass, double to_mass) {
  const double base = displacement_weight(dom, displacement);
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(std::ldexp(base, 53)) ^ mass_code(from_mass));
  h = splitmix64(h ^ (mass_code(to_mass) * 0x9e3779b97f4a7c15ULL));
  return static_cast<double>(h >> 11) * std::ldexp(1.0, -53);
}

struct Arc {
  std::size_t source;
  std::size_t target;  // == k for the sink
};

class SemicouplingProblem {
 public:
  SemicouplingProblem(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta,
                      const SolverOptions& opts)
      : dom_(mu.domain()), mu_(mu), nu_(nu), theta_(theta), opts_(opts), m_(mu.size()), k_(nu.size()) {
    supply_ = mu.masses();
    const double total_mu = mu.total_mass();
    const double total_nu = nu.total_mass();
    const double tol = opts.tolerance * std::max(1.0, total_nu);
    if (total_mu < total_nu - tol) {
      throw Error(ErrorCode::kInfeasible, "source mass is smaller than target mass");
    }
    if (total_mu < total_nu) {
      for (double& s : supply_) s *= total_nu / total_mu;
    }
    const double sup_total = std::accumulate(supply_.begin(), supply_.end(), 0.0);
    surplus_ = std::max(0.0, sup_total - total_nu);
    use_sink_ = surplus_ > 0.0;
    scale_ = std::max(1.0, sup_total);
  }

  double cost(std::size_t i, std::size_t j) const { return theta_(dom_.distance(mu_[i].location, nu_[j].location)); }

  TransportPlan solve(std::shared_ptr<const DiscreteMeasure> mu_ptr, std::shared_ptr<const DiscreteMeasure> nu_ptr) {
    std::vector<PlanEntry> entries;
    if (k_ > 0) {
      const bool dense = m_ <= opts_.dense_limit && k_ <= opts_.dense_limit;
      std::vector<Arc> arcs = dense ? all_pairs() : candidate_pairs(opts_.candidate_neighbors);
      std::vector<double> costs = arc_costs(arcs);
      max_cost_ = 0.0;
      for (double c : costs) max_cost_ = std::max(max_cost_, c);
      if (!dense) max_cost_ = std::max(max_cost_, theta_(0.5 * dom_.side() * std::sqrt(dom_.dim())));
      const double rc_tol = 1e-12 * (max_cost_ + 1.0);

      NetworkSimplex ns = run_primary(arcs, costs, dense, rc_tol);
      std::vector<double> flows = arc_flows(ns, arcs.size());

      if (opts_.tie_break == TieBreak::kDisplacement) {
        const double face_tol = 1e-10 * (max_cost_ + 1.0);
        const std::vector<Arc> face = tight_arcs(ns, arcs, dense, face_tol);
        std::vector<double> weights;
        weights.reserve(face.size());
        for (const Arc& a : face) {
          weights.push_back(a.target == k_ ? 0.0
                                           : arc_weight(dom_, dom_.displacement(mu_[a.source].location,
                                                                                nu_[a.target].location),
                                                        mu_[a.source].mass, nu_[a.target].mass));
        }
        NetworkSimplex ns2 = build(face, weights);
        if (ns2.run(1e-13) == NetworkSimplex::Status::kOptimal) {
          std::vector<double> flows2 = arc_flows(ns2, face.size());
          double c1 = 0.0;
          for (std::size_t e = 0; e < arcs.size(); ++e) c1 += flows[e] * costs[e];
          double c2 = 0.0;
          for (std::size_t e = 0; e < face.size(); ++e) {
            if (face[e].target != k_) c2 += flows2[e] * cost(face[e].source, face[e].target);
          }
          if (c2 <= c1 + face_tol * scale_) {
            arcs = face;
            flows = std::move(flows2);
          }
        }
      }

      const double drop = 1e-14 * scale_;
      for (std::size_t e = 0; e < arcs.size(); ++e) {
        if (arcs[e].target != k_ && flows[e] > drop) entries.push_back({arcs[e].source, arcs[e].target, flows[e]});
      }
    }
    return TransportPlan(std::move(mu_ptr), std::move(nu_ptr), std::move(entries));
  }

 private:
  std::vector<Arc> all_pairs() const {
    std::vector<Arc> arcs;
    arcs.reserve(m_ * (k_ + 1));
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < k_; ++j) arcs.push_back({i, j});
      if (use_sink_) arcs.push_back({i, k_});
    }
    return arcs;
  }

  std::vector<Arc> candidate_pairs(std::size_t neighbors) const {
    std::vector<std::uint64_t> keys;
    std::vector<std::pair<double, std::size_t>> buf;
    const std::size_t kt = std::min(neighbors, k_);
    for (std::size_t i = 0; i < m_; ++i) {
      buf.clear();
      for (std::size_t j = 0; j < k_; ++j) buf.emplace_back(dom_.distance(mu_[i].location, nu_[j].location), j);
      std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(kt - 1), buf.end());
      for (std::size_t t = 0; t < kt; ++t) keys.push_back(i * (k_ + 1) + buf[t].second);
    }
    const std::size_t ks = std::min(neighbors, m_);
    for (std::size_t j = 0; j < k_; ++j) {
      buf.clear();
      for (std::size_t i = 0; i < m_; ++i) buf.emplace_back(dom_.distance(mu_[i].location, nu_[j].location), i);
      std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(ks - 1), buf.end());
      for (std::size_t t = 0; t < ks; ++t) keys.push_back(buf[t].second * (k_ + 1) + j);
    }
    if (use_sink_) {
      for (std::size_t i = 0; i < m_; ++i) keys.push_back(i * (k_ + 1) + k_);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<Arc> arcs;
    arcs.reserve(keys.size());
    for (std::uint64_t key : keys) arcs.push_back({key / (k_ + 1), key % (k_ + 1)});
    return arcs;
  }

  std::vector<double> arc_costs(const std::vector<Arc>& arcs) const {
    std::vector<double> c;
    c.reserve(arcs.size());
    for (const Arc& a : arcs) c.push_back(a.target == k_ ? 0.0 : cost(a.source, a.target));
    return c;
  }

  NetworkSimplex build(const std::vector<Arc>& arcs, const std::vector<double>& costs) const {
    const int nodes = static_cast<int>(m_ + k_ + (use_sink_ ? 1 : 0));
    NetworkSimplex ns(nodes);
    for (std::size_t i = 0; i < m_; ++i) ns.set_supply(static_cast<int>(i), supply_[i]);
    for (std::size_t j = 0; j < k_; ++j) ns.set_supply(static_cast<int>(m_ + j), -nu_[j].mass);
    if (use_sink_) ns.set_supply(static_cast<int>(m_ + k_), -surplus_);
    for (std::size_t e = 0; e < arcs.size(); ++e) {
      ns.add_arc(static_cast<int>(arcs[e].source), static_cast<int>(m_ + arcs[e].target), costs[e]);
    }
    return ns;
  }

  std::vector<double> arc_flows(const NetworkSimplex& ns, std::size_t count) const {
    std::vector<double> f(count);
    for (std::size_t e = 0; e < count; ++e) f[e] = ns.flow(static_cast<int>(e));
    return f;
  }

  long double reduced(const NetworkSimplex& ns, std::size_t i, std::size_t j, double c) const {
    return static_cast<long double>(c) + ns.potential(static_cast<int>(i)) - ns.potential(static_cast<int>(m_ + j));
  }

  NetworkSimplex run_primary(std::vector<Arc>& arcs, std::vector<double>& costs, bool dense, double rc_tol) {
    std::size_t neighbors = opts_.candidate_neighbors;
    for (;;) {
      NetworkSimplex ns = build(arcs, costs);
      const auto status = ns.run(rc_tol);
      if (status == NetworkSimplex::Status::kInfeasible) {
        if (dense || neighbors >= std::max(m_, k_)) {
          throw Error(ErrorCode::kInfeasible, "transportation problem is infeasible");
        }
        neighbors *= 2;
        arcs = candidate_pairs(neighbors);
        costs = arc_costs(arcs);
        continue;
      }
      if (dense) return ns;
      // Audit reduced costs over every pair and add violated arcs.
      std::vector<std::uint64_t> keys;
      keys.reserve(arcs.size());
      for (const Arc& a : arcs) keys.push_back(a.source * (k_ + 1) + a.target);
      std::size_t added = 0;
      std::vector<std::pair<long double, std::size_t>> viol;
      for (std::size_t i = 0; i < m_; ++i) {
        viol.clear();
        for (std::size_t j = 0; j < k_; ++j) {
          const long double rc = reduced(ns, i, j, cost(i, j));
          if (rc < -static_cast<long double>(rc_tol)) viol.emplace_back(rc, j);
        }
        const std::size_t take = std::min(viol.size(), opts_.candidate_neighbors);
        std::partial_sort(viol.begin(), viol.begin() + static_cast<std::ptrdiff_t>(take), viol.end());
        for (std::size_t t = 0; t < take; ++t) {
          keys.push_back(i * (k_ + 1) + viol[t].second);
          ++added;
        }
      }
      if (added == 0) return ns;
      std::sort(keys.begin(), keys.end());
      keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
      arcs.clear();
      for (std::uint64_t key : keys) arcs.push_back({key / (k_ + 1), key % (k_ + 1)});
      costs = arc_costs(arcs);
    }
  }

  std::vector<Arc> tight_arcs(const NetworkSimplex& ns, const std::vector<Arc>& arcs, bool dense,
                              double face_tol) const {
    std::vector<Arc> face;
    const auto tol = static_cast<long double>(face_tol);
    if (dense) {
      for (std::size_t e = 0; e < arcs.size(); ++e) {
        if (ns.reduced_cost(static_cast<int>(e)) <= tol || ns.flow(static_cast<int>(e)) > 0.0) face.push_back(arcs[e]);
      }
      return face;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < k_; ++j) {
        if (reduced(ns, i, j, cost(i, j)) <= tol) face.push_back({i, j});
      }
      if (use_sink_ && reduced(ns, i, k_, 0.0) <= tol) face.push_back({i, k_});
    }
    // Arcs carrying flow are always kept so the face stays feasible.
    for (std::size_t e = 0; e < arcs.size(); ++e) {
      if (ns.flow(static_cast<int>(e)) > 0.0) face.push_back(arcs[e]);
    }
    std::sort(face.begin(), face.end(), [](const Arc& a, const Arc& b) {
      return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    face.erase(std::unique(face.begin(), face.end(),
                           [](const Arc& a, const Arc& b) { return a.source == b.source && a.target == b.target; }),
               face.end());
    return face;
  }

  const PeriodicDomain& dom_;
  const DiscreteMeasure& mu_;
  const DiscreteMeasure& nu_;
  const ConcaveCost& theta_;
  SolverOptions opts_;
  std::size_t m_;
  std::size_t k_;
  std::vector<double> supply_;
  double surplus_ = 0.0;
  bool use_sink_ = false;
  double scale_ = 1.0;
  double max_cost_ = 0.0;
};

}  // namespace

double displacement_weight(const PeriodicDomain& domain, const Point& displacement) {
  constexpr std::int64_t kPeriod = std::int64_t{1} << 32;
  const double quantum = domain.side() * std::ldexp(1.0, -32);
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (int i = 0; i < domain.dim(); ++i) {
    // +L/2 and -L/2 are the same displacement on the torus.
    auto q = static_cast<std::int64_t>(std::llround(displacement[i] / quantum));
    q = ((q % kPeriod) + kPeriod + kPeriod / 2) % kPeriod - kPeriod / 2;
    h = splitmix64(h ^ static_cast<std::uint64_t>(q));
  }
  return static_cast<double>(h >> 11) * std::ldexp(1.0, -53);
}

TransportPlan solve_semicoupling(std::shared_ptr<const DiscreteMeasure> mu, std::shared_ptr<const DiscreteMeasure> nu,
                                 const ConcaveCost& theta, const SolverOptions& opts) {
  require_same_domain(mu->domain(), nu->domain());
  if (!(opts.tolerance > 0.0)) throw Error(ErrorCode::kInvalidArgument, "solver tolerance must be positive");
  SemicouplingProblem problem(*mu, *nu, theta, opts);
  return problem.solve(mu, nu);
}

TransportPlan solve_semicoupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta,
                                 const SolverOptions& opts) {
  return solve_semicoupling(std::make_shared<const DiscreteMeasure>(mu), std::make_shared<const DiscreteMeasure>(nu),
                            theta, opts);
}

double plan_cost(const TransportPlan& plan, const ConcaveCost& theta) {
  double c = 0.0;
  for (const PlanEntry& e : plan.entries()) c += e.mass * theta(plan.distance(e));
  return c;
}

namespace {

// Exhaustive enumeration of spanning trees of the complete bipartite graph
// sources x (targets + optional sink), in arc order, with union-find pruning.
class BasisEnumerator {
 public:
  BasisEnumerator(std::vector<double> supply, std::vector<double> demand, std::vector<std::vector<double>> cost,
                  double flow_tol)
      : supply_(std::move(supply)),
        demand_(std::move(demand)),
        cost_(std::move(cost)),
        m_(supply_.size()),
        t_(demand_.size()),
        flow_tol_(flow_tol) {
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < t_; ++j) arcs_.emplace_back(i, j);
    }
  }

  template <typename Visit>
  void enumerate(Visit&& visit) {
    const std::size_t nodes = m_ + t_;
    std::vector<int> parent(nodes);
    std::iota(parent.begin(), parent.end(), 0);
    chosen_.clear();
    recurse(0, parent, visit);
  }

  std::size_t visited() const { return visited_; }

 private:
  static int find(std::vector<int>& p, int x) {
    while (p[static_cast<std::size_t>(x)] != x) x = p[static_cast<std::size_t>(x)];
    return x;
  }

  template <typename Visit>
  void recurse(std::size_t next, std::vector<int>& parent, Visit& visit) {
    const std::size_t need = m_ + t_ - 1;
    if (chosen_.size() == need) {
      ++visited_;
      evaluate(visit);
      return;
    }
    if (arcs_.size() - next < need - chosen_.size()) return;
    for (std::size_t e = next; e < arcs_.size(); ++e) {
      if (arcs_.size() - e < need - chosen_.size()) return;
      const int a = find(parent, static_cast<int>(arcs_[e].first));
      const int b = find(parent, static_cast<int>(m_ + arcs_[e].second));
      if (a == b) continue;
      std::vector<int> saved = parent;
      parent[static_cast<std::size_t>(a)] = b;
      chosen_.push_back(e);
      recurse(e + 1, parent, visit);
      chosen_.pop_back();
      parent = std::move(saved);
    }
  }

  template <typename Visit>
  void evaluate(Visit& visit) {
    const std::size_t nodes = m_ + t_;
    std::vector<double> rem(nodes);
    for (std::size_t i = 0; i < m_; ++i) rem[i] = supply_[i];
    for (std::size_t j = 0; j < t_; ++j) rem[m_ + j] = demand_[j];
    std::vector<int> degree(nodes, 0);
    for (std::size_t e : chosen_) {
      ++degree[arcs_[e].first];
      ++degree[m_ + arcs_[e].second];
    }
    std::vector<char> done(chosen_.size(), 0);
    std::vector<double> flow(chosen_.size(), 0.0);
    for (std::size_t round = 0; round < chosen_.size(); ++round) {
      bool progressed = false;
      for (std::size_t c = 0; c < chosen_.size(); ++c) {
        if (done[c]) continue;
        const std::size_t s = arcs_[chosen_[c]].first;
        const std::size_t t = m_ + arcs_[chosen_[c]].second;
        if (degree[s] == 1) {
          flow[c] = rem[s];
          rem[t] -= flow[c];
          rem[s] = 0.0;
        } else if (degree[t] == 1) {
          flow[c] = rem[t];
          rem[s] -= flow[c];
          rem[t] = 0.0;
        } else {
          continue;
        }
        --degree[s];
        --degree[t];
        done[c] = 1;
        progressed = true;
        break;
      }
      if (!progressed) return;
    }
    double cost = 0.0;
    std::vector<std::tuple<std::size_t, std::size_t, double>> support;
    for (std::size_t c = 0; c < chosen_.size(); ++c) {
      if (flow[c] < -flow_tol_) return;
      const auto [i, j] = arcs_[chosen_[c]];
      cost += flow[c] * cost_[i][j];
      if (flow[c] > flow_tol_) support.emplace_back(i, j, flow[c]);
    }
    visit(cost, support);
  }

  std::vector<double> supply_;
  std::vector<double> demand_;
  std::vector<std::vector<double>> cost_;
  std::size_t m_;
  std::size_t t_;
  double flow_tol_;
  std::vector<std::pair<std::size_t, std::size_t>> arcs_;
  std::vector<std::size_t> chosen_;
  std::size_t visited_ = 0;
};

}  // namespace

OracleResult brute_force_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta,
                                const SolverOptions& opts) {
  require_same_domain(mu.domain(), nu.domain());
  if (mu.size() + nu.size() > opts.oracle_limit) {
    throw Error(ErrorCode::kTooLarge, "instance exceeds the oracle atom limit");
  }
  const double total_mu = mu.total_mass();
  const double total_nu = nu.total_mass();
  const double tol = opts.tolerance * std::max(1.0, total_nu);
  if (total_mu < total_nu - tol) throw Error(ErrorCode::kInfeasible, "source mass is smaller than target mass");
  auto mu_ptr = std::make_shared<const DiscreteMeasure>(mu);
  auto nu_ptr = std::make_shared<const DiscreteMeasure>(nu);
  OracleResult result;
  if (nu.empty()) {
    result.optimal_plans.emplace_back(mu_ptr, nu_ptr, std::vector<PlanEntry>{});
    return result;
  }

  const bool sink = total_mu - total_nu > tol;
  std::vector<double> demand = nu.masses();
  if (sink) demand.push_back(total_mu - total_nu);
  std::vector<std::vector<double>> cost(mu.size(), std::vector<double>(demand.size(), 0.0));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      cost[i][j] = theta(mu.domain().distance(mu[i].location, nu[j].location));
    }
  }
  const double scale = std::max(1.0, total_mu);
  const double flow_tol = 1e-12 * scale;
  BasisEnumerator enumerator(mu.masses(), demand, cost, flow_tol);

  using Support = std::vector<std::tuple<std::size_t, std::size_t, double>>;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, Support>> optimal;
  const double cost_tol_rel = 1e-9;
  auto same_vertex = [&](const Support& a, const Support& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t q = 0; q < a.size(); ++q) {
      if (std::get<0>(a[q]) != std::get<0>(b[q]) || std::get<1>(a[q]) != std::get<1>(b[q])) return false;
      if (std::abs(std::get<2>(a[q]) - std::get<2>(b[q])) > 1e-9 * scale) return false;
    }
    return true;
  };
  enumerator.enumerate([&](double c, Support support) {
    std::sort(support.begin(), support.end());
    const double tol_c = cost_tol_rel * std::max(1.0, std::abs(best));
    if (c < best - tol_c) {
      best = c;
      std::erase_if(optimal, [&](const auto& o) { return o.first > best + cost_tol_rel * std::max(1.0, std::abs(best)); });
    } else if (c > best + tol_c) {
      return;
    }
    best = std::min(best, c);
    for (const auto& o : optimal) {
      if (same_vertex(o.second, support)) return;
    }
    optimal.emplace_back(c, std::move(support));
  });
  result.bases_visited = enumerator.visited();
  if (optimal.empty()) throw Error(ErrorCode::kInfeasible, "no feasible basis found");
  result.optimal_cost = best;
  for (const auto& [c, support] : optimal) {
    std::vector<PlanEntry> entries;
    for (const auto& [i, j, x] : support) {
      if (j < nu.size()) entries.push_back({i, j, x});
    }
    result.optimal_plans.emplace_back(mu_ptr, nu_ptr, std::move(entries));
  }
  return result;
}

double indicator_fraction(const TransportPlan& plan) {
  const DiscreteMeasure& mu = plan.source_measure();
  if (mu.total_mass() <= 0.0) return 0.0;
  const auto used = plan.source_used();
  double partial = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double r = used[i] / mu[i].mass;
    if (r > 1e-9 && r < 1.0 - 1e-9) partial += mu[i].mass;
  }
  return partial / mu.total_mass();
}

SplitReport split_report(const TransportPlan& plan) {
  SplitReport rep;
  const auto& entries = plan.entries();
  std::size_t b = 0;
  while (b < entries.size()) {
    std::size_t e = b;
    double used = 0.0;
    double largest = 0.0;
    while (e < entries.size() && entries[e].source == entries[b].source) {
      used += entries[e].mass;
      largest = std::max(largest, entries[e].mass);
      ++e;
    }
    if (e - b > 1) {
      rep.sources.push_back(entries[b].source);
      rep.split_mass += used - largest;
      rep.split_source_mass += used;
    }
    b = e;
  }
  return rep;
}

std::variant<AllocationMap, SplitReport> extract_map(const TransportPlan& plan) {
  SplitReport rep = split_report(plan);
  if (rep.count() > 0) return rep;
  const DiscreteMeasure& mu = plan.source_measure();
  const DiscreteMeasure& nu = plan.target_measure();
  std::vector<Assignment> as;
  as.reserve(plan.entries().size());
  for (const PlanEntry& e : plan.entries()) {
    as.push_back({e.source, nu[e.target].location, std::min(1.0, e.mass / mu[e.source].mass)});
  }
  return AllocationMap(plan.source_ptr(), std::move(as));
}

}  // namespace rmt
