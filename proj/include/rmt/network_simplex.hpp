#pragma once

#include <cstddef>
#include <vector>

namespace rmt {

/// Primal network simplex for uncapacitated min-cost flow with real supplies.
///
/// Starts from an artificial spanning tree rooted at an extra node and keeps
/// the basis strongly feasible, which rules out cycling on degenerate pivots.
/// Flows stay nonnegative exactly; potentials are kept in long double.
class NetworkSimplex {
 public:
  enum class Status { kOptimal, kInfeasible };

  explicit NetworkSimplex(int node_count);

  /// Returns the arc id.
  int add_arc(int from, int to, double cost);
  /// Positive supply = source, negative = demand.
  void set_supply(int node, double supply) { supply_[static_cast<std::size_t>(node)] = supply; }

  /// `rc_tolerance` is the entering threshold (reduced cost < -tolerance).
  Status run(double rc_tolerance);

  double flow(int arc) const { return flow_[static_cast<std::size_t>(arc)]; }
  long double potential(int node) const { return pi_[static_cast<std::size_t>(node)]; }
  long double reduced_cost(int arc) const;
  double total_cost() const;
  int arc_count() const { return arc_count_; }
  int node_count() const { return node_count_; }
  std::size_t iterations() const { return iterations_; }

 private:
  void init_tree();
  int find_entering(double tolerance);
  void pivot(int in_arc);
  void rehang(int attach, int new_parent, int via_arc);

  int node_count_;
  int arc_count_ = 0;
  int root_;
  std::vector<double> supply_;
  // Real arcs first, then one artificial arc per node.
  std::vector<int> src_;
  std::vector<int> dst_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<char> in_tree_;
  // Spanning tree.
  std::vector<int> parent_;
  std::vector<int> pred_;
  std::vector<char> pred_up_;  // pred arc points from node to parent
  std::vector<int> depth_;
  std::vector<long double> pi_;
  std::vector<std::vector<int>> tree_adj_;
  std::vector<int> stack_;
  int next_arc_ = 0;
  int block_size_ = 10;
  std::size_t iterations_ = 0;
};

}  // namespace rmt
