#include "rmt/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmt/domain.hpp"

namespace rmt {

NetworkSimplex::NetworkSimplex(int node_count)
    : node_count_(node_count), root_(node_count), supply_(static_cast<std::size_t>(node_count), 0.0) {
  if (node_count < 0) throw Error(ErrorCode::kInvalidArgument, "negative node count");
}

int NetworkSimplex::add_arc(int from, int to, double cost) {
  if (from < 0 || to < 0 || from >= node_count_ || to >= node_count_) {
    throw Error(ErrorCode::kInvalidArgument, "arc endpoint out of range");
  }
  src_.push_back(from);
  dst_.push_back(to);
  cost_.push_back(cost);
  return arc_count_++;
}

long double NetworkSimplex::reduced_cost(int arc) const {
  const auto e = static_cast<std::size_t>(arc);
  return static_cast<long double>(cost_[e]) + pi_[static_cast<std::size_t>(src_[e])] -
         pi_[static_cast<std::size_t>(dst_[e])];
}

double NetworkSimplex::total_cost() const {
  double c = 0.0;
  for (int e = 0; e < arc_count_; ++e) c += flow_[static_cast<std::size_t>(e)] * cost_[static_cast<std::size_t>(e)];
  return c;
}

void NetworkSimplex::init_tree() {
  const auto real = static_cast<std::size_t>(arc_count_);
  const auto nodes = static_cast<std::size_t>(node_count_);
  src_.resize(real);
  dst_.resize(real);
  cost_.resize(real);

  double max_cost = 0.0;
  for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
  const double art_cost = (max_cost + 1.0) * static_cast<double>(node_count_ + 1);

  flow_.assign(real + nodes, 0.0);
  in_tree_.assign(real + nodes, 0);
  parent_.assign(nodes + 1, -1);
  pred_.assign(nodes + 1, -1);
  pred_up_.assign(nodes + 1, 0);
  depth_.assign(nodes + 1, 0);
  pi_.assign(nodes + 1, 0.0L);
  tree_adj_.assign(nodes + 1, {});

  for (int u = 0; u < node_count_; ++u) {
    const auto uu = static_cast<std::size_t>(u);
    const int e = arc_count_ + u;
    const auto ee = static_cast<std::size_t>(e);
    parent_[uu] = root_;
    pred_[uu] = e;
    depth_[uu] = 1;
    in_tree_[ee] = 1;
    if (supply_[uu] >= 0.0) {
      src_.push_back(u);
      dst_.push_back(root_);
      cost_.push_back(0.0);
      flow_[ee] = supply_[uu];
      pred_up_[uu] = 1;
      pi_[uu] = 0.0L;
    } else {
      src_.push_back(root_);
      dst_.push_back(u);
      cost_.push_back(art_cost);
      flow_[ee] = -supply_[uu];
      pred_up_[uu] = 0;
      pi_[uu] = art_cost;
    }
    tree_adj_[uu].push_back(e);
    tree_adj_[static_cast<std::size_t>(root_)].push_back(e);
  }
  block_size_ = std::max(10, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(arc_count_)))));
  next_arc_ = 0;
  iterations_ = 0;
}

int NetworkSimplex::find_entering(double tolerance) {
  if (arc_count_ == 0) return -1;
  long double best_rc = -static_cast<long double>(tolerance);
  int best = -1;
  int count = block_size_;
  for (int i = 0; i < arc_count_; ++i) {
    const int e = next_arc_;
    next_arc_ = next_arc_ + 1 == arc_count_ ? 0 : next_arc_ + 1;
    if (!in_tree_[static_cast<std::size_t>(e)]) {
      const long double rc = reduced_cost(e);
      if (rc < best_rc) {
        best_rc = rc;
        best = e;
      }
    }
    if (--count == 0) {
      if (best >= 0) return best;
      count = block_size_;
    }
  }
  return best;
}

void NetworkSimplex::rehang(int attach, int new_parent, int via_arc) {
  auto set_child = [this](int child, int par, int arc) {
    const auto c = static_cast<std::size_t>(child);
    const auto a = static_cast<std::size_t>(arc);
    parent_[c] = par;
    pred_[c] = arc;
    pred_up_[c] = src_[a] == child ? 1 : 0;
    depth_[c] = depth_[static_cast<std::size_t>(par)] + 1;
    const long double pp = pi_[static_cast<std::size_t>(par)];
    pi_[c] = pred_up_[c] ? pp - static_cast<long double>(cost_[a]) : pp + static_cast<long double>(cost_[a]);
  };
  set_child(attach, new_parent, via_arc);
  stack_.clear();
  stack_.push_back(attach);
  while (!stack_.empty()) {
    const int v = stack_.back();
    stack_.pop_back();
    const auto vv = static_cast<std::size_t>(v);
    for (int e : tree_adj_[vv]) {
      if (e == pred_[vv]) continue;
      const auto ee = static_cast<std::size_t>(e);
      const int w = src_[ee] == v ? dst_[ee] : src_[ee];
      set_child(w, v, e);
      stack_.push_back(w);
    }
  }
}

void NetworkSimplex::pivot(int in_arc) {
  const auto in = static_cast<std::size_t>(in_arc);
  const int first = src_[in];
  const int second = dst_[in];

  int u = first;
  int v = second;
  while (u != v) {
    const int du = depth_[static_cast<std::size_t>(u)];
    const int dv = depth_[static_cast<std::size_t>(v)];
    if (du >= dv) u = parent_[static_cast<std::size_t>(u)];
    if (dv >= du) v = parent_[static_cast<std::size_t>(v)];
  }
  const int join = u;

  // Leaving arc: last blocking arc in cycle orientation (strongly feasible rule).
  double delta = std::numeric_limits<double>::infinity();
  int u_out = -1;
  int side = 0;
  for (u = first; u != join; u = parent_[static_cast<std::size_t>(u)]) {
    const auto uu = static_cast<std::size_t>(u);
    if (pred_up_[uu]) {
      const double d = flow_[static_cast<std::size_t>(pred_[uu])];
      if (d < delta) {
        delta = d;
        u_out = u;
        side = 1;
      }
    }
  }
  for (u = second; u != join; u = parent_[static_cast<std::size_t>(u)]) {
    const auto uu = static_cast<std::size_t>(u);
    if (!pred_up_[uu]) {
      const double d = flow_[static_cast<std::size_t>(pred_[uu])];
      if (d <= delta) {
        delta = d;
        u_out = u;
        side = 2;
      }
    }
  }
  if (u_out < 0) throw Error(ErrorCode::kInfeasible, "unbounded min-cost flow (negative cycle)");

  if (delta > 0.0) {
    flow_[in] += delta;
    for (u = first; u != join; u = parent_[static_cast<std::size_t>(u)]) {
      const auto uu = static_cast<std::size_t>(u);
      double& f = flow_[static_cast<std::size_t>(pred_[uu])];
      f = pred_up_[uu] ? f - delta : f + delta;
    }
    for (u = second; u != join; u = parent_[static_cast<std::size_t>(u)]) {
      const auto uu = static_cast<std::size_t>(u);
      double& f = flow_[static_cast<std::size_t>(pred_[uu])];
      f = pred_up_[uu] ? f + delta : f - delta;
    }
  }

  const auto uo = static_cast<std::size_t>(u_out);
  const int leave = pred_[uo];
  in_tree_[static_cast<std::size_t>(leave)] = 0;
  in_tree_[in] = 1;
  auto drop = [this, leave](int node) {
    auto& adj = tree_adj_[static_cast<std::size_t>(node)];
    auto it = std::find(adj.begin(), adj.end(), leave);
    *it = adj.back();
    adj.pop_back();
  };
  drop(u_out);
  drop(parent_[uo]);
  tree_adj_[static_cast<std::size_t>(first)].push_back(in_arc);
  tree_adj_[static_cast<std::size_t>(second)].push_back(in_arc);
  if (side == 1) {
    rehang(first, second, in_arc);
  } else {
    rehang(second, first, in_arc);
  }
}

NetworkSimplex::Status NetworkSimplex::run(double rc_tolerance) {
  init_tree();
  const std::size_t max_iter = 50 * static_cast<std::size_t>(arc_count_ + node_count_) + 100000;
  for (;;) {
    const int in = find_entering(rc_tolerance);
    if (in < 0) break;
    pivot(in);
    if (++iterations_ > max_iter) throw Error(ErrorCode::kInfeasible, "network simplex iteration limit reached");
  }
  double scale = 1.0;
  for (double s : supply_) scale += std::abs(s);
  for (int u = 0; u < node_count_; ++u) {
    if (flow_[static_cast<std::size_t>(arc_count_ + u)] > 1e-9 * scale) return Status::kInfeasible;
  }
  return Status::kOptimal;
}

}  // namespace rmt
