#pragma once

#include <vector>

#include "gbpfusion/bp/factor_graph.hpp"

namespace gbpfusion::bp {

enum class Direction { VariableToFactor, FactorToVariable };

struct ScheduledMessage {
  EdgeIndex edge;
  Direction direction;

  friend bool operator==(const ScheduledMessage&, const ScheduledMessage&) = default;
};

struct Schedule {
  std::vector<ScheduledMessage> order;
  bool loopy = false;
};

namespace detail {

struct Node {
  bool is_variable;
  std::size_t index;
};

/// Two-pass order on one tree component rooted at `root` (a variable): every
/// node sends to its parent after hearing from all of its children, then
/// parents send back down in pre-order.
inline void tree_two_pass(const FactorGraph& graph, std::size_t root, std::vector<ScheduledMessage>& out) {
  struct Visit {
    Node node;
    EdgeIndex parent_edge;
    bool has_parent;
  };
  std::vector<Visit> preorder;
  std::vector<Visit> stack{{{true, root}, 0, false}};
  while (!stack.empty()) {
    Visit v = stack.back();
    stack.pop_back();
    preorder.push_back(v);
    const auto& adj = v.node.is_variable ? graph.variable_edges(v.node.index) : graph.factor_edges(v.node.index);
    for (auto it = adj.rbegin(); it != adj.rend(); ++it) {
      const EdgeIndex e = *it;
      if (v.has_parent && e == v.parent_edge) continue;
      const Edge& edge = graph.edges()[e];
      const Node child = v.node.is_variable ? Node{false, edge.factor} : Node{true, edge.variable};
      stack.push_back({child, e, true});
    }
  }
  for (auto it = preorder.rbegin(); it != preorder.rend(); ++it) {
    if (!it->has_parent) continue;
    out.push_back({it->parent_edge,
                   it->node.is_variable ? Direction::VariableToFactor : Direction::FactorToVariable});
  }
  for (const Visit& v : preorder) {
    if (!v.has_parent) continue;
    out.push_back({v.parent_edge, v.node.is_variable ? Direction::FactorToVariable : Direction::VariableToFactor});
  }
}

}  // namespace detail

/// Message order for one full sweep.
///
/// Trees (every component acyclic) get a leaves-inward, root-outward order so
/// each message is computed after the messages it depends on. Any cycle makes
/// the whole graph use a synchronous sweep: all variable-to-factor messages,
/// then all factor-to-variable messages, each directed edge exactly once.
inline Schedule schedule_messages(const FactorGraph& graph) {
  Schedule schedule;
  const auto comps = graph.components();
  for (const auto& c : comps) {
    if (!c.is_tree()) schedule.loopy = true;
  }
  if (schedule.loopy) {
    for (EdgeIndex e = 0; e < graph.num_edges(); ++e) schedule.order.push_back({e, Direction::VariableToFactor});
    for (EdgeIndex e = 0; e < graph.num_edges(); ++e) schedule.order.push_back({e, Direction::FactorToVariable});
    return schedule;
  }
  for (const auto& c : comps) detail::tree_two_pass(graph, c.variables.front(), schedule.order);
  return schedule;
}

}  // namespace gbpfusion::bp
