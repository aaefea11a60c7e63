#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adr/formula.hpp"
#include "adr/graph.hpp"
#include "adr/ids.hpp"

namespace adr {

/// A design production L -> R. L is a single replaceable edge whose nodes
/// are exactly its (pairwise distinct) tentacles; `interface` sends every
/// L-node to the R-node it is glued to.
struct Production {
  std::string name;
  Graph lhs;
  Graph rhs;
  std::map<NodeId, NodeId> interface;
  std::vector<EdgeId> rhs_order;

  const Edge& lhs_edge() const { return lhs.edges().front(); }
  const std::string& lhs_type() const { return lhs_edge().type; }
  /// Edge types of R in rhs_order: the argument sorts of the production
  /// viewed as an operation.
  std::vector<std::string> argument_types() const;
  /// R edges in rhs_order.
  std::vector<const Edge*> ordered_rhs_edges() const;
  bool is_interface_node(NodeId r) const;
  std::vector<NodeId> internal_nodes() const;

  bool operator==(const Production&) const = default;
};

/// Problems with `p`, empty when well formed. With `gamma`, L and R are
/// also validated as typed graphs.
std::vector<std::string> check_production(const Production& p,
                                          const TypeGraph* gamma = nullptr);

/// Fills in a default rhs_order (R's edge order) and validates. Throws
/// IllFormedProduction.
Production make_production(std::string name, Graph lhs, Graph rhs,
                           std::map<NodeId, NodeId> interface,
                           std::vector<EdgeId> rhs_order = {},
                           const TypeGraph* gamma = nullptr);

struct Match {
  EdgeId edge;
  std::map<NodeId, NodeId> nodes;  // L-node -> G-node

  bool operator==(const Match&) const = default;
};

/// One match per replaceable edge of L's type, in edge order.
std::vector<Match> find_matches(const Graph& g, const Production& p);

/// The match of `p` at edge `e`. Throws StaleMatch when `e` is absent, not
/// replaceable or of another type.
Match match_at(const Graph& g, const Production& p, EdgeId e);

struct Application {
  Graph graph;
  GraphMorphism copy;          // R -> result
  std::vector<EdgeId> created;  // new edges, in rhs_order
};

/// Replaces the matched edge by a fresh copy of R. New edges take the
/// removed edge's position. Throws StaleMatch.
Application apply_production(const Graph& g, const Production& p,
                             const Match& m, IdAllocator& ids);
/// Same, with ids drawn above everything in g, L and R.
Application apply_production(const Graph& g, const Production& p,
                             const Match& m);

struct AssertedProduction {
  Production production;
  Formula pre = Formula::top();
  Assignment pre_h;  // into nodes of L
  Formula post = Formula::top();
  Assignment post_h;  // into nodes of R
};

/// Problems with the assignments of `a` (values outside L / R, unbound
/// free variables).
std::vector<std::string> check_asserted(const AssertedProduction& a);

struct AssertedOutcome {
  std::optional<Application> applied;
  std::optional<Witness> violation;  // precondition failure
  bool ok() const { return applied.has_value(); }
};

/// Applies the production when G satisfies the precondition under pre_h
/// composed with the match; otherwise reports the failing assignment.
AssertedOutcome apply_asserted(const Graph& g, const AssertedProduction& a,
                               const Match& m, IdAllocator& ids);
AssertedOutcome apply_asserted(const Graph& g, const AssertedProduction& a,
                               const Match& m);

/// pre_h / post_h pushed through the match and the copy morphism.
Assignment induced_pre_assignment(const AssertedProduction& a, const Match& m);
Assignment induced_post_assignment(const AssertedProduction& a,
                                   const Application& app);

}  // namespace adr
