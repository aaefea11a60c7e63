#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adr/graph.hpp"
#include "adr/ids.hpp"
#include "adr/production.hpp"

namespace adr {

/// An edge together with the nodes it was attached to when recorded.
/// Records of replaced edges stay on their vertex as history. Synthetic
/// records name intermediate edges that only exist in a reconfiguration's
/// term and were never part of the graph.
struct EdgeRecord {
  EdgeId edge;
  std::string type;
  std::vector<NodeId> nodes;
  std::string name;
  bool synthetic = false;

  bool operator==(const EdgeRecord&) const = default;
};

/// Ordered rooted trees over vertex ids. Child order is significant.
struct TrackingForest {
  std::vector<VertexId> roots;
  std::map<VertexId, std::vector<VertexId>> children;
  std::map<VertexId, VertexId> parent;

  bool contains(VertexId v) const { return children.count(v) > 0; }
  bool is_leaf(VertexId v) const { return children.at(v).empty(); }
  const std::vector<VertexId>& kids(VertexId v) const { return children.at(v); }
  std::optional<VertexId> parent_of(VertexId v) const;
  VertexId root_of(VertexId v) const;

  /// Vertices of the whole forest / of one subtree, in preorder.
  std::vector<VertexId> preorder() const;
  std::vector<VertexId> subtree(VertexId v) const;
  std::vector<VertexId> leaves(VertexId v) const;

  void add_vertex(VertexId v, std::optional<VertexId> parent);
  /// Removes `v` and everything below it. Detaches `v` from its parent.
  void erase_subtree(VertexId v);

  bool operator==(const TrackingForest&) const = default;
};

/// env1: vertex -> recorded edge; env2: vertex -> production name.
/// Leaves have no env2 entry; a leaf without an env1 entry is a tombstone
/// standing for an empty right-hand side.
struct TrackingEnv {
  std::map<VertexId, EdgeRecord> env1;
  std::map<VertexId, std::string> env2;

  std::optional<VertexId> vertex_of(EdgeId e) const;
  bool operator==(const TrackingEnv&) const = default;
};

struct Event {
  enum class Kind { Production, Reconfiguration, Parse };
  Kind kind = Kind::Production;
  std::string name;  // production or rule name; empty for parses
  EdgeId edge;       // matched edge (productions)
  VertexId vertex;   // matched subtree root (reconfigurations, parses)
  VertexId result;   // root of the rewritten subtree (reconfigurations)

  bool operator==(const Event&) const = default;
};

std::string to_string(Event::Kind k);
Event::Kind event_kind_from_string(const std::string& s);

/// A graph evolving under productions and reconfigurations, with its
/// derivation history. Every fresh id (nodes, edges, vertices) comes from
/// `ids`, which starts at `seed`, so replaying `log` from `initial`
/// reproduces the system exactly.
struct TrackedSystem {
  Graph initial;
  std::uint64_t seed = 1;
  Graph graph;
  TrackingForest forest;
  TrackingEnv env;
  std::vector<Event> log;
  IdAllocator ids;

  bool is_tombstone(VertexId v) const {
    return forest.is_leaf(v) && !env.env1.count(v);
  }
  /// Leaves that stand for current edges.
  std::vector<VertexId> edge_leaves() const;

  bool operator==(const TrackedSystem&) const = default;
};

/// One singleton tree per edge of g0, in edge order. `seed` = 0 picks the
/// first id above everything in g0.
TrackedSystem init_tracking(const Graph& g0, std::uint64_t seed = 0);

/// Applies `p` at `m` and grows the tree whose leaf records the matched
/// edge. Throws StaleMatch for an invalid match and IntegrityError when no
/// leaf records the matched edge.
TrackedSystem record_production(const TrackedSystem& s, const Production& p,
                                const Match& m);
void record_production_in_place(TrackedSystem& s, const Production& p,
                                const Match& m);

/// Integrity problems: leaf records against the graph, env injectivity,
/// env2 exactly on internal vertices, tree count. Empty when consistent.
std::vector<std::string> check_tracking(const TrackedSystem& s);

/// The graph described by the leaf records, with nodes and theta taken
/// from s.graph. Throws IntegrityError unless it equals s.graph.
Graph current_graph(const TrackedSystem& s);

/// `[f(u1,u2), brF]` / `[f(u1,u2), ^]`; synthetic records are starred,
/// tombstones print as `[^, ^]`.
std::string vertex_label(const TrackedSystem& s, VertexId v);
std::string forest_to_text(const TrackedSystem& s);
std::string forest_to_dot(const TrackedSystem& s);

/// Edges as boxes (double border when replaceable), nodes as circles, the
/// first tentacle drawn with an arrowhead.
std::string graph_to_dot(const Graph& g);

}  // namespace adr
