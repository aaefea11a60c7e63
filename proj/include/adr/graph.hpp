#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adr/ids.hpp"

namespace adr {

class Graph;

/// The architectural vocabulary: node types plus, for every edge type, the
/// ordered list of node types its tentacles attach to.
class TypeGraph {
 public:
  void add_node_type(std::string name);
  void add_edge_type(std::string name, std::vector<std::string> signature);

  bool has_node_type(std::string_view name) const;
  bool has_edge_type(std::string_view name) const;

  /// Throws UnknownEdgeType.
  const std::vector<std::string>& signature(std::string_view edge_type) const;
  std::size_t arity(std::string_view edge_type) const {
    return signature(edge_type).size();
  }

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<std::pair<std::string, std::vector<std::string>>>&
  edge_types() const {
    return edge_types_;
  }

  /// Violations of the type graph's own invariants (undeclared node types in
  /// a signature, duplicate labels). Empty when well formed.
  std::vector<std::string> check() const;

  /// The type graph viewed as an ordinary graph in which every element is
  /// typed by itself. Node type k gets NodeId(k+1); edge type k gets
  /// EdgeId(#node types + k + 1).
  Graph as_graph() const;

  bool operator==(const TypeGraph&) const = default;

 private:
  std::vector<std::string> node_types_;
  std::vector<std::pair<std::string, std::vector<std::string>>> edge_types_;
};

struct Node {
  NodeId id;
  std::string type;
  std::string name;  // presentation only

  bool operator==(const Node&) const = default;
};

struct Edge {
  EdgeId id;
  std::string type;
  std::vector<NodeId> att;    // tentacle function, first tentacle first
  std::optional<bool> theta;  // replaceability; empty only in broken input
  std::string name;

  bool replaceable() const { return theta.value_or(false); }
  bool operator==(const Edge&) const = default;
};

/// A typed hypergraph with a replaceability map. Graphs are plain values:
/// copying is the snapshot mechanism, and nothing is shared between copies.
/// Edge order is insertion order and is significant.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph without any checking. Duplicate ids and dangling
  /// tentacles are kept as given so that validate_graph can report them.
  static Graph from_parts(std::vector<Node> nodes, std::vector<Edge> edges);

  /// Throws std::invalid_argument on a duplicate id.
  const Node& add_node(Node node);
  const Edge& add_edge(Edge edge);
  const Edge& insert_edge(std::size_t position, Edge edge);

  void remove_edge(EdgeId id);
  void remove_node(NodeId id);
  void set_attachment(EdgeId id, std::vector<NodeId> att);
  void set_theta(EdgeId id, std::optional<bool> theta);
  void rename_node_type(NodeId id, std::string type);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const Node* find_node(NodeId id) const;
  const Edge* find_edge(EdgeId id) const;
  bool has_node(NodeId id) const { return find_node(id) != nullptr; }
  bool has_edge(EdgeId id) const { return find_edge(id) != nullptr; }
  const Node& node(NodeId id) const;
  const Edge& edge(EdgeId id) const;
  std::size_t edge_position(EdgeId id) const;

  /// Edges touching `n`, in edge order.
  std::vector<EdgeId> incident(NodeId n) const;

  /// Largest id (of any kind) mentioned anywhere in the graph, 0 if empty.
  std::uint64_t max_id() const;

  /// Display name, falling back to the numeric id.
  std::string label(NodeId id) const;
  std::string label(EdgeId id) const;

  bool empty() const { return nodes_.empty() && edges_.empty(); }

  /// Exact equality: same ids, types, attachments, theta and order.
  /// Display names are ignored.
  bool operator==(const Graph& other) const;

 private:
  void reindex();

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<EdgeId, std::size_t> edge_index_;
};

struct Violation {
  std::string subject;  // "edge fl1", "node u3", ...
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

/// Checks that `g` is typed over `gamma`: declared types, tentacle counts
/// and node types along each edge match the signature, no dangling
/// tentacles, theta total, ids unique.
ValidationReport validate_graph(const Graph& g, const TypeGraph& gamma);

struct GraphMorphism {
  std::map<NodeId, NodeId> nodes;
  std::map<EdgeId, EdgeId> edges;

  NodeId operator()(NodeId n) const;
  EdgeId operator()(EdgeId e) const;
  bool operator==(const GraphMorphism&) const = default;
};

/// True iff `f` preserves tentacles and typing. Replaceability is ignored.
/// Throws MorphismDomainError when `f` is not total on `g` or maps outside
/// `h`.
bool check_morphism(const GraphMorphism& f, const Graph& g, const Graph& h);

/// g after f.
GraphMorphism compose(const GraphMorphism& f, const GraphMorphism& g);
GraphMorphism inverse(const GraphMorphism& f);
GraphMorphism identity_morphism(const Graph& g);

/// The typing map of `g` as a morphism into gamma.as_graph(). Elements whose
/// type is not declared are left unmapped.
GraphMorphism typing_morphism(const Graph& g, const TypeGraph& gamma);

/// Backtracking search for a typed isomorphism g -> h, also matching theta
/// when `respect_theta` is set. Meant for small graphs.
std::optional<GraphMorphism> find_isomorphism(const Graph& g, const Graph& h,
                                              bool respect_theta = true);

inline bool isomorphic(const Graph& g, const Graph& h,
                       bool respect_theta = true) {
  return find_isomorphism(g, h, respect_theta).has_value();
}

/// Fresh isomorphic copy: every node and edge gets a new id from `ids`.
/// Returns the copy and the morphism from `g` into it.
std::pair<Graph, GraphMorphism> fresh_copy(const Graph& g, IdAllocator& ids);

/// Short human-readable rendering, e.g. "ff:FF(u2,u1) fl1:Fls*(u3,u2)".
/// Replaceable edges carry a trailing '*' on the type.
std::string describe(const Graph& g);

}  // namespace adr
