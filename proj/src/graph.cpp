#include "adr/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "adr/errors.hpp"

namespace adr {

// ---------------------------------------------------------------- TypeGraph

void TypeGraph::add_node_type(std::string name) {
  node_types_.push_back(std::move(name));
}

void TypeGraph::add_edge_type(std::string name,
                              std::vector<std::string> signature) {
  edge_types_.emplace_back(std::move(name), std::move(signature));
}

bool TypeGraph::has_node_type(std::string_view name) const {
  return std::find(node_types_.begin(), node_types_.end(), name) !=
         node_types_.end();
}

bool TypeGraph::has_edge_type(std::string_view name) const {
  return std::any_of(edge_types_.begin(), edge_types_.end(),
                     [&](const auto& et) { return et.first == name; });
}

const std::vector<std::string>& TypeGraph::signature(
    std::string_view edge_type) const {
  for (const auto& [name, sig] : edge_types_)
    if (name == edge_type) return sig;
  throw UnknownEdgeType("unknown edge type '" + std::string(edge_type) + "'");
}

std::vector<std::string> TypeGraph::check() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& n : node_types_)
    if (!seen.insert(n).second) out.push_back("duplicate node type '" + n + "'");
  seen.clear();
  for (const auto& [name, sig] : edge_types_) {
    if (!seen.insert(name).second)
      out.push_back("duplicate edge type '" + name + "'");
    for (const auto& t : sig)
      if (!has_node_type(t))
        out.push_back("edge type '" + name + "' uses undeclared node type '" +
                      t + "'");
  }
  return out;
}

Graph TypeGraph::as_graph() const {
  Graph g;
  std::map<std::string, NodeId> ids;
  std::uint64_t next = 1;
  for (const auto& n : node_types_) {
    NodeId id(next++);
    ids.emplace(n, id);
    g.add_node({id, n, n});
  }
  for (const auto& [name, sig] : edge_types_) {
    Edge e{EdgeId(next++), name, {}, false, name};
    for (const auto& t : sig) {
      auto it = ids.find(t);
      if (it == ids.end())
        throw UnknownEdgeType("edge type '" + name +
                              "' uses undeclared node type '" + t + "'");
      e.att.push_back(it->second);
    }
    g.add_edge(std::move(e));
  }
  return g;
}

// -------------------------------------------------------------------- Graph

Graph Graph::from_parts(std::vector<Node> nodes, std::vector<Edge> edges) {
  Graph g;
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.reindex();
  return g;
}

void Graph::reindex() {
  node_index_.clear();
  edge_index_.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    node_index_.try_emplace(nodes_[i].id, i);
  for (std::size_t i = 0; i < edges_.size(); ++i)
    edge_index_.try_emplace(edges_[i].id, i);
}

const Node& Graph::add_node(Node node) {
  if (node_index_.count(node.id))
    throw std::invalid_argument("duplicate node id " +
                                std::to_string(node.id.value));
  node_index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.back();
}

const Edge& Graph::add_edge(Edge edge) {
  return insert_edge(edges_.size(), std::move(edge));
}

const Edge& Graph::insert_edge(std::size_t position, Edge edge) {
  if (edge_index_.count(edge.id))
    throw std::invalid_argument("duplicate edge id " +
                                std::to_string(edge.id.value));
  position = std::min(position, edges_.size());
  if (position == edges_.size()) {
    edge_index_.emplace(edge.id, edges_.size());
    edges_.push_back(std::move(edge));
    return edges_.back();
  }
  edges_.insert(edges_.begin() + static_cast<std::ptrdiff_t>(position),
                std::move(edge));
  reindex();
  return edges_[position];
}

void Graph::remove_edge(EdgeId id) {
  auto it = edge_index_.find(id);
  if (it == edge_index_.end()) return;
  edges_.erase(edges_.begin() + static_cast<std::ptrdiff_t>(it->second));
  reindex();
}

void Graph::remove_node(NodeId id) {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) return;
  nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(it->second));
  reindex();
}

void Graph::set_attachment(EdgeId id, std::vector<NodeId> att) {
  auto it = edge_index_.find(id);
  if (it == edge_index_.end())
    throw std::out_of_range("no edge " + std::to_string(id.value));
  edges_[it->second].att = std::move(att);
}

void Graph::set_theta(EdgeId id, std::optional<bool> theta) {
  auto it = edge_index_.find(id);
  if (it == edge_index_.end())
    throw std::out_of_range("no edge " + std::to_string(id.value));
  edges_[it->second].theta = theta;
}

void Graph::rename_node_type(NodeId id, std::string type) {
  auto it = node_index_.find(id);
  if (it == node_index_.end())
    throw std::out_of_range("no node " + std::to_string(id.value));
  nodes_[it->second].type = std::move(type);
}

const Node* Graph::find_node(NodeId id) const {
  auto it = node_index_.find(id);
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const Edge* Graph::find_edge(EdgeId id) const {
  auto it = edge_index_.find(id);
  return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

const Node& Graph::node(NodeId id) const {
  if (const Node* n = find_node(id)) return *n;
  throw std::out_of_range("no node " + std::to_string(id.value));
}

const Edge& Graph::edge(EdgeId id) const {
  if (const Edge* e = find_edge(id)) return *e;
  throw std::out_of_range("no edge " + std::to_string(id.value));
}

std::size_t Graph::edge_position(EdgeId id) const {
  auto it = edge_index_.find(id);
  if (it == edge_index_.end())
    throw std::out_of_range("no edge " + std::to_string(id.value));
  return it->second;
}

std::vector<EdgeId> Graph::incident(NodeId n) const {
  std::vector<EdgeId> out;
  for (const auto& e : edges_)
    if (std::find(e.att.begin(), e.att.end(), n) != e.att.end())
      out.push_back(e.id);
  return out;
}

std::uint64_t Graph::max_id() const {
  std::uint64_t m = 0;
  for (const auto& n : nodes_) m = std::max(m, n.id.value);
  for (const auto& e : edges_) {
    m = std::max(m, e.id.value);
    for (auto a : e.att) m = std::max(m, a.value);
  }
  return m;
}

std::string Graph::label(NodeId id) const {
  const Node* n = find_node(id);
  if (n && !n->name.empty()) return n->name;
  return "n" + std::to_string(id.value);
}

std::string Graph::label(EdgeId id) const {
  const Edge* e = find_edge(id);
  if (e && !e->name.empty()) return e->name;
  return "e" + std::to_string(id.value);
}

bool Graph::operator==(const Graph& other) const {
  if (nodes_.size() != other.nodes_.size() ||
      edges_.size() != other.edges_.size())
    return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id != other.nodes_[i].id ||
        nodes_[i].type != other.nodes_[i].type)
      return false;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& a = edges_[i];
    const Edge& b = other.edges_[i];
    if (a.id != b.id || a.type != b.type || a.att != b.att ||
        a.theta != b.theta)
      return false;
  }
  return true;
}

// --------------------------------------------------------------- validation

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (const auto& v : violations) os << v.subject << ": " << v.message << "\n";
  return os.str();
}

ValidationReport validate_graph(const Graph& g, const TypeGraph& gamma) {
  ValidationReport report;
  auto add = [&](std::string subject, std::string message) {
    report.violations.push_back({std::move(subject), std::move(message)});
  };

  std::set<NodeId> seen_nodes;
  for (const auto& n : g.nodes()) {
    std::string who = "node " + g.label(n.id);
    if (!seen_nodes.insert(n.id).second)
      add(who, "duplicate node id " + std::to_string(n.id.value));
    if (!gamma.has_node_type(n.type))
      add(who, "undeclared node type '" + n.type + "'");
  }

  std::set<EdgeId> seen_edges;
  for (const auto& e : g.edges()) {
    std::string who = "edge " + (e.name.empty() ? "e" + std::to_string(e.id.value)
                                                : e.name);
    if (!seen_edges.insert(e.id).second)
      add(who, "duplicate edge id " + std::to_string(e.id.value));
    if (!e.theta) add(who, "replaceability (theta) undefined");
    if (!gamma.has_edge_type(e.type)) {
      add(who, "undeclared edge type '" + e.type + "'");
      continue;
    }
    const auto& sig = gamma.signature(e.type);
    if (sig.size() != e.att.size()) {
      add(who, "arity " + std::to_string(e.att.size()) + " but type '" +
                   e.type + "' expects " + std::to_string(sig.size()));
      continue;
    }
    for (std::size_t k = 0; k < sig.size(); ++k) {
      const Node* n = g.find_node(e.att[k]);
      if (!n) {
        add(who, "tentacle " + std::to_string(k + 1) + " dangles (node " +
                     std::to_string(e.att[k].value) + " not in graph)");
      } else if (n->type != sig[k]) {
        add(who, "tentacle " + std::to_string(k + 1) + " attached to node " +
                     g.label(n->id) + " of type '" + n->type + "', expected '" +
                     sig[k] + "'");
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------- morphisms

NodeId GraphMorphism::operator()(NodeId n) const {
  auto it = nodes.find(n);
  if (it == nodes.end())
    throw MorphismDomainError("node " + std::to_string(n.value) +
                              " not in morphism domain");
  return it->second;
}

EdgeId GraphMorphism::operator()(EdgeId e) const {
  auto it = edges.find(e);
  if (it == edges.end())
    throw MorphismDomainError("edge " + std::to_string(e.value) +
                              " not in morphism domain");
  return it->second;
}

bool check_morphism(const GraphMorphism& f, const Graph& g, const Graph& h) {
  for (const auto& n : g.nodes()) {
    auto it = f.nodes.find(n.id);
    if (it == f.nodes.end())
      throw MorphismDomainError("node map undefined on " + g.label(n.id));
    if (!h.has_node(it->second))
      throw MorphismDomainError("node " + g.label(n.id) +
                                " mapped outside the target");
  }
  for (const auto& e : g.edges()) {
    auto it = f.edges.find(e.id);
    if (it == f.edges.end())
      throw MorphismDomainError("edge map undefined on " + g.label(e.id));
    if (!h.has_edge(it->second))
      throw MorphismDomainError("edge " + g.label(e.id) +
                                " mapped outside the target");
  }

  for (const auto& n : g.nodes())
    if (h.node(f.nodes.at(n.id)).type != n.type) return false;
  for (const auto& e : g.edges()) {
    const Edge& image = h.edge(f.edges.at(e.id));
    if (image.type != e.type) return false;
    if (image.att.size() != e.att.size()) return false;
    for (std::size_t k = 0; k < e.att.size(); ++k) {
      auto it = f.nodes.find(e.att[k]);
      // A dangling tentacle has no image; that is a domain problem of g.
      if (it == f.nodes.end())
        throw MorphismDomainError("tentacle of " + g.label(e.id) +
                                  " dangles");
      if (it->second != image.att[k]) return false;
    }
  }
  return true;
}

GraphMorphism compose(const GraphMorphism& f, const GraphMorphism& g) {
  GraphMorphism out;
  for (const auto& [a, b] : f.nodes) out.nodes.emplace(a, g(b));
  for (const auto& [a, b] : f.edges) out.edges.emplace(a, g(b));
  return out;
}

GraphMorphism inverse(const GraphMorphism& f) {
  GraphMorphism out;
  for (const auto& [a, b] : f.nodes) out.nodes.emplace(b, a);
  for (const auto& [a, b] : f.edges) out.edges.emplace(b, a);
  return out;
}

GraphMorphism identity_morphism(const Graph& g) {
  GraphMorphism out;
  for (const auto& n : g.nodes()) out.nodes.emplace(n.id, n.id);
  for (const auto& e : g.edges()) out.edges.emplace(e.id, e.id);
  return out;
}

GraphMorphism typing_morphism(const Graph& g, const TypeGraph& gamma) {
  const Graph tg = gamma.as_graph();
  std::map<std::string, NodeId> node_types;
  std::map<std::string, EdgeId> edge_types;
  for (const auto& n : tg.nodes()) node_types.emplace(n.type, n.id);
  for (const auto& e : tg.edges()) edge_types.emplace(e.type, e.id);

  GraphMorphism tau;
  for (const auto& n : g.nodes())
    if (auto it = node_types.find(n.type); it != node_types.end())
      tau.nodes.emplace(n.id, it->second);
  for (const auto& e : g.edges())
    if (auto it = edge_types.find(e.type); it != edge_types.end())
      tau.edges.emplace(e.id, it->second);
  return tau;
}

// -------------------------------------------------------------- isomorphism

namespace {

class IsoSearch {
 public:
  IsoSearch(const Graph& g, const Graph& h, bool respect_theta)
      : g_(g), h_(h), respect_theta_(respect_theta) {}

  std::optional<GraphMorphism> run() {
    if (g_.nodes().size() != h_.nodes().size() ||
        g_.edges().size() != h_.edges().size())
      return std::nullopt;
    if (signature_counts(g_) != signature_counts(h_)) return std::nullopt;

    order_edges();
    used_edges_.assign(h_.edges().size(), false);
    if (!extend(0)) return std::nullopt;
    return result_;
  }

 private:
  using Counts = std::map<std::string, int>;

  Counts signature_counts(const Graph& g) const {
    Counts c;
    for (const auto& n : g.nodes()) ++c["n:" + n.type];
    for (const auto& e : g.edges()) {
      std::string key = "e:" + e.type + "/" + std::to_string(e.att.size());
      if (respect_theta_) key += e.replaceable() ? "*" : "";
      ++c[key];
    }
    return c;
  }

  // Connected-first ordering so that later edges are heavily constrained.
  void order_edges() {
    std::vector<bool> done(g_.edges().size(), false);
    std::set<NodeId> touched;
    for (std::size_t step = 0; step < g_.edges().size(); ++step) {
      std::size_t best = g_.edges().size();
      int best_score = -1;
      for (std::size_t i = 0; i < g_.edges().size(); ++i) {
        if (done[i]) continue;
        int score = 0;
        for (auto n : g_.edges()[i].att) score += touched.count(n) ? 2 : 0;
        if (score > best_score) {
          best_score = score;
          best = i;
        }
      }
      done[best] = true;
      order_.push_back(best);
      for (auto n : g_.edges()[best].att) touched.insert(n);
    }
  }

  bool compatible(const Edge& a, const Edge& b) const {
    if (a.type != b.type || a.att.size() != b.att.size()) return false;
    if (respect_theta_ && a.theta != b.theta) return false;
    return true;
  }

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return finish_nodes();
    const Edge& ge = g_.edges()[order_[depth]];
    for (std::size_t j = 0; j < h_.edges().size(); ++j) {
      if (used_edges_[j]) continue;
      const Edge& he = h_.edges()[j];
      if (!compatible(ge, he)) continue;

      std::vector<NodeId> bound;
      bool ok = true;
      for (std::size_t k = 0; k < ge.att.size() && ok; ++k) {
        NodeId a = ge.att[k], b = he.att[k];
        auto it = result_.nodes.find(a);
        if (it != result_.nodes.end()) {
          ok = it->second == b;
        } else if (h_used_.count(b)) {
          ok = false;
        } else if (g_.node(a).type != h_.node(b).type) {
          ok = false;
        } else {
          result_.nodes.emplace(a, b);
          h_used_.insert(b);
          bound.push_back(a);
        }
      }
      if (ok) {
        used_edges_[j] = true;
        result_.edges[ge.id] = he.id;
        if (extend(depth + 1)) return true;
        result_.edges.erase(ge.id);
        used_edges_[j] = false;
      }
      for (NodeId a : bound) {
        h_used_.erase(result_.nodes.at(a));
        result_.nodes.erase(a);
      }
    }
    return false;
  }

  // Nodes not reached through any edge are matched by type.
  bool finish_nodes() {
    std::map<std::string, std::vector<NodeId>> free_h;
    for (const auto& n : h_.nodes())
      if (!h_used_.count(n.id)) free_h[n.type].push_back(n.id);
    GraphMorphism extra = result_;
    for (const auto& n : g_.nodes()) {
      if (extra.nodes.count(n.id)) continue;
      auto& pool = free_h[n.type];
      if (pool.empty()) return false;
      extra.nodes.emplace(n.id, pool.back());
      pool.pop_back();
    }
    result_ = std::move(extra);
    return true;
  }

  const Graph& g_;
  const Graph& h_;
  bool respect_theta_;
  std::vector<std::size_t> order_;
  std::vector<bool> used_edges_;
  std::set<NodeId> h_used_;
  GraphMorphism result_;
};

}  // namespace

std::optional<GraphMorphism> find_isomorphism(const Graph& g, const Graph& h,
                                              bool respect_theta) {
  return IsoSearch(g, h, respect_theta).run();
}

std::pair<Graph, GraphMorphism> fresh_copy(const Graph& g, IdAllocator& ids) {
  Graph out;
  GraphMorphism iso;
  for (const auto& n : g.nodes()) {
    Node copy = n;
    copy.id = ids.node();
    iso.nodes.emplace(n.id, copy.id);
    out.add_node(std::move(copy));
  }
  for (const auto& e : g.edges()) {
    Edge copy = e;
    copy.id = ids.edge();
    for (auto& a : copy.att) a = iso.nodes.at(a);
    iso.edges.emplace(e.id, copy.id);
    out.add_edge(std::move(copy));
  }
  return {std::move(out), std::move(iso)};
}

std::string describe(const Graph& g) {
  std::ostringstream os;
  bool first = true;
  for (const auto& e : g.edges()) {
    if (!first) os << ' ';
    first = false;
    os << g.label(e.id) << ':' << e.type << (e.replaceable() ? "*" : "") << '(';
    for (std::size_t k = 0; k < e.att.size(); ++k)
      os << (k ? "," : "") << g.label(e.att[k]);
    os << ')';
  }
  std::vector<std::string> isolated;
  for (const auto& n : g.nodes())
    if (g.incident(n.id).empty()) isolated.push_back(g.label(n.id));
  if (!isolated.empty()) {
    os << (first ? "" : " ") << '{';
    for (std::size_t i = 0; i < isolated.size(); ++i)
      os << (i ? "," : "") << isolated[i];
    os << '}';
  }
  return os.str();
}

}  // namespace adr
