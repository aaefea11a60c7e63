#include "adr/tracking.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "adr/errors.hpp"

namespace adr {

// ------------------------------------------------------------------ forest

std::optional<VertexId> TrackingForest::parent_of(VertexId v) const {
  auto it = parent.find(v);
  if (it == parent.end()) return std::nullopt;
  return it->second;
}

VertexId TrackingForest::root_of(VertexId v) const {
  while (auto p = parent_of(v)) v = *p;
  return v;
}

std::vector<VertexId> TrackingForest::subtree(VertexId v) const {
  std::vector<VertexId> out;
  std::function<void(VertexId)> rec = [&](VertexId x) {
    out.push_back(x);
    for (VertexId c : children.at(x)) rec(c);
  };
  rec(v);
  return out;
}

std::vector<VertexId> TrackingForest::preorder() const {
  std::vector<VertexId> out;
  for (VertexId r : roots) {
    auto sub = subtree(r);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<VertexId> TrackingForest::leaves(VertexId v) const {
  std::vector<VertexId> out;
  for (VertexId x : subtree(v))
    if (children.at(x).empty()) out.push_back(x);
  return out;
}

void TrackingForest::add_vertex(VertexId v, std::optional<VertexId> p) {
  children.emplace(v, std::vector<VertexId>{});
  if (p) {
    parent[v] = *p;
    children.at(*p).push_back(v);
  } else {
    roots.push_back(v);
  }
}

void TrackingForest::erase_subtree(VertexId v) {
  if (auto p = parent_of(v)) {
    auto& sib = children.at(*p);
    sib.erase(std::remove(sib.begin(), sib.end(), v), sib.end());
  } else {
    roots.erase(std::remove(roots.begin(), roots.end(), v), roots.end());
  }
  for (VertexId x : subtree(v)) {
    children.erase(x);
    parent.erase(x);
  }
}

std::optional<VertexId> TrackingEnv::vertex_of(EdgeId e) const {
  for (const auto& [v, rec] : env1)
    if (rec.edge == e) return v;
  return std::nullopt;
}

std::string to_string(Event::Kind k) {
  switch (k) {
    case Event::Kind::Production: return "production";
    case Event::Kind::Reconfiguration: return "reconfiguration";
    case Event::Kind::Parse: return "parse";
  }
  return "?";
}

Event::Kind event_kind_from_string(const std::string& s) {
  if (s == "production") return Event::Kind::Production;
  if (s == "reconfiguration") return Event::Kind::Reconfiguration;
  if (s == "parse") return Event::Kind::Parse;
  throw std::invalid_argument("unknown event kind '" + s + "'");
}

std::vector<VertexId> TrackedSystem::edge_leaves() const {
  std::vector<VertexId> out;
  for (VertexId v : forest.preorder())
    if (forest.is_leaf(v) && env.env1.count(v)) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------- tracking

namespace {

EdgeRecord record_of(const Edge& e) {
  return EdgeRecord{e.id, e.type, e.att, e.name, false};
}

}  // namespace

TrackedSystem init_tracking(const Graph& g0, std::uint64_t seed) {
  TrackedSystem s;
  s.initial = g0;
  s.graph = g0;
  s.seed = seed ? seed : g0.max_id() + 1;
  s.ids = IdAllocator(s.seed);
  s.ids.observe(g0.max_id());
  for (const auto& e : g0.edges()) {
    VertexId v = s.ids.vertex();
    s.forest.add_vertex(v, std::nullopt);
    s.env.env1[v] = record_of(e);
  }
  return s;
}

void record_production_in_place(TrackedSystem& s, const Production& p,
                                const Match& m) {
  match_at(s.graph, p, m.edge);
  std::optional<VertexId> n;
  for (const auto& [v, rec] : s.env.env1)
    if (rec.edge == m.edge && s.forest.contains(v) && s.forest.is_leaf(v)) n = v;
  if (!n)
    throw IntegrityError("no leaf of the tracking forest records edge " +
                         s.graph.label(m.edge));

  Application app = apply_production(s.graph, p, m, s.ids);
  s.env.env2[*n] = p.name;
  if (app.created.empty()) {
    s.forest.add_vertex(s.ids.vertex(), *n);
  } else {
    for (EdgeId e : app.created) {
      VertexId c = s.ids.vertex();
      s.forest.add_vertex(c, *n);
      s.env.env1[c] = record_of(app.graph.edge(e));
    }
  }
  s.graph = std::move(app.graph);
  s.log.push_back({Event::Kind::Production, p.name, m.edge, {}, {}});
}

TrackedSystem record_production(const TrackedSystem& s, const Production& p,
                                const Match& m) {
  TrackedSystem out = s;
  record_production_in_place(out, p, m);
  return out;
}

std::vector<std::string> check_tracking(const TrackedSystem& s) {
  std::vector<std::string> out;
  if (s.forest.roots.size() != s.initial.edges().size())
    out.push_back("forest has " + std::to_string(s.forest.roots.size()) +
                  " trees, the initial graph has " +
                  std::to_string(s.initial.edges().size()) + " edges");

  std::set<EdgeId> seen;
  for (const auto& [v, rec] : s.env.env1) {
    if (!s.forest.contains(v))
      out.push_back("env1 mentions vertex " + std::to_string(v.value) +
                    " outside the forest");
    if (!seen.insert(rec.edge).second)
      out.push_back("env1 is not injective on edge " +
                    std::to_string(rec.edge.value));
  }
  for (const auto& [v, p] : s.env.env2) {
    if (!s.forest.contains(v))
      out.push_back("env2 mentions vertex " + std::to_string(v.value) +
                    " outside the forest");
    else if (s.forest.is_leaf(v))
      out.push_back("leaf " + std::to_string(v.value) + " carries production " +
                    p);
  }

  std::set<EdgeId> leaf_edges;
  for (VertexId v : s.forest.preorder()) {
    if (!s.forest.is_leaf(v)) {
      if (!s.env.env2.count(v))
        out.push_back("internal vertex " + std::to_string(v.value) +
                      " has no production");
      continue;
    }
    auto it = s.env.env1.find(v);
    if (it == s.env.env1.end()) continue;  // tombstone
    const EdgeRecord& rec = it->second;
    leaf_edges.insert(rec.edge);
    const Edge* e = s.graph.find_edge(rec.edge);
    if (!e) {
      out.push_back("leaf " + std::to_string(v.value) + " records edge " +
                    std::to_string(rec.edge.value) + " which is not in the graph");
    } else if (e->att != rec.nodes || e->type != rec.type) {
      out.push_back("leaf " + std::to_string(v.value) + " disagrees with edge " +
                    s.graph.label(e->id));
    }
  }
  for (const auto& e : s.graph.edges())
    if (!leaf_edges.count(e.id))
      out.push_back("edge " + s.graph.label(e.id) + " has no leaf");
  return out;
}

Graph current_graph(const TrackedSystem& s) {
  auto problems = check_tracking(s);
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw IntegrityError(msg);
  }
  std::set<EdgeId> current;
  for (VertexId v : s.edge_leaves()) current.insert(s.env.env1.at(v).edge);
  Graph out;
  for (const auto& n : s.graph.nodes()) out.add_node(n);
  for (const auto& e : s.graph.edges()) {
    if (!current.count(e.id)) continue;
    const EdgeRecord& rec = s.env.env1.at(*s.env.vertex_of(e.id));
    out.add_edge(Edge{rec.edge, rec.type, rec.nodes, e.theta, e.name});
  }
  if (!(out == s.graph))
    throw IntegrityError("leaf records do not reproduce the graph");
  return out;
}

// ----------------------------------------------------------------- exports

namespace {

std::string node_label(const TrackedSystem& s, NodeId n) {
  if (const Node* x = s.graph.find_node(n); x && !x->name.empty())
    return x->name;
  if (const Node* x = s.initial.find_node(n); x && !x->name.empty())
    return x->name;
  return "n" + std::to_string(n.value);
}

std::string record_text(const TrackedSystem& s, const EdgeRecord& rec) {
  std::string out =
      rec.name.empty() ? "e" + std::to_string(rec.edge.value) : rec.name;
  out += "(";
  for (std::size_t k = 0; k < rec.nodes.size(); ++k)
    out += (k ? "," : "") + node_label(s, rec.nodes[k]);
  out += ")";
  if (rec.synthetic) out += "*";
  return out;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string vertex_label(const TrackedSystem& s, VertexId v) {
  auto rec = s.env.env1.find(v);
  auto prod = s.env.env2.find(v);
  std::string edge = rec == s.env.env1.end() ? "^" : record_text(s, rec->second);
  std::string p = prod == s.env.env2.end() ? "^" : prod->second;
  return "[" + edge + ", " + p + "]";
}

std::string forest_to_text(const TrackedSystem& s) {
  std::ostringstream os;
  std::function<void(VertexId, int)> rec = [&](VertexId v, int depth) {
    os << std::string(2 * depth, ' ') << vertex_label(s, v) << '\n';
    for (VertexId c : s.forest.kids(v)) rec(c, depth + 1);
  };
  for (VertexId r : s.forest.roots) rec(r, 0);
  return os.str();
}

std::string forest_to_dot(const TrackedSystem& s) {
  std::ostringstream os;
  os << "digraph forest {\n  node [shape=plaintext];\n";
  for (VertexId v : s.forest.preorder()) {
    os << "  v" << v.value << " [label=\"" << dot_escape(vertex_label(s, v))
       << "\"];\n";
    for (VertexId c : s.forest.kids(v))
      os << "  v" << v.value << " -> v" << c.value << ";\n";
  }
  os << "}\n";
  return os.str();
}

std::string graph_to_dot(const Graph& g) {
  std::ostringstream os;
  os << "graph G {\n";
  for (const auto& n : g.nodes())
    os << "  n" << n.id.value << " [shape=circle, label=\""
       << dot_escape(g.label(n.id)) << "\", xlabel=\"" << dot_escape(n.type)
       << "\"];\n";
  for (const auto& e : g.edges()) {
    os << "  e" << e.id.value << " [shape=box"
       << (e.replaceable() ? ", peripheries=2" : "") << ", label=\""
       << dot_escape(g.label(e.id) + ":" + e.type) << "\"];\n";
    for (std::size_t k = 0; k < e.att.size(); ++k) {
      os << "  e" << e.id.value << " -- n" << e.att[k].value;
      if (k == 0) os << " [dir=forward, arrowhead=normal]";
      os << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace adr
