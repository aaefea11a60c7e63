#include "adr/io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adr/errors.hpp"

namespace adr {

using json = nlohmann::json;

namespace {

// ------------------------------------------------------------ line lookup

std::string pointer_escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

/// Input iterator that publishes how far the parser has read.
struct CountingIter {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char** cursor = nullptr;

  reference operator*() const { return *p; }
  CountingIter& operator++() {
    ++p;
    if (cursor) *cursor = p;
    return *this;
  }
  CountingIter operator++(int) {
    CountingIter old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIter& o) const { return p == o.p; }
};

/// Parses `text` and records the line on which every value starts, keyed
/// by JSON pointer.
class LineIndex {
 public:
  json parse(const std::string& text) {
    begin_ = text.data();
    const char* cursor = begin_;
    for (std::size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') newlines_.push_back(i);

    struct Frame {
      bool array;
      std::size_t index;
      std::string key;
    };
    std::vector<Frame> stack;
    auto path = [&] {
      std::string out;
      for (const auto& f : stack)
        out += "/" + (f.array ? std::to_string(f.index) : pointer_escape(f.key));
      return out;
    };
    auto here = [&] {
      std::size_t off = static_cast<std::size_t>(cursor - begin_);
      return line_of(off == 0 ? 0 : off - 1);
    };
    auto advance = [&] {
      if (!stack.empty() && stack.back().array) ++stack.back().index;
    };
    json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
      switch (ev) {
        case json::parse_event_t::key:
          stack.back().key = parsed.get<std::string>();
          lines_.emplace(path(), here());
          break;
        case json::parse_event_t::object_start:
        case json::parse_event_t::array_start:
          lines_.emplace(path(), here());
          stack.push_back({ev == json::parse_event_t::array_start, 0, ""});
          break;
        case json::parse_event_t::object_end:
        case json::parse_event_t::array_end:
          stack.pop_back();
          advance();
          break;
        case json::parse_event_t::value:
          lines_.emplace(path(), here());
          advance();
          break;
      }
      return true;
    };
    CountingIter first{begin_, &cursor};
    CountingIter last{begin_ + text.size(), nullptr};
    try {
      return json::parse(first, last, cb);
    } catch (const json::parse_error& e) {
      std::size_t off = e.byte == 0 ? 0 : e.byte - 1;
      throw WorkspaceLoadError(
          {Diagnostic{line_of(off), "", "malformed JSON: " + std::string(e.what())}});
    }
  }

  /// Line of the closest recorded ancestor of `pointer`.
  std::size_t line(std::string pointer) const {
    while (true) {
      auto it = lines_.find(pointer);
      if (it != lines_.end()) return it->second;
      if (pointer.empty()) return 0;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  std::size_t line_of(std::size_t offset) const {
    return static_cast<std::size_t>(
               std::lower_bound(newlines_.begin(), newlines_.end(), offset) -
               newlines_.begin()) +
           1;
  }

  const char* begin_ = nullptr;
  std::vector<std::size_t> newlines_;
  std::map<std::string, std::size_t> lines_;
};

// ---------------------------------------------------------------- reading

class Reader {
 public:
  explicit Reader(const LineIndex* index) : index_(index) {}

  void error(const std::string& path, const std::string& message) {
    diags_.push_back({index_ ? index_->line(path) : 0, path, message});
  }
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }
  std::size_t count() const { return diags_.size(); }

  const json* field(const json& obj, const std::string& key,
                    const std::string& path, bool required = true) {
    if (!obj.is_object()) {
      error(path, "expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) error(path, "missing field '" + key + "'");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::string> string(const json& obj, const std::string& key,
                                    const std::string& path, bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      error(path + "/" + key, "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<std::uint64_t> id(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
      error(path, "expected a positive integer id");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::uint64_t> id(const json& obj, const std::string& key,
                                  const std::string& path, bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    return id(*v, path + "/" + key);
  }

  const json* array(const json& obj, const std::string& key,
                    const std::string& path, bool required = true) {
    const json* v = field(obj, key, path, required);
    if (v && !v->is_array()) {
      error(path + "/" + key, "expected an array");
      return nullptr;
    }
    return v;
  }

 private:
  const LineIndex* index_;
  std::vector<Diagnostic> diags_;
};

std::string at(const std::string& path, std::size_t i) {
  return path + "/" + std::to_string(i);
}

/// Resolves a node reference given either as an id or as a node name.
std::optional<NodeId> node_ref(Reader& r, const json& v, const Graph& g,
                               const std::string& path) {
  if (v.is_string()) {
    for (const auto& n : g.nodes())
      if (n.name == v.get<std::string>()) return n.id;
    r.error(path, "no node named '" + v.get<std::string>() + "'");
    return std::nullopt;
  }
  auto id = r.id(v, path);
  if (!id) return std::nullopt;
  return NodeId(*id);
}

std::optional<EdgeId> edge_ref(Reader& r, const json& v, const Graph& g,
                               const std::string& path) {
  if (v.is_string()) {
    for (const auto& e : g.edges())
      if (e.name == v.get<std::string>()) return e.id;
    r.error(path, "no edge named '" + v.get<std::string>() + "'");
    return std::nullopt;
  }
  auto id = r.id(v, path);
  if (!id) return std::nullopt;
  return EdgeId(*id);
}

std::optional<Graph> read_graph(Reader& r, const json& j, const std::string& path,
                                const TypeGraph* gamma) {
  std::size_t before = r.count();
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  if (const json* ns = r.array(j, "nodes", path)) {
    for (std::size_t i = 0; i < ns->size(); ++i) {
      const json& n = (*ns)[i];
      std::string p = at(path + "/nodes", i);
      auto id = r.id(n, "id", p);
      auto tau = r.string(n, "tau", p);
      auto name = r.string(n, "name", p, false);
      if (id && tau) nodes.push_back({NodeId(*id), *tau, name.value_or("")});
    }
  }
  Graph named = Graph::from_parts(nodes, {});
  if (const json* es = r.array(j, "edges", path)) {
    for (std::size_t i = 0; i < es->size(); ++i) {
      const json& e = (*es)[i];
      std::string p = at(path + "/edges", i);
      auto id = r.id(e, "id", p);
      auto tau = r.string(e, "tau", p);
      auto name = r.string(e, "name", p, false);
      std::vector<NodeId> att;
      if (const json* a = r.array(e, "att", p)) {
        for (std::size_t k = 0; k < a->size(); ++k)
          if (auto n = node_ref(r, (*a)[k], named, at(p + "/att", k))) att.push_back(*n);
      }
      std::optional<bool> theta;
      if (const json* t = r.field(e, "theta", p, false)) {
        if (t->is_boolean()) theta = t->get<bool>();
        else if (t->is_number_unsigned() && t->get<std::uint64_t>() <= 1)
          theta = t->get<std::uint64_t>() == 1;
        else r.error(p + "/theta", "expected 0 or 1");
      }
      if (id && tau) edges.push_back({EdgeId(*id), *tau, att, theta, name.value_or("")});
    }
  }
  if (r.count() != before) return std::nullopt;
  Graph g = Graph::from_parts(std::move(nodes), std::move(edges));
  if (gamma) {
    auto report = validate_graph(g, *gamma);
    for (const auto& v : report.violations) r.error(path, v.subject + ": " + v.message);
    if (!report.ok()) return std::nullopt;
  }
  return g;
}

std::optional<TypeGraph> read_type_graph(Reader& r, const json& j,
                                         const std::string& path) {
  std::size_t before = r.count();
  TypeGraph gamma;
  if (const json* ns = r.array(j, "node_types", path)) {
    for (std::size_t i = 0; i < ns->size(); ++i) {
      if (!(*ns)[i].is_string()) r.error(at(path + "/node_types", i), "expected a string");
      else gamma.add_node_type((*ns)[i].get<std::string>());
    }
  }
  if (const json* es = r.array(j, "edge_types", path)) {
    for (std::size_t i = 0; i < es->size(); ++i) {
      std::string p = at(path + "/edge_types", i);
      auto name = r.string((*es)[i], "name", p);
      std::vector<std::string> sig;
      if (const json* a = r.array((*es)[i], "att", p)) {
        for (std::size_t k = 0; k < a->size(); ++k) {
          if (!(*a)[k].is_string()) r.error(at(p + "/att", k), "expected a node type");
          else sig.push_back((*a)[k].get<std::string>());
        }
      }
      if (name) gamma.add_edge_type(*name, sig);
    }
  }
  for (const auto& problem : gamma.check()) r.error(path, problem);
  if (r.count() != before) return std::nullopt;
  return gamma;
}

std::optional<Production> read_production(Reader& r, const json& j,
                                          const std::string& path,
                                          const TypeGraph& gamma) {
  std::size_t before = r.count();
  auto name = r.string(j, "name", path);
  std::optional<Graph> lhs, rhs;
  if (const json* l = r.field(j, "lhs", path)) lhs = read_graph(r, *l, path + "/lhs", &gamma);
  if (const json* g = r.field(j, "rhs", path)) rhs = read_graph(r, *g, path + "/rhs", &gamma);
  if (r.count() != before || !name || !lhs || !rhs) return std::nullopt;

  std::map<NodeId, NodeId> iface;
  if (const json* is = r.array(j, "interface", path)) {
    for (std::size_t i = 0; i < is->size(); ++i) {
      std::string p = at(path + "/interface", i);
      const json& pair = (*is)[i];
      if (!pair.is_array() || pair.size() != 2) {
        r.error(p, "expected [lhs node, rhs node]");
        continue;
      }
      auto a = node_ref(r, pair[0], *lhs, p + "/0");
      auto b = node_ref(r, pair[1], *rhs, p + "/1");
      if (a && b) iface[*a] = *b;
    }
  }
  std::vector<EdgeId> order;
  if (const json* os = r.array(j, "rhs_order", path, false)) {
    for (std::size_t i = 0; i < os->size(); ++i)
      if (auto e = edge_ref(r, (*os)[i], *rhs, at(path + "/rhs_order", i))) order.push_back(*e);
  }
  if (r.count() != before) return std::nullopt;
  try {
    return make_production(*name, std::move(*lhs), std::move(*rhs), std::move(iface),
                           std::move(order), &gamma);
  } catch (const IllFormedProduction& e) {
    r.error(path, e.what());
    return std::nullopt;
  }
}

std::optional<Event> read_event(Reader& r, const json& j, const std::string& path) {
  auto kind = r.string(j, "kind", path);
  if (!kind) return std::nullopt;
  Event ev;
  try {
    ev.kind = event_kind_from_string(*kind);
  } catch (const std::invalid_argument& e) {
    r.error(path + "/kind", e.what());
    return std::nullopt;
  }
  std::size_t before = r.count();
  switch (ev.kind) {
    case Event::Kind::Production:
      ev.name = r.string(j, "name", path).value_or("");
      ev.edge = EdgeId(r.id(j, "edge", path).value_or(0));
      break;
    case Event::Kind::Reconfiguration:
      ev.name = r.string(j, "name", path).value_or("");
      ev.vertex = VertexId(r.id(j, "vertex", path).value_or(0));
      break;
    case Event::Kind::Parse:
      ev.vertex = VertexId(r.id(j, "vertex", path).value_or(0));
      break;
  }
  if (r.count() != before) return std::nullopt;
  return ev;
}

std::optional<Decision> read_decision(Reader& r, const json& j,
                                      const std::string& path) {
  auto kind = r.string(j, "kind", path);
  if (!kind) return std::nullopt;
  Decision d;
  try {
    d.kind = decision_kind_from_string(*kind);
  } catch (const std::exception& e) {
    r.error(path + "/kind", e.what());
    return std::nullopt;
  }
  std::size_t before = r.count();
  using K = Decision::Kind;
  if (d.kind == K::AcceptProduction || d.kind == K::Iterate) {
    d.production = r.string(j, "production", path).value_or("");
    d.edge = EdgeId(r.id(j, "edge", path).value_or(0));
  }
  if (d.kind == K::Parse) d.vertex = VertexId(r.id(j, "vertex", path).value_or(0));
  if (r.count() != before) return std::nullopt;
  return d;
}

// ---------------------------------------------------------------- writing

json ids_json(const std::vector<NodeId>& ns) {
  json a = json::array();
  for (auto n : ns) a.push_back(n.value);
  return a;
}

json graph_to_json(const Graph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes())
    nodes.push_back({{"id", n.id.value}, {"tau", n.type}, {"name", n.name}});
  json edges = json::array();
  for (const auto& e : g.edges()) {
    json o = {{"id", e.id.value}, {"tau", e.type}, {"name", e.name}, {"att", ids_json(e.att)}};
    if (e.theta) o["theta"] = *e.theta ? 1 : 0;
    edges.push_back(std::move(o));
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

json type_graph_to_json(const TypeGraph& gamma) {
  json ets = json::array();
  for (const auto& [name, sig] : gamma.edge_types())
    ets.push_back({{"name", name}, {"att", sig}});
  return {{"node_types", gamma.node_types()}, {"edge_types", ets}};
}

json production_to_json(const Production& p) {
  json iface = json::array();
  for (const auto& [l, r] : p.interface) iface.push_back({l.value, r.value});
  json order = json::array();
  for (auto e : p.rhs_order) order.push_back(e.value);
  return {{"name", p.name}, {"lhs", graph_to_json(p.lhs)}, {"rhs", graph_to_json(p.rhs)},
          {"interface", iface}, {"rhs_order", order}};
}

/// Rule text with every variable sort spelled out, so it reparses alone.
std::string rule_text(const ReconfigRule& rule) {
  std::map<std::string, std::string> sorts;
  std::function<void(const Term&)> collect = [&](const Term& t) {
    if (t.is_var) {
      if (!t.sort.empty()) sorts[t.name] = t.sort;
      return;
    }
    for (const auto& a : t.args) collect(a);
  };
  collect(rule.lhs);
  collect(rule.rhs);
  std::string out = to_string(rule);
  std::string sep = " where ";
  for (const auto& [v, s] : sorts) {
    out += sep + v + ":" + s;
    sep = ", ";
  }
  return out;
}

json event_to_json(const Event& ev) {
  json o = {{"kind", to_string(ev.kind)}};
  switch (ev.kind) {
    case Event::Kind::Production:
      o["name"] = ev.name;
      o["edge"] = ev.edge.value;
      break;
    case Event::Kind::Reconfiguration:
      o["name"] = ev.name;
      o["vertex"] = ev.vertex.value;
      break;
    case Event::Kind::Parse:
      o["vertex"] = ev.vertex.value;
      break;
  }
  return o;
}

json decision_to_json(const Decision& d) {
  using K = Decision::Kind;
  json o = {{"kind", to_string(d.kind)}};
  if (d.kind == K::AcceptProduction || d.kind == K::Iterate) {
    o["production"] = d.production;
    o["edge"] = d.edge.value;
  }
  if (d.kind == K::Parse) o["vertex"] = d.vertex.value;
  return o;
}

json assignment_json(const Assignment& h) {
  json o = json::object();
  for (const auto& [x, n] : h) o[x] = n.value;
  return o;
}

json forest_to_json(const TrackedSystem& s) {
  json roots = json::array();
  for (auto v : s.forest.roots) roots.push_back(v.value);
  json vertices = json::array();
  for (auto v : s.forest.preorder()) {
    json kids = json::array();
    for (auto c : s.forest.kids(v)) kids.push_back(c.value);
    vertices.push_back({{"id", v.value}, {"children", kids}, {"label", vertex_label(s, v)}});
  }
  return {{"roots", roots}, {"vertices", vertices}};
}

json env1_json(const TrackedSystem& s) {
  json out = json::array();
  for (const auto& [v, rec] : s.env.env1) {
    out.push_back({{"vertex", v.value}, {"edge", rec.edge.value}, {"tau", rec.type},
                   {"att", ids_json(rec.nodes)}, {"name", rec.name},
                   {"synthetic", rec.synthetic}});
  }
  return out;
}

json env2_json(const TrackedSystem& s) {
  json out = json::array();
  for (const auto& [v, p] : s.env.env2)
    out.push_back({{"vertex", v.value}, {"production", p}});
  return out;
}

json snapshot_json(const TrackedSystem& s) {
  return {{"graph", graph_to_json(s.graph)}, {"forest", forest_to_json(s)},
          {"env1", env1_json(s)}, {"env2", env2_json(s)}, {"next_id", s.ids.peek()}};
}

json session_to_json(const RecoverySession& r) {
  json candidates = json::array();
  for (const auto& c : r.candidates) {
    json m = json::object();
    for (const auto& [l, g] : c.match.nodes) m[std::to_string(l.value)] = g.value;
    candidates.push_back({{"production", c.production}, {"edge", c.match.edge.value},
                          {"match", m}, {"condition", to_string(c.condition)},
                          {"assignment", assignment_json(c.assignment)}});
  }
  json log = json::array();
  for (const auto& d : r.log) log.push_back(decision_to_json(d));
  json iterated = json::array();
  for (std::size_t i = 0; i < r.iterated_matches.size(); ++i)
    iterated.push_back({{"production", r.iterated_productions[i]},
                        {"edge", r.iterated_matches[i].edge.value}});
  json violation = nullptr;
  if (r.violation)
    violation = {{"assignment", assignment_json(r.violation->assignment)},
                 {"reason", r.violation->reason}};
  json marked = nullptr;
  if (r.marked) marked = r.marked->value;
  json two_tier = json::array();
  for (auto v : two_tier_vertices(r.system, r.marked)) two_tier.push_back(v.value);
  return {{"state", to_string(r.state)},
          {"invariant", to_string(r.invariant)},
          {"working_condition", to_string(r.working_condition)},
          {"working_assignment", assignment_json(r.working_assignment)},
          {"working_graph", graph_to_json(r.working_graph)},
          {"iterated", iterated},
          {"marked", marked},
          {"two_tier", two_tier},
          {"candidates", candidates},
          {"decisions", log},
          {"violation", violation}};
}

json workspace_to_json(const Workspace& ws) {
  json prods = json::array();
  for (const auto& [name, p] : ws.productions) prods.push_back(production_to_json(p));
  json rules = json::array();
  for (const auto& [name, rule] : ws.rules)
    rules.push_back({{"name", name}, {"text", rule_text(rule)}});
  json systems = json::array();
  for (const auto& e : ws.systems) {
    json events = json::array();
    for (const auto& ev : e.system.log) events.push_back(event_to_json(ev));
    json o = {{"name", e.name}, {"initial", graph_to_json(e.system.initial)},
              {"seed", e.system.seed}, {"events", events},
              {"snapshot", snapshot_json(e.system)}};
    if (e.recovery) {
      json decisions = json::array();
      for (const auto& d : e.recovery->session.log) decisions.push_back(decision_to_json(d));
      o["recovery"] = {{"invariant", to_string(e.recovery->session.invariant)},
                       {"base_events", e.recovery->base_events},
                       {"decisions", decisions},
                       {"state", to_string(e.recovery->session.state)}};
    }
    systems.push_back(std::move(o));
  }
  json out = {{"format", kWorkspaceFormat},
              {"type_graph", type_graph_to_json(ws.gamma)},
              {"productions", prods},
              {"rules", rules},
              {"systems", systems}};
  out["invariant"] = ws.invariant ? json(to_string(*ws.invariant)) : json(nullptr);
  return out;
}

// -------------------------------------------------------- snapshot checks

void check_snapshot(Reader& r, const json& snap, const std::string& path,
                    const TrackedSystem& s) {
  if (const json* g = r.field(snap, "graph", path, false)) {
    auto stored = read_graph(r, *g, path + "/graph", nullptr);
    if (stored && !(*stored == s.graph))
      r.error(path + "/graph", "stored graph differs from the replayed graph");
  }
  if (const json* f = r.field(snap, "forest", path, false)) {
    TrackingForest forest;
    bool ok = true;
    if (const json* vs = r.array(*f, "vertices", path + "/forest")) {
      std::map<std::uint64_t, std::vector<std::uint64_t>> kids;
      std::vector<std::uint64_t> order;
      for (std::size_t i = 0; i < vs->size(); ++i) {
        std::string p = at(path + "/forest/vertices", i);
        auto id = r.id((*vs)[i], "id", p);
        const json* cs = r.array((*vs)[i], "children", p);
        if (!id || !cs) {
          ok = false;
          continue;
        }
        order.push_back(*id);
        for (std::size_t k = 0; k < cs->size(); ++k) {
          auto c = r.id((*cs)[k], at(p + "/children", k));
          if (c) kids[*id].push_back(*c);
          else ok = false;
        }
      }
      if (const json* rs = r.array(*f, "roots", path + "/forest")) {
        std::function<void(std::uint64_t, std::optional<VertexId>)> add =
            [&](std::uint64_t v, std::optional<VertexId> parent) {
              forest.add_vertex(VertexId(v), parent);
              for (auto c : kids[v]) add(c, VertexId(v));
            };
        for (std::size_t i = 0; i < rs->size(); ++i) {
          auto v = r.id((*rs)[i], at(path + "/forest/roots", i));
          if (v) add(*v, std::nullopt);
          else ok = false;
        }
      }
    }
    if (ok && !(forest == s.forest))
      r.error(path + "/forest", "stored forest differs from the replayed forest");
  }
  if (const json* e1 = r.field(snap, "env1", path, false)) {
    if (*e1 != env1_json(s)) r.error(path + "/env1", "stored env1 differs from the replay");
  }
  if (const json* e2 = r.field(snap, "env2", path, false)) {
    if (*e2 != env2_json(s)) r.error(path + "/env2", "stored env2 differs from the replay");
  }
  if (const json* n = r.field(snap, "next_id", path, false)) {
    if (!n->is_number_unsigned() || n->get<std::uint64_t>() != s.ids.peek())
      r.error(path + "/next_id", "stored next_id differs from the replay (" +
                                     std::to_string(s.ids.peek()) + ")");
  }
}

std::optional<Formula> read_formula(Reader& r, const json& j, const std::string& path,
                                    const TypeGraph& gamma) {
  if (!j.is_string()) {
    r.error(path, "expected a formula string");
    return std::nullopt;
  }
  try {
    Formula f = parse_formula(j.get<std::string>(), &gamma);
    auto problems = check_formula(f, gamma);
    for (const auto& p : problems) r.error(path, p);
    if (!problems.empty()) return std::nullopt;
    return f;
  } catch (const Error& e) {
    r.error(path, e.what());
    return std::nullopt;
  }
}

void read_system(Reader& r, const json& j, const std::string& path, Workspace& ws) {
  std::size_t before = r.count();
  auto name = r.string(j, "name", path);
  std::optional<Graph> initial;
  if (const json* g = r.field(j, "initial", path))
    initial = read_graph(r, *g, path + "/initial", &ws.gamma);
  std::uint64_t seed = 0;
  if (const json* s = r.field(j, "seed", path, false)) {
    if (s->is_number_unsigned()) seed = s->get<std::uint64_t>();
    else r.error(path + "/seed", "expected a non-negative integer");
  }
  std::vector<Event> events;
  if (const json* es = r.array(j, "events", path, false)) {
    for (std::size_t i = 0; i < es->size(); ++i)
      if (auto ev = read_event(r, (*es)[i], at(path + "/events", i))) events.push_back(*ev);
  }
  if (name && ws.find_system(*name)) r.error(path + "/name", "duplicate system " + *name);
  if (r.count() != before) return;

  const json* rec = r.field(j, "recovery", path, false);
  std::size_t base = 0;
  if (rec) {
    if (const json* b = r.field(*rec, "base_events", path + "/recovery", false)) {
      if (b->is_number_unsigned() && b->get<std::size_t>() <= events.size())
        base = b->get<std::size_t>();
      else r.error(path + "/recovery/base_events", "expected an event count");
    }
  }

  SystemEntry entry;
  entry.name = *name;
  entry.system = init_tracking(*initial, seed);
  std::optional<TrackedSystem> at_base;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i == base) at_base = entry.system;
    try {
      apply_event(entry.system, events[i], ws.productions, ws.rules);
    } catch (const Error& e) {
      r.error(at(path + "/events", i), std::string("replay failed: ") + e.what());
      return;
    }
  }
  if (!at_base) at_base = entry.system;
  if (const json* snap = r.field(j, "snapshot", path, false))
    check_snapshot(r, *snap, path + "/snapshot", entry.system);

  if (rec) {
    std::string rp = path + "/recovery";
    std::optional<Formula> inv;
    if (const json* f = r.field(*rec, "invariant", rp)) inv = read_formula(r, *f, rp + "/invariant", ws.gamma);
    std::vector<Decision> decisions;
    if (const json* ds = r.array(*rec, "decisions", rp, false)) {
      for (std::size_t i = 0; i < ds->size(); ++i)
        if (auto d = read_decision(r, (*ds)[i], at(rp + "/decisions", i))) decisions.push_back(*d);
    }
    if (r.count() != before) return;
    try {
      RecoveryRecord record{base, replay_session(*at_base, *inv, decisions, ws.productions)};
      const auto& slog = record.session.system.log;
      if (slog.size() > entry.system.log.size() ||
          !std::equal(slog.begin(), slog.end(), entry.system.log.begin()))
        r.error(rp, "recovery decisions do not reproduce the event log");
      entry.recovery = std::move(record);
    } catch (const Error& e) {
      r.error(rp + "/decisions", std::string("replay failed: ") + e.what());
    }
  }
  if (r.count() == before) ws.systems.push_back(std::move(entry));
}

Workspace read_workspace(Reader& r, const json& doc) {
  Workspace ws;
  if (!doc.is_object()) {
    r.error("", "expected a workspace object");
    throw WorkspaceLoadError(r.diagnostics());
  }
  if (auto fmt = r.string(doc, "format", "")) {
    if (*fmt != kWorkspaceFormat)
      r.error("/format", "unsupported format '" + *fmt + "'");
  }
  std::optional<TypeGraph> gamma;
  if (const json* t = r.field(doc, "type_graph", "")) gamma = read_type_graph(r, *t, "/type_graph");
  if (!gamma) throw WorkspaceLoadError(r.diagnostics());
  ws.gamma = *gamma;

  if (const json* ps = r.array(doc, "productions", "", false)) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      auto p = read_production(r, (*ps)[i], at("/productions", i), ws.gamma);
      if (!p) continue;
      if (ws.productions.count(p->name))
        r.error(at("/productions", i) + "/name", "duplicate production " + p->name);
      else ws.productions.emplace(p->name, std::move(*p));
    }
  }
  Signature sig = make_signature(ws.productions, &ws.gamma);
  if (const json* rs = r.array(doc, "rules", "", false)) {
    for (std::size_t i = 0; i < rs->size(); ++i) {
      std::string p = at("/rules", i);
      auto name = r.string((*rs)[i], "name", p);
      auto text = r.string((*rs)[i], "text", p);
      if (!name || !text) continue;
      try {
        ReconfigRule rule = parse_rule(*text, sig, *name);
        if (rule.name != *name)
          r.error(p + "/text", "rule text names '" + rule.name + "', expected '" + *name + "'");
        else if (ws.rules.count(*name)) r.error(p + "/name", "duplicate rule " + *name);
        else ws.rules.emplace(*name, std::move(rule));
      } catch (const Error& e) {
        r.error(p + "/text", e.what());
      }
    }
  }
  if (const json* inv = r.field(doc, "invariant", "", false); inv && !inv->is_null())
    ws.invariant = read_formula(r, *inv, "/invariant", ws.gamma);

  // Systems replay against the productions and rules, so only read them
  // once those are clean.
  if (!r.diagnostics().empty()) throw WorkspaceLoadError(r.diagnostics());
  if (const json* ss = r.array(doc, "systems", "", false)) {
    for (std::size_t i = 0; i < ss->size(); ++i)
      read_system(r, (*ss)[i], at("/systems", i), ws);
  }
  if (!r.diagnostics().empty()) throw WorkspaceLoadError(r.diagnostics());
  return ws;
}

std::string dump(const json& j) { return j.dump(2, ' ', false) + "\n"; }

}  // namespace

// ---------------------------------------------------------------- public

SystemEntry* Workspace::find_system(const std::string& name) {
  for (auto& s : systems)
    if (s.name == name) return &s;
  return nullptr;
}

const SystemEntry* Workspace::find_system(const std::string& name) const {
  for (const auto& s : systems)
    if (s.name == name) return &s;
  return nullptr;
}

std::string Diagnostic::to_string() const {
  std::string out = "line " + std::to_string(line);
  if (!path.empty()) out += ", " + path;
  return out + ": " + message;
}

namespace {
std::string join_diagnostics(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) out += (out.empty() ? "" : "\n") + d.to_string();
  return out;
}
}  // namespace

WorkspaceLoadError::WorkspaceLoadError(std::vector<Diagnostic> ds)
    : WorkspaceError(join_diagnostics(ds)), diagnostics(std::move(ds)) {}

Workspace parse_workspace(const std::string& text) {
  LineIndex index;
  json doc = index.parse(text);
  Reader r(&index);
  return read_workspace(r, doc);
}

Workspace load_workspace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WorkspaceError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_workspace(buf.str());
}

std::string dump_workspace(const Workspace& ws) { return dump(workspace_to_json(ws)); }

void save_workspace(const Workspace& ws, const std::filesystem::path& path) {
  std::string text = dump_workspace(ws);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw WorkspaceError("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string normalize_workspace(const std::string& text) {
  return dump_workspace(parse_workspace(text));
}

std::string graph_json(const Graph& g) { return graph_to_json(g).dump(); }

std::string forest_json(const TrackedSystem& s) {
  json o = forest_to_json(s);
  o["env1"] = env1_json(s);
  o["env2"] = env2_json(s);
  return o.dump();
}

std::string session_json(const RecoverySession& r) { return session_to_json(r).dump(); }

// ------------------------------------------------------------------ service

namespace {

struct HttpError {
  int status;
  std::string kind;
  std::string message;
};

std::vector<std::string> split_path(const std::string& path) {
  std::string p = path.substr(0, path.find('?'));
  std::vector<std::string> parts;
  std::string cur;
  for (char c : p) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw HttpError{400, "BadRequest", "request body must be a JSON object"};
  return j;
}

std::uint64_t body_id(const json& body, const std::string& key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_number_unsigned())
    throw HttpError{400, "BadRequest", "field '" + key + "' must be a positive integer"};
  return it->get<std::uint64_t>();
}

std::string body_string(const json& body, const std::string& key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string())
    throw HttpError{400, "BadRequest", "field '" + key + "' must be a string"};
  return it->get<std::string>();
}

bool session_active(const SystemEntry& e) {
  if (!e.recovery) return false;
  auto st = e.recovery->session.state;
  return st != SessionState::Recovered && st != SessionState::Abandoned;
}

}  // namespace

Service::Service(Workspace ws, std::filesystem::path save_path)
    : ws_(std::move(ws)), save_path_(std::move(save_path)) {}

std::uint64_t Service::revision() const {
  std::lock_guard lock(mutex_);
  return revision_;
}

Workspace Service::snapshot() const {
  std::lock_guard lock(mutex_);
  return ws_;
}

Response Service::handle(const std::string& method, const std::string& path,
                         const std::string& body) {
  std::lock_guard lock(mutex_);
  auto error = [&](int status, const std::string& kind, const std::string& msg) {
    json o = {{"revision", revision_}, {"error", {{"kind", kind}, {"message", msg}}}};
    return Response{status, o.dump(), "application/json"};
  };
  try {
    return dispatch(method, split_path(path), body);
  } catch (const HttpError& e) {
    return error(e.status, e.kind, e.message);
  } catch (const StaleDecision& e) {
    return error(409, "StaleDecision", e.what());
  } catch (const StaleMatch& e) {
    return error(409, "StaleMatch", e.what());
  } catch (const ParseRefused& e) {
    return error(422, "ParseRefused", e.what());
  } catch (const IllFormedRule& e) {
    return error(422, "IllFormedRule", e.what());
  } catch (const IllFormedProduction& e) {
    return error(422, "IllFormedProduction", e.what());
  } catch (const SyntaxError& e) {
    return error(400, "SyntaxError", e.what());
  } catch (const UnknownEdgeType& e) {
    return error(400, "UnknownEdgeType", e.what());
  } catch (const std::invalid_argument& e) {
    return error(422, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    return error(500, "InternalError", e.what());
  }
}

Response Service::dispatch(const std::string& method,
                           const std::vector<std::string>& parts,
                           const std::string& raw_body) {
  auto ok = [&](json o) {
    o["revision"] = revision_;
    return Response{200, o.dump(), "application/json"};
  };
  auto require = [&](const char* m) {
    if (method != m) throw HttpError{405, "MethodNotAllowed", method + " not allowed here"};
  };

  if (parts.size() == 1 && parts[0] == "workspace") {
    require("GET");
    return ok({{"workspace", workspace_to_json(ws_)}});
  }
  if (parts.size() < 3 || parts[0] != "systems")
    throw HttpError{404, "NotFound", "no such endpoint"};

  SystemEntry* entry = ws_.find_system(parts[1]);
  if (!entry) throw HttpError{404, "NotFound", "no system named " + parts[1]};
  TrackedSystem& sys = entry->system;
  const std::string& what = parts[2];

  json body = method == "POST" ? parse_body(raw_body) : json::object();
  // Writes based on an older state of this system are refused.
  auto check_revision = [&] {
    auto it = body.find("revision");
    if (it == body.end()) return;
    if (!it->is_number_unsigned())
      throw HttpError{400, "BadRequest", "field 'revision' must be an integer"};
    if (it->get<std::uint64_t>() < entry->revision)
      throw HttpError{409, "StaleRevision",
                      "system changed at revision " + std::to_string(entry->revision)};
  };
  auto committed = [&] {
    entry->revision = ++revision_;
    if (!save_path_.empty()) save_workspace(ws_, save_path_);
  };
  auto no_active_session = [&] {
    if (session_active(*entry))
      throw HttpError{409, "SessionActive", "a recovery session is in progress on this system"};
  };

  if (parts.size() == 3) {
    if (what == "graph") {
      require("GET");
      return ok({{"system", entry->name}, {"graph", graph_to_json(sys.graph)}});
    }
    if (what == "forest") {
      require("GET");
      return ok({{"system", entry->name}, {"forest", forest_to_json(sys)},
                 {"env1", env1_json(sys)}, {"env2", env2_json(sys)},
                 {"text", forest_to_text(sys)}});
    }
    if (what == "graph.dot" || what == "forest.dot") {
      require("GET");
      return Response{200, what == "graph.dot" ? graph_to_dot(sys.graph) : forest_to_dot(sys),
                      "text/vnd.graphviz"};
    }
    if (what == "recovery") {
      require("GET");
      if (!entry->recovery) throw HttpError{404, "NotFound", "no recovery session"};
      return ok({{"system", entry->name}, {"base_events", entry->recovery->base_events},
                 {"session", session_to_json(entry->recovery->session)}});
    }
    throw HttpError{404, "NotFound", "no such endpoint"};
  }

  if (parts.size() == 4 && what == "recovery") {
    const std::string& action = parts[3];
    if (action == "candidates") {
      require("GET");
      if (!entry->recovery) throw HttpError{404, "NotFound", "no recovery session"};
      const auto& r = entry->recovery->session;
      return ok({{"state", to_string(r.state)},
                 {"candidates", session_to_json(r)["candidates"]}});
    }
    if (action == "start") {
      require("POST");
      check_revision();
      Formula inv = Formula::top();
      if (body.contains("invariant")) {
        inv = parse_formula(body_string(body, "invariant"), &ws_.gamma);
        auto problems = check_formula(inv, ws_.gamma);
        if (!problems.empty()) throw HttpError{400, "BadFormula", problems.front()};
      } else if (ws_.invariant) {
        inv = *ws_.invariant;
      } else {
        throw HttpError{400, "BadRequest", "no invariant given and none in the workspace"};
      }
      entry->recovery = RecoveryRecord{sys.log.size(), start_recovery(sys, inv)};
      committed();
      return ok({{"system", entry->name}, {"base_events", entry->recovery->base_events},
                 {"session", session_to_json(entry->recovery->session)}});
    }
    if (action == "decision") {
      require("POST");
      check_revision();
      if (!entry->recovery) throw HttpError{404, "NotFound", "no recovery session"};
      Decision d;
      try {
        d.kind = decision_kind_from_string(body_string(body, "kind"));
      } catch (const HttpError&) {
        throw;
      } catch (const std::exception& e) {
        throw HttpError{400, "BadRequest", e.what()};
      }
      using K = Decision::Kind;
      if (d.kind == K::AcceptProduction || d.kind == K::Iterate) {
        d.production = body_string(body, "production");
        if (!ws_.productions.count(d.production))
          throw HttpError{404, "NotFound", "no production named " + d.production};
        d.edge = EdgeId(body_id(body, "edge"));
      }
      if (d.kind == K::Parse) d.vertex = VertexId(body_id(body, "vertex"));
      RecoverySession& r = entry->recovery->session;
      decide(r, d, ws_.productions);
      // The session owns the system until it ends; keep the entry in step.
      if (!(r.system.log == sys.log)) sys = r.system;
      committed();
      return ok({{"system", entry->name}, {"base_events", entry->recovery->base_events},
                 {"session", session_to_json(r)}});
    }
    throw HttpError{404, "NotFound", "no such endpoint"};
  }

  if (parts.size() == 5 && what == "productions" && parts[4] == "apply") {
    require("POST");
    check_revision();
    no_active_session();
    auto it = ws_.productions.find(parts[3]);
    if (it == ws_.productions.end())
      throw HttpError{404, "NotFound", "no production named " + parts[3]};
    EdgeId e(body_id(body, "edge"));
    std::set<EdgeId> before;
    for (const auto& x : sys.graph.edges()) before.insert(x.id);
    record_production_in_place(sys, it->second, match_at(sys.graph, it->second, e));
    json created = json::array();
    for (const auto& x : sys.graph.edges())
      if (!before.count(x.id)) created.push_back(x.id.value);
    committed();
    return ok({{"system", entry->name}, {"graph", graph_to_json(sys.graph)},
               {"created", created}});
  }

  if (parts.size() == 5 && what == "rules") {
    auto it = ws_.rules.find(parts[3]);
    if (it == ws_.rules.end()) throw HttpError{404, "NotFound", "no rule named " + parts[3]};
    if (parts[4] == "matches") {
      require("POST");
      json ms = json::array();
      for (auto v : find_rule_matches(sys, it->second)) ms.push_back(v.value);
      return ok({{"system", entry->name}, {"rule", it->first}, {"matches", ms}});
    }
    if (parts[4] == "apply") {
      require("POST");
      check_revision();
      no_active_session();
      VertexId v(body_id(body, "vertex"));
      apply_reconfiguration_in_place(sys, it->second, v, ws_.productions);
      committed();
      return ok({{"system", entry->name}, {"graph", graph_to_json(sys.graph)},
                 {"result", sys.log.back().result.value}});
    }
  }
  throw HttpError{404, "NotFound", "no such endpoint"};
}

}  // namespace adr
