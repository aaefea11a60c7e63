#include "adr/production.hpp"

#include <algorithm>
#include <set>

#include "adr/errors.hpp"

namespace adr {

std::vector<std::string> Production::argument_types() const {
  std::vector<std::string> out;
  for (const Edge* e : ordered_rhs_edges()) out.push_back(e->type);
  return out;
}

std::vector<const Edge*> Production::ordered_rhs_edges() const {
  std::vector<const Edge*> out;
  for (EdgeId id : rhs_order) out.push_back(&rhs.edge(id));
  return out;
}

bool Production::is_interface_node(NodeId r) const {
  for (const auto& [l, target] : interface)
    if (target == r) return true;
  return false;
}

std::vector<NodeId> Production::internal_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : rhs.nodes())
    if (!is_interface_node(n.id)) out.push_back(n.id);
  return out;
}

std::vector<std::string> check_production(const Production& p,
                                          const TypeGraph* gamma) {
  std::vector<std::string> out;
  auto add = [&](std::string msg) {
    out.push_back("production " + p.name + ": " + std::move(msg));
  };
  if (p.lhs.edges().size() != 1) {
    add("the left-hand side must consist of exactly one edge, found " +
        std::to_string(p.lhs.edges().size()));
    return out;
  }
  const Edge& le = p.lhs_edge();
  if (!le.replaceable()) add("the left-hand side edge must be replaceable");
  std::set<NodeId> att(le.att.begin(), le.att.end());
  if (att.size() != le.att.size())
    add("the left-hand side edge must attach to pairwise distinct nodes");
  std::set<NodeId> lnodes;
  for (const auto& n : p.lhs.nodes()) lnodes.insert(n.id);
  if (lnodes != att)
    add("the left-hand side nodes must be exactly the tentacles of its edge");
  for (NodeId n : att)
    if (!p.lhs.has_node(n)) add("left-hand side tentacle dangles");

  std::set<NodeId> image;
  for (const auto& n : p.lhs.nodes()) {
    auto it = p.interface.find(n.id);
    if (it == p.interface.end()) {
      add("interface map is undefined on " + p.lhs.label(n.id));
      continue;
    }
    const Node* r = p.rhs.find_node(it->second);
    if (!r) {
      add("interface map sends " + p.lhs.label(n.id) +
          " outside the right-hand side");
      continue;
    }
    if (r->type != n.type)
      add("interface map changes the type of " + p.lhs.label(n.id));
    if (!image.insert(it->second).second) add("interface map is not injective");
  }
  for (const auto& [l, r] : p.interface)
    if (!p.lhs.has_node(l)) add("interface map mentions a node outside L");

  std::vector<EdgeId> order = p.rhs_order, edges;
  for (const auto& e : p.rhs.edges()) edges.push_back(e.id);
  std::sort(order.begin(), order.end());
  std::sort(edges.begin(), edges.end());
  if (order != edges) add("rhs_order is not a permutation of the RHS edges");

  if (gamma) {
    for (const auto& v : validate_graph(p.lhs, *gamma).violations)
      add("L: " + v.subject + ": " + v.message);
    for (const auto& v : validate_graph(p.rhs, *gamma).violations)
      add("R: " + v.subject + ": " + v.message);
  } else {
    for (const auto& e : p.rhs.edges()) {
      if (!e.theta) add("R: edge " + p.rhs.label(e.id) + " has no theta");
      for (NodeId n : e.att)
        if (!p.rhs.has_node(n))
          add("R: edge " + p.rhs.label(e.id) + " has a dangling tentacle");
    }
  }
  return out;
}

Production make_production(std::string name, Graph lhs, Graph rhs,
                           std::map<NodeId, NodeId> interface,
                           std::vector<EdgeId> rhs_order,
                           const TypeGraph* gamma) {
  if (rhs_order.empty())
    for (const auto& e : rhs.edges()) rhs_order.push_back(e.id);
  Production p{std::move(name), std::move(lhs), std::move(rhs),
               std::move(interface), std::move(rhs_order)};
  auto problems = check_production(p, gamma);
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    throw IllFormedProduction(msg);
  }
  return p;
}

namespace {

std::optional<Match> try_match(const Edge& e, const Production& p) {
  const Edge& le = p.lhs_edge();
  if (e.type != le.type || !e.replaceable() || e.att.size() != le.att.size())
    return std::nullopt;
  Match m{e.id, {}};
  for (std::size_t k = 0; k < le.att.size(); ++k) m.nodes[le.att[k]] = e.att[k];
  return m;
}

}  // namespace

std::vector<Match> find_matches(const Graph& g, const Production& p) {
  std::vector<Match> out;
  for (const auto& e : g.edges())
    if (auto m = try_match(e, p)) out.push_back(std::move(*m));
  return out;
}

Match match_at(const Graph& g, const Production& p, EdgeId e) {
  const Edge* edge = g.find_edge(e);
  if (!edge) throw StaleMatch("edge " + std::to_string(e.value) + " is absent");
  auto m = try_match(*edge, p);
  if (!m)
    throw StaleMatch("edge " + g.label(e) + " is not a replaceable " +
                     p.lhs_type() + " edge");
  return *m;
}

Application apply_production(const Graph& g, const Production& p,
                             const Match& m, IdAllocator& ids) {
  if (m != match_at(g, p, m.edge))
    throw StaleMatch("match does not agree with the attachment of " +
                     g.label(m.edge));

  Application app{g, {}, {}};
  Graph& out = app.graph;
  std::size_t pos = out.edge_position(m.edge);
  out.remove_edge(m.edge);

  for (const auto& [l, r] : p.interface) app.copy.nodes[r] = m.nodes.at(l);
  for (const auto& n : p.rhs.nodes()) {
    if (app.copy.nodes.count(n.id)) continue;
    NodeId fresh = ids.node();
    out.add_node({fresh, n.type, ""});
    app.copy.nodes[n.id] = fresh;
  }
  for (const Edge* e : p.ordered_rhs_edges()) {
    Edge copy{ids.edge(), e->type, {}, e->theta, ""};
    for (NodeId n : e->att) copy.att.push_back(app.copy.nodes.at(n));
    app.copy.edges[e->id] = copy.id;
    app.created.push_back(copy.id);
    out.insert_edge(pos++, std::move(copy));
  }
  return app;
}

Application apply_production(const Graph& g, const Production& p,
                             const Match& m) {
  IdAllocator ids(std::max({g.max_id(), p.lhs.max_id(), p.rhs.max_id()}) + 1);
  return apply_production(g, p, m, ids);
}

std::vector<std::string> check_asserted(const AssertedProduction& a) {
  std::vector<std::string> out;
  for (const auto& v : free_vars(a.pre)) {
    auto it = a.pre_h.find(v);
    if (it == a.pre_h.end())
      out.push_back("precondition variable " + v + " is unassigned");
    else if (!a.production.lhs.has_node(it->second))
      out.push_back("precondition variable " + v + " is not mapped into L");
  }
  for (const auto& v : free_vars(a.post)) {
    auto it = a.post_h.find(v);
    if (it == a.post_h.end())
      out.push_back("postcondition variable " + v + " is unassigned");
    else if (!a.production.rhs.has_node(it->second))
      out.push_back("postcondition variable " + v + " is not mapped into R");
  }
  return out;
}

Assignment induced_pre_assignment(const AssertedProduction& a,
                                  const Match& m) {
  Assignment h;
  for (const auto& [v, l] : a.pre_h) h[v] = m.nodes.at(l);
  return h;
}

Assignment induced_post_assignment(const AssertedProduction& a,
                                   const Application& app) {
  Assignment h;
  for (const auto& [v, r] : a.post_h) h[v] = app.copy.nodes.at(r);
  return h;
}

AssertedOutcome apply_asserted(const Graph& g, const AssertedProduction& a,
                               const Match& m, IdAllocator& ids) {
  match_at(g, a.production, m.edge);
  AssertedOutcome out;
  if (auto w = find_violation(g, a.pre, induced_pre_assignment(a, m))) {
    out.violation = std::move(w);
    return out;
  }
  out.applied = apply_production(g, a.production, m, ids);
  return out;
}

AssertedOutcome apply_asserted(const Graph& g, const AssertedProduction& a,
                               const Match& m) {
  const Production& p = a.production;
  IdAllocator ids(std::max({g.max_id(), p.lhs.max_id(), p.rhs.max_id()}) + 1);
  return apply_asserted(g, a, m, ids);
}

}  // namespace adr
