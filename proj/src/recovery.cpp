#include "adr/recovery.hpp"

#include <algorithm>
#include <set>

#include "adr/errors.hpp"
#include "adr/wp.hpp"

namespace adr {

// ------------------------------------------------------------------ parsing

bool is_two_tier(const TrackedSystem& s, VertexId v) {
  if (!s.forest.contains(v) || s.forest.is_leaf(v) || !s.env.env2.count(v))
    return false;
  for (VertexId c : s.forest.kids(v))
    if (!s.forest.is_leaf(c)) return false;
  return true;
}

std::vector<VertexId> two_tier_vertices(const TrackedSystem& s,
                                        std::optional<VertexId> within) {
  std::vector<VertexId> out;
  auto all = within ? s.forest.subtree(*within) : s.forest.preorder();
  for (VertexId v : all)
    if (is_two_tier(s, v)) out.push_back(v);
  return out;
}

ParseResult parse_step(const Graph& g, VertexId v, const TrackedSystem& s,
                       const ProductionSet& productions, IdAllocator& ids,
                       bool strict) {
  auto refuse = [&](const std::string& why) -> ParseRefused {
    return ParseRefused("cannot parse at vertex " + std::to_string(v.value) +
                        ": " + why);
  };
  if (!s.forest.contains(v)) throw refuse("no such vertex");
  if (!is_two_tier(s, v))
    throw refuse("not a 2-tier subtree (a production vertex with leaf children)");
  auto pit = productions.find(s.env.env2.at(v));
  if (pit == productions.end())
    throw refuse("unknown production " + s.env.env2.at(v));
  const Production& p = pit->second;
  auto parent_rec = s.env.env1.find(v);

  // Children standing for edges, in order.
  std::vector<EdgeId> folded;
  for (VertexId c : s.forest.kids(v)) {
    auto rec = s.env.env1.find(c);
    if (rec == s.env.env1.end()) continue;  // tombstone
    const Edge* e = g.find_edge(rec->second.edge);
    if (!e) throw refuse("edge " + std::to_string(rec->second.edge.value) +
                         " of a child is not in the graph");
    if (!e->replaceable())
      throw refuse("the edge " + g.label(e->id) +
                   " is not replaceable; only replaceable edges can be folded");
    folded.push_back(e->id);
  }
  if (strict)
    for (const auto& e : g.edges())
      if (!e.replaceable())
        throw refuse("strict mode: the graph has the non-replaceable edge " +
                     g.label(e.id));
  if (folded.size() != p.rhs_order.size())
    throw refuse("production " + p.name + " has " +
                 std::to_string(p.rhs_order.size()) + " edge(s), the subtree " +
                 std::to_string(folded.size()));

  std::map<NodeId, NodeId> sigma;
  for (std::size_t j = 0; j < folded.size(); ++j) {
    const Edge& r = p.rhs.edge(p.rhs_order[j]);
    const Edge& e = g.edge(folded[j]);
    if (r.type != e.type || r.att.size() != e.att.size())
      throw refuse("edge " + g.label(e.id) + " does not match " + p.name +
                   "'s right-hand side");
    for (std::size_t k = 0; k < r.att.size(); ++k) {
      auto [it, fresh] = sigma.emplace(r.att[k], e.att[k]);
      if (!fresh && it->second != e.att[k])
        throw refuse("the folded edges do not share nodes as " + p.name +
                     "'s right-hand side does");
    }
  }

  std::set<EdgeId> folded_set(folded.begin(), folded.end());
  std::set<NodeId> interface_images;
  for (const auto& [l, r] : p.interface)
    if (auto it = sigma.find(r); it != sigma.end()) interface_images.insert(it->second);
  std::set<NodeId> internal_images;
  for (NodeId r : p.internal_nodes()) {
    auto it = sigma.find(r);
    if (it == sigma.end()) continue;
    if (interface_images.count(it->second) || !internal_images.insert(it->second).second)
      throw refuse("an internal node of " + p.name +
                   " coincides with another node of the match");
    for (EdgeId e : g.incident(it->second))
      if (!folded_set.count(e))
        throw refuse("internal node " + g.label(it->second) +
                     " is attached to the unfolded edge " + g.label(e));
  }

  const auto& lattr = p.lhs_edge().att;
  std::vector<NodeId> att;
  for (std::size_t k = 0; k < lattr.size(); ++k) {
    auto it = sigma.find(p.interface.at(lattr[k]));
    if (it != sigma.end()) {
      att.push_back(it->second);
    } else if (parent_rec != s.env.env1.end() &&
               k < parent_rec->second.nodes.size() &&
               g.has_node(parent_rec->second.nodes[k])) {
      att.push_back(parent_rec->second.nodes[k]);
    } else {
      throw refuse("cannot locate tentacle " + std::to_string(k + 1) +
                   " of the folded edge");
    }
  }

  ParseResult out{g, ids.edge(), att};
  std::size_t pos = folded.empty() ? g.edges().size() : g.edge_position(folded[0]);
  for (EdgeId e : folded) out.graph.remove_edge(e);
  for (NodeId n : internal_images) out.graph.remove_node(n);
  out.graph.insert_edge(std::min(pos, out.graph.edges().size()),
                        Edge{out.edge, p.lhs_type(), att, true, ""});
  return out;
}

void parse_tracked_in_place(TrackedSystem& s, VertexId v,
                            const ProductionSet& productions, bool strict) {
  ParseResult r = parse_step(s.graph, v, s, productions, s.ids, strict);
  for (VertexId c : std::vector<VertexId>(s.forest.kids(v))) {
    s.env.env1.erase(c);
    s.env.env2.erase(c);
    s.forest.erase_subtree(c);
  }
  std::string name;
  if (auto it = s.env.env1.find(v); it != s.env.env1.end()) name = it->second.name;
  s.env.env1[v] = EdgeRecord{r.edge, r.graph.edge(r.edge).type, r.att, name, false};
  s.env.env2.erase(v);
  s.graph = std::move(r.graph);
  s.log.push_back({Event::Kind::Parse, "", {}, v, v});
}

TrackedSystem parse_tracked(const TrackedSystem& s, VertexId v,
                            const ProductionSet& productions, bool strict) {
  TrackedSystem out = s;
  parse_tracked_in_place(out, v, productions, strict);
  return out;
}

void apply_event(TrackedSystem& s, const Event& ev,
                 const ProductionSet& productions,
                 const std::map<std::string, ReconfigRule>& rules) {
  switch (ev.kind) {
    case Event::Kind::Production: {
      auto it = productions.find(ev.name);
      if (it == productions.end())
        throw WorkspaceError("event log names unknown production " + ev.name);
      record_production_in_place(s, it->second,
                                 match_at(s.graph, it->second, ev.edge));
      break;
    }
    case Event::Kind::Reconfiguration: {
      auto it = rules.find(ev.name);
      if (it == rules.end())
        throw WorkspaceError("event log names unknown rule " + ev.name);
      apply_reconfiguration_in_place(s, it->second, ev.vertex, productions);
      break;
    }
    case Event::Kind::Parse:
      parse_tracked_in_place(s, ev.vertex, productions);
      break;
  }
}

TrackedSystem replay_system(const Graph& initial, std::uint64_t seed,
                            const std::vector<Event>& log,
                            const ProductionSet& productions,
                            const std::map<std::string, ReconfigRule>& rules) {
  TrackedSystem s = init_tracking(initial, seed);
  for (const auto& ev : log) apply_event(s, ev, productions, rules);
  return s;
}

// ----------------------------------------------------------------- sessions

std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::Idle: return "Idle";
    case SessionState::Violated: return "Violated";
    case SessionState::AwaitingProductionChoice: return "AwaitingProductionChoice";
    case SessionState::AwaitingIterateOrParse: return "AwaitingIterateOrParse";
    case SessionState::AwaitingSubtreeChoice: return "AwaitingSubtreeChoice";
    case SessionState::Recovered: return "Recovered";
    case SessionState::Abandoned: return "Abandoned";
  }
  return "?";
}

std::string to_string(Decision::Kind k) {
  switch (k) {
    case Decision::Kind::Propose: return "Propose";
    case Decision::Kind::AcceptProduction: return "AcceptProduction";
    case Decision::Kind::Iterate: return "Iterate";
    case Decision::Kind::RequestParse: return "RequestParse";
    case Decision::Kind::Parse: return "Parse";
    case Decision::Kind::Abandon: return "Abandon";
  }
  return "?";
}

Decision::Kind decision_kind_from_string(const std::string& s) {
  for (auto k : {Decision::Kind::Propose, Decision::Kind::AcceptProduction,
                 Decision::Kind::Iterate, Decision::Kind::RequestParse,
                 Decision::Kind::Parse, Decision::Kind::Abandon})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown decision kind '" + s + "'");
}

std::string to_string(const Decision& d) {
  std::string out = to_string(d.kind);
  if (!d.production.empty())
    out += "(" + d.production + " at e" + std::to_string(d.edge.value) + ")";
  if (d.kind == Decision::Kind::Parse)
    out += "(v" + std::to_string(d.vertex.value) + ")";
  return out;
}

namespace {

bool terminal(SessionState s) {
  return s == SessionState::Recovered || s == SessionState::Abandoned;
}

[[noreturn]] void stale(const RecoverySession& r, const Decision& d) {
  throw StaleDecision(to_string(d.kind) + " is not accepted in state " +
                      to_string(r.state));
}

void reset_working(RecoverySession& r) {
  r.working_graph = r.system.graph;
  r.working_condition = r.invariant;
  r.working_assignment.clear();
  r.iterated_matches.clear();
  r.iterated_productions.clear();
  r.candidates.clear();
}

// Re-checks the invariant on the real graph.
void check_invariant(RecoverySession& r) {
  r.violation = find_violation(r.system.graph, r.invariant);
  r.state = r.violation ? SessionState::Violated : SessionState::Recovered;
  reset_working(r);
}

const Production& production_named(const ProductionSet& ps,
                                   const std::string& name) {
  auto it = ps.find(name);
  if (it == ps.end()) throw StaleMatch("unknown production " + name);
  return it->second;
}

const WpResult& cached_wp(RecoverySession& r, const Production& p) {
  auto key = std::make_pair(p.name, to_string(r.working_condition));
  auto it = r.wp_cache.find(key);
  if (it == r.wp_cache.end())
    it = r.wp_cache.emplace(key, weakest_precondition(p, r.working_condition)).first;
  return it->second;
}

// Assignment for wp's free variables: generated ones through the match,
// carried ones from the working assignment.
Assignment wp_assignment(const RecoverySession& r, const WpResult& w,
                         const Match& m) {
  Assignment h;
  for (const auto& v : free_vars(w.pre)) {
    if (auto it = w.h.find(v); it != w.h.end())
      h[v] = m.nodes.at(it->second);
    else if (auto jt = r.working_assignment.find(v); jt != r.working_assignment.end())
      h[v] = jt->second;
  }
  return h;
}

bool in_marked(const RecoverySession& r, VertexId v) {
  if (!r.marked || !r.system.forest.contains(*r.marked)) return true;
  auto sub = r.system.forest.subtree(*r.marked);
  return std::find(sub.begin(), sub.end(), v) != sub.end();
}

}  // namespace

RecoverySession start_recovery(const TrackedSystem& s, const Formula& invariant) {
  RecoverySession r;
  r.system = s;
  r.invariant = invariant;
  for (auto it = s.log.rbegin(); it != s.log.rend(); ++it)
    if (it->kind == Event::Kind::Reconfiguration) {
      if (s.forest.contains(it->result)) r.marked = it->result;
      break;
    }
  check_invariant(r);
  return r;
}

void propose(RecoverySession& r, const ProductionSet& productions) {
  if (r.state != SessionState::Violated &&
      r.state != SessionState::AwaitingIterateOrParse &&
      r.state != SessionState::AwaitingProductionChoice)
    stale(r, Decision{Decision::Kind::Propose, "", {}, {}});
  r.candidates.clear();
  for (const auto& [name, p] : productions) {
    const WpResult& w = cached_wp(r, p);
    for (const Match& m : find_matches(r.working_graph, p)) {
      Graph residual = r.working_graph;
      residual.remove_edge(m.edge);
      Assignment h = wp_assignment(r, w, m);
      if (satisfies(residual, w.pre, h))
        r.candidates.push_back(Candidate{name, m, w.pre, h});
    }
  }
  r.state = r.candidates.empty() ? SessionState::AwaitingIterateOrParse
                                 : SessionState::AwaitingProductionChoice;
  r.log.push_back(Decision{Decision::Kind::Propose, "", {}, {}});
}

void decide(RecoverySession& r, const Decision& d,
            const ProductionSet& productions) {
  using K = Decision::Kind;
  if (terminal(r.state)) stale(r, d);
  switch (d.kind) {
    case K::Propose:
      propose(r, productions);
      return;

    case K::Abandon:
      r.state = SessionState::Abandoned;
      r.candidates.clear();
      break;

    case K::AcceptProduction: {
      if (r.state != SessionState::AwaitingProductionChoice) stale(r, d);
      auto c = std::find_if(r.candidates.begin(), r.candidates.end(),
                            [&](const Candidate& c) {
                              return c.production == d.production &&
                                     c.match.edge == d.edge;
                            });
      if (c == r.candidates.end())
        throw StaleDecision("production " + d.production + " at edge " +
                            std::to_string(d.edge.value) +
                            " is not a current candidate");
      TrackedSystem next = r.system;
      record_production_in_place(next, production_named(productions, d.production),
                                 match_at(next.graph,
                                          production_named(productions, d.production),
                                          d.edge));
      for (std::size_t k = r.iterated_matches.size(); k-- > 0;) {
        const Production& p = production_named(productions, r.iterated_productions[k]);
        record_production_in_place(next, p,
                                   match_at(next.graph, p, r.iterated_matches[k].edge));
      }
      r.system = std::move(next);
      check_invariant(r);
      break;
    }

    case K::Iterate: {
      if (r.state != SessionState::AwaitingProductionChoice &&
          r.state != SessionState::AwaitingIterateOrParse)
        stale(r, d);
      const Production& p = production_named(productions, d.production);
      Match m = match_at(r.working_graph, p, d.edge);
      const WpResult& w = cached_wp(r, p);
      Assignment h = wp_assignment(r, w, m);
      Formula next = w.pre;
      r.working_graph.remove_edge(m.edge);
      r.working_condition = next;
      r.working_assignment = std::move(h);
      r.iterated_matches.push_back(m);
      r.iterated_productions.push_back(p.name);
      r.log.push_back(d);
      r.state = SessionState::AwaitingIterateOrParse;
      propose(r, productions);
      return;
    }

    case K::RequestParse:
      if (r.state != SessionState::AwaitingProductionChoice &&
          r.state != SessionState::AwaitingIterateOrParse)
        stale(r, d);
      r.state = SessionState::AwaitingSubtreeChoice;
      break;

    case K::Parse: {
      if (r.state != SessionState::AwaitingProductionChoice &&
          r.state != SessionState::AwaitingIterateOrParse &&
          r.state != SessionState::AwaitingSubtreeChoice)
        stale(r, d);
      if (!in_marked(r, d.vertex))
        throw ParseRefused("vertex " + std::to_string(d.vertex.value) +
                           " lies outside the marked subtree");
      TrackedSystem next =
          parse_tracked(r.system, d.vertex, productions, r.strict_parse);
      r.system = std::move(next);
      r.log.push_back(d);
      check_invariant(r);
      if (r.state == SessionState::Violated) propose(r, productions);
      return;
    }
  }
  r.log.push_back(d);
}

namespace {

// A short look-ahead: does iterating at (p, m) yield candidates within
// `depth` further iterations?
bool iteration_helps(const RecoverySession& r, const ProductionSet& productions,
                     const Decision& d, int depth) {
  RecoverySession copy = r;
  try {
    decide(copy, d, productions);
  } catch (const Error&) {
    return false;
  }
  if (!copy.candidates.empty()) return true;
  if (depth <= 0) return false;
  for (const auto& [name, p] : productions)
    for (const Match& m : find_matches(copy.working_graph, p))
      if (iteration_helps(copy, productions,
                          Decision{Decision::Kind::Iterate, name, m.edge, {}},
                          depth - 1))
        return true;
  return false;
}

}  // namespace

void auto_recover(RecoverySession& r, const ProductionSet& productions,
                  std::size_t max_steps) {
  using K = Decision::Kind;
  for (std::size_t step = 0; step < max_steps && !terminal(r.state); ++step) {
    if (r.state == SessionState::Violated) {
      propose(r, productions);
      continue;
    }
    if (!r.candidates.empty()) {
      const Candidate& c = r.candidates.front();
      decide(r, Decision{K::AcceptProduction, c.production, c.match.edge, {}},
             productions);
      continue;
    }
    bool moved = false;
    for (const auto& [name, p] : productions) {
      for (const Match& m : find_matches(r.working_graph, p)) {
        Decision d{K::Iterate, name, m.edge, {}};
        if (iteration_helps(r, productions, d, 1)) {
          decide(r, d, productions);
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (moved) continue;
    for (VertexId v : two_tier_vertices(r.system, r.marked)) {
      try {
        decide(r, Decision{K::Parse, "", {}, v}, productions);
        moved = true;
        break;
      } catch (const ParseRefused&) {
      }
    }
    if (!moved) break;
  }
  if (!terminal(r.state)) decide(r, Decision{K::Abandon, "", {}, {}}, productions);
}

RecoverySession replay_session(const TrackedSystem& s, const Formula& invariant,
                               const std::vector<Decision>& log,
                               const ProductionSet& productions) {
  RecoverySession r = start_recovery(s, invariant);
  // Some decisions log their own follow-up proposal; skip those entries.
  for (std::size_t i = 0; i < log.size();) {
    std::size_t before = r.log.size();
    decide(r, log[i], productions);
    std::size_t added = r.log.size() - before;
    if (added == 0 || !std::equal(r.log.begin() + before, r.log.end(),
                                  log.begin() + i,
                                  log.begin() + std::min(log.size(), i + added)))
      throw StaleDecision("decision log does not replay at entry " +
                          std::to_string(i));
    i += added;
  }
  return r;
}

}  // namespace adr
