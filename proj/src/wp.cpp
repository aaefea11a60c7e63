#include "adr/wp.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

#include "adr/errors.hpp"

namespace adr {

// ----------------------------------------------------------- construction

namespace {

Formula mk_and(const Formula& a, const Formula& b) {
  if (a.as<Formula::Top>()) return b;
  if (b.as<Formula::Top>()) return a;
  if (a == bot() || b == bot()) return bot();
  return Formula::conj(a, b);
}

Formula mk_not(const Formula& a) {
  if (auto* n = a.as<Formula::Not>()) return n->body;
  return Formula::neg(a);
}

// A variable of the postcondition denotes either a node that already exists
// before the application or a node of R.
struct Term {
  bool in_rhs = false;
  std::string var;
  NodeId r;
};

using Env = std::map<std::string, Term>;

class WpBuilder {
 public:
  WpBuilder(const Production& p, const Formula& post, const Assignment& post_h,
            std::vector<std::string>& notes)
      : p_(p), notes_(notes) {
    VarSet taken = all_vars(post);
    for (const auto& [v, r] : post_h) taken.insert(v);
    int k = 1;
    for (NodeId l : p.lhs_edge().att) {
      std::string name;
      do name = "l" + std::to_string(k++);
      while (taken.count(name));
      lvars_.push_back(name);
      lvar_of_l_[l] = name;
      lvar_of_r_[p.interface.at(l)] = name;
    }
  }

  const std::map<NodeId, std::string>& lvars() const { return lvar_of_l_; }

  Formula go(const Formula& f, const Env& env, bool positive) {
    if (auto* e = f.as<Formula::Eq>()) return equal(lookup(env, e->lhs),
                                                    lookup(env, e->rhs));
    if (f.as<Formula::Top>()) return f;
    if (auto* n = f.as<Formula::Not>()) return mk_not(go(n->body, env, !positive));
    if (auto* c = f.as<Formula::And>())
      return mk_and(go(c->lhs, env, positive), go(c->rhs, env, positive));

    const auto& q = *f.as<Formula::Forall>();
    Env inner = env;
    for (const auto& x : q.vars) inner[x] = Term{false, x, {}};
    Formula body = go(q.body, inner, positive);
    if (!positive && q.edge_type == p_.lhs_type()) {
      // Under an odd number of negations the quantifier must not see the
      // edge that is about to be replaced.
      Formula guard = Formula::top();
      for (std::size_t k = 0; k < q.vars.size() && k < lvars_.size(); ++k)
        guard = mk_and(guard, Formula::eq(q.vars[k], lvars_[k]));
      body = disj(guard, body);
      notes_.push_back("forall " + q.edge_type +
                       ": existing edges other than the matched one");
    } else {
      notes_.push_back("forall " + q.edge_type + ": existing edges");
    }
    Formula out = Formula::forall(q.edge_type, q.vars, body);

    for (const Edge* e : p_.ordered_rhs_edges()) {
      if (e->type != q.edge_type) continue;
      if (e->att.size() != q.vars.size())
        throw std::invalid_argument("quantifier over " + q.edge_type +
                                    " binds " + std::to_string(q.vars.size()) +
                                    " variable(s) but the R edge has " +
                                    std::to_string(e->att.size()) +
                                    " tentacle(s)");
      Env inst = env;
      for (std::size_t k = 0; k < q.vars.size(); ++k)
        inst[q.vars[k]] = Term{true, {}, e->att[k]};
      notes_.push_back("forall " + q.edge_type + ": instantiated with R edge " +
                       p_.rhs.label(e->id));
      out = mk_and(out, go(q.body, inst, positive));
    }
    return out;
  }

 private:
  static Term lookup(const Env& env, const std::string& v) {
    auto it = env.find(v);
    return it == env.end() ? Term{false, v, {}} : it->second;
  }

  Formula equal(const Term& a, const Term& b) const {
    if (!a.in_rhs && !b.in_rhs) return Formula::eq(a.var, b.var);
    if (a.in_rhs && b.in_rhs) {
      if (a.r == b.r) return Formula::top();
      auto ia = lvar_of_r_.find(a.r), ib = lvar_of_r_.find(b.r);
      if (ia == lvar_of_r_.end() || ib == lvar_of_r_.end()) return bot();
      return Formula::eq(ia->second, ib->second);
    }
    const Term& old = a.in_rhs ? b : a;
    const Term& fresh = a.in_rhs ? a : b;
    auto it = lvar_of_r_.find(fresh.r);
    if (it == lvar_of_r_.end()) return bot();
    return a.in_rhs ? Formula::eq(it->second, old.var)
                    : Formula::eq(old.var, it->second);
  }

  const Production& p_;
  std::vector<std::string>& notes_;
  std::vector<std::string> lvars_;
  std::map<NodeId, std::string> lvar_of_l_;
  std::map<NodeId, std::string> lvar_of_r_;
};

}  // namespace

WpResult weakest_precondition(const Production& p, const Formula& post,
                              const Assignment& post_h,
                              const TypeGraph* gamma) {
  if (gamma)
    for (const auto& t : edge_types_of(post)) gamma->signature(t);
  for (const auto& [v, r] : post_h)
    if (!p.rhs.has_node(r))
      throw std::invalid_argument("postcondition variable " + v +
                                  " is not mapped into R");

  WpResult out;
  WpBuilder b(p, post, post_h, out.notes);
  Env env;
  for (const auto& [v, r] : post_h) env[v] = Term{true, {}, r};
  out.pre = b.go(post, env, true);
  VarSet fv = free_vars(out.pre);
  for (const auto& [l, name] : b.lvars())
    if (fv.count(name)) out.h[name] = l;
  return out;
}

AssertedProduction asserted_from_wp(const Production& p, const Formula& post,
                                    const Assignment& post_h,
                                    const TypeGraph* gamma) {
  WpResult w = weakest_precondition(p, post, post_h, gamma);
  return AssertedProduction{p, w.pre, w.h, post, post_h};
}

// ------------------------------------------------------------- enumeration

std::size_t oracle_edge_cap() {
  if (const char* env = std::getenv("ADR_ISO_BOUND")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0') return v;
  }
  return 4;
}

namespace {

void quantifier_arities(const Formula& f, std::map<std::string, std::size_t>& out) {
  if (auto* n = f.as<Formula::Not>()) {
    quantifier_arities(n->body, out);
  } else if (auto* c = f.as<Formula::And>()) {
    quantifier_arities(c->lhs, out);
    quantifier_arities(c->rhs, out);
  } else if (auto* q = f.as<Formula::Forall>()) {
    out.emplace(q->edge_type, q->vars.size());
    quantifier_arities(q->body, out);
  }
}

const char* kAnyNode = "*";

}  // namespace

SignatureMap signatures_for(const std::set<std::string>& types,
                            const std::vector<Formula>& formulas,
                            const TypeGraph* gamma) {
  SignatureMap out;
  std::map<std::string, std::size_t> arity;
  for (const auto& f : formulas) quantifier_arities(f, arity);
  for (const auto& t : types) {
    if (gamma) {
      out[t] = gamma->signature(t);
    } else {
      auto it = arity.find(t);
      if (it == arity.end())
        throw std::invalid_argument("arity of edge type " + t + " is unknown");
      out[t] = std::vector<std::string>(it->second, kAnyNode);
    }
  }
  return out;
}

namespace {

class GraphEnumerator {
 public:
  GraphEnumerator(const SignatureMap& sig, std::size_t max_edges,
                  const std::function<bool(const Graph&)>& visit)
      : max_edges_(max_edges), visit_(visit) {
    for (const auto& [t, s] : sig) {
      types_.push_back(t);
      std::vector<int> kinds;
      for (const auto& nt : s) {
        auto it = std::find(node_types_.begin(), node_types_.end(), nt);
        kinds.push_back(static_cast<int>(it - node_types_.begin()));
        if (it == node_types_.end()) node_types_.push_back(nt);
      }
      kinds_.push_back(std::move(kinds));
    }
    counts_.assign(node_types_.size(), 0);
  }

  std::size_t run() {
    step(0, {});
    return visited_;
  }

 private:
  struct Item {
    int type;
    std::vector<int> idx;
    auto operator<=>(const Item&) const = default;
  };

  // Returns false once the visitor asked to stop.
  bool step(int min_type, const std::vector<int>& min_idx) {
    if (!emit()) return false;
    if (edges_.size() == max_edges_) return true;
    for (int t = min_type; t < static_cast<int>(types_.size()); ++t) {
      std::vector<int> idx;
      bool bounded = t == min_type && !min_idx.empty();
      if (!tuples(t, 0, idx, bounded ? &min_idx : nullptr, true))
        return false;
    }
    return true;
  }

  // Fills tentacle position `k` of a new edge of type `t`. Node indices are
  // numbered per node type in order of first appearance; the edge list is
  // kept sorted, which together removes most isomorphic repetitions.
  bool tuples(int t, std::size_t k, std::vector<int>& idx,
              const std::vector<int>* lower, bool tight) {
    const auto& kinds = kinds_[t];
    if (k == kinds.size()) {
      edges_.push_back({t, idx});
      bool go = step(t, idx);
      edges_.pop_back();
      return go;
    }
    int kind = kinds[k];
    int limit = counts_[kind];  // == limit means a new node
    int from = (lower && tight) ? (*lower)[k] : 0;
    for (int v = from; v <= limit; ++v) {
      bool fresh = v == limit;
      if (fresh) ++counts_[kind];
      idx.push_back(v);
      bool go = tuples(t, k + 1, idx, lower, tight && lower && v == (*lower)[k]);
      idx.pop_back();
      if (fresh) --counts_[kind];
      if (!go) return false;
    }
    return true;
  }

  bool emit() {
    ++visited_;
    Graph g;
    std::map<std::pair<int, int>, NodeId> ids;
    std::uint64_t next = 1;
    for (const auto& e : edges_)
      for (std::size_t k = 0; k < e.idx.size(); ++k) {
        auto key = std::make_pair(kinds_[e.type][k], e.idx[k]);
        if (!ids.count(key)) {
          ids[key] = NodeId(next++);
          g.add_node({ids[key], node_types_[key.first], ""});
        }
      }
    for (const auto& e : edges_) {
      Edge edge{EdgeId(next++), types_[e.type], {}, true, ""};
      for (std::size_t k = 0; k < e.idx.size(); ++k)
        edge.att.push_back(ids.at({kinds_[e.type][k], e.idx[k]}));
      g.add_edge(std::move(edge));
    }
    return visit_(g);
  }

  std::size_t max_edges_;
  const std::function<bool(const Graph&)>& visit_;
  std::vector<std::string> types_;
  std::vector<std::vector<int>> kinds_;
  std::vector<std::string> node_types_;
  std::vector<int> counts_;
  std::vector<Item> edges_;
  std::size_t visited_ = 0;
};

// Every assignment of `vars` to nodes of `g` or to fresh isolated nodes
// (fresh values numbered in order of first use). The visitor receives the
// extended graph.
bool enumerate_assignments(
    const Graph& g, const std::vector<std::string>& vars,
    const std::string& fresh_type,
    const std::function<bool(const Graph&, const Assignment&)>& visit) {
  std::vector<NodeId> existing;
  for (const auto& n : g.nodes()) existing.push_back(n.id);
  std::vector<int> choice(vars.size());
  std::function<bool(std::size_t, int)> rec = [&](std::size_t k,
                                                  int fresh) -> bool {
    if (k == vars.size()) {
      Graph ext = g;
      std::uint64_t base = g.max_id();
      for (int f = 0; f < fresh; ++f)
        ext.add_node({NodeId(base + 1 + f), fresh_type, ""});
      Assignment h;
      for (std::size_t i = 0; i < vars.size(); ++i) {
        int c = choice[i];
        h[vars[i]] = c < static_cast<int>(existing.size())
                         ? existing[c]
                         : NodeId(base + 1 + (c - existing.size()));
      }
      return visit(ext, h);
    }
    int n = static_cast<int>(existing.size());
    for (int c = 0; c <= n + fresh; ++c) {
      choice[k] = c;
      if (!rec(k + 1, c == n + fresh ? fresh + 1 : fresh)) return false;
    }
    return true;
  };
  return rec(0, 0);
}

void check_bound(std::size_t bound) {
  std::size_t cap = oracle_edge_cap();
  if (bound > cap)
    throw OracleBoundError("bound " + std::to_string(bound) +
                           " exceeds the configured cap of " +
                           std::to_string(cap) + " edges");
}

SignatureMap production_signatures(const AssertedProduction& a,
                                   const TypeGraph* gamma) {
  const Production& p = a.production;
  std::set<std::string> types = edge_types_of(a.pre);
  for (const auto& t : edge_types_of(a.post)) types.insert(t);
  std::set<std::string> quantified = types;
  SignatureMap sig;
  auto from_graph = [&](const Graph& g) {
    for (const auto& e : g.edges()) {
      if (gamma) {
        sig[e.type] = gamma->signature(e.type);
        continue;
      }
      sig.emplace(e.type, std::vector<std::string>(e.att.size(), kAnyNode));
    }
  };
  from_graph(p.lhs);
  from_graph(p.rhs);
  for (const auto& t : quantified)
    if (!sig.count(t))
      sig[t] = signatures_for({t}, {a.pre, a.post}, gamma).at(t);
  return sig;
}

std::string fresh_type_of(const SignatureMap& sig) {
  for (const auto& [t, s] : sig)
    if (!s.empty()) return s.front();
  return kAnyNode;
}

std::vector<std::string> open_vars(const AssertedProduction& a) {
  VarSet out;
  for (const auto& v : free_vars(a.pre))
    if (!a.pre_h.count(v)) out.insert(v);
  for (const auto& v : free_vars(a.post))
    if (!a.post_h.count(v)) out.insert(v);
  return {out.begin(), out.end()};
}

// Walks every (graph, open assignment, match) instance and hands over the
// application result.
struct Instance {
  const Graph& graph;
  const Match& match;
  const Assignment& pre_h;
  const Assignment& post_h;
  const Application& app;
};

std::size_t for_each_instance(const AssertedProduction& a, std::size_t bound,
                              const TypeGraph* gamma,
                              const std::function<bool(const Instance&)>& fn) {
  check_bound(bound);
  SignatureMap sig = production_signatures(a, gamma);
  std::vector<std::string> open = open_vars(a);
  std::string fresh_type = fresh_type_of(sig);
  return enumerate_graphs(sig, bound, [&](const Graph& g) {
    return enumerate_assignments(
        g, open, fresh_type, [&](const Graph& ext, const Assignment& extra) {
          for (const Match& m : find_matches(ext, a.production)) {
            Application app = apply_production(ext, a.production, m);
            Assignment pre_h = extra, post_h = extra;
            for (const auto& [v, n] : induced_pre_assignment(a, m)) pre_h[v] = n;
            for (const auto& [v, n] : induced_post_assignment(a, app))
              post_h[v] = n;
            if (!fn(Instance{ext, m, pre_h, post_h, app})) return false;
          }
          return true;
        });
  });
}

}  // namespace

std::size_t enumerate_graphs(const SignatureMap& sig, std::size_t max_edges,
                             const std::function<bool(const Graph&)>& visit) {
  check_bound(max_edges);
  return GraphEnumerator(sig, max_edges, visit).run();
}

OracleReport check_validity_oracle(const AssertedProduction& a,
                                   std::size_t bound, const TypeGraph* gamma,
                                   std::size_t max_counterexamples) {
  OracleReport report;
  CompiledFormula pre(a.pre), post(a.post);
  report.graphs = for_each_instance(a, bound, gamma, [&](const Instance& in) {
    ++report.applications;
    if (post.eval(in.app.graph, in.post_h)) return true;
    Graph residual = in.graph;
    residual.remove_edge(in.match.edge);
    std::vector<std::pair<std::string, const Graph*>> scopes = {
        {"graph", &in.graph}, {"residual", &residual}};
    for (const auto& [scope, g] : scopes) {
      if (!pre.eval(*g, in.pre_h)) continue;
      auto w = find_violation(in.app.graph, a.post, in.post_h);
      report.counterexamples.push_back({in.graph, in.match, in.pre_h,
                                        in.app.graph, scope,
                                        w ? w->reason : "postcondition fails"});
      if (report.counterexamples.size() >= max_counterexamples) return false;
    }
    return true;
  });
  return report;
}

WeaknessReport measure_weakness(const AssertedProduction& a, std::size_t bound,
                                const TypeGraph* gamma) {
  WeaknessReport report;
  CompiledFormula pre(a.pre), post(a.post);
  for_each_instance(a, bound, gamma, [&](const Instance& in) {
    ++report.instances;
    if (!pre.eval(in.graph, in.pre_h) && post.eval(in.app.graph, in.post_h)) {
      ++report.witnesses;
      if (!report.example)
        report.example = Counterexample{in.graph, in.match, in.pre_h,
                                        in.app.graph, "graph",
                                        "precondition rejects a good match"};
    }
    return true;
  });
  return report;
}

EquivalenceReport semantic_equivalence(const Formula& a, const Formula& b,
                                       std::size_t bound,
                                       const TypeGraph* gamma) {
  check_bound(bound);
  std::set<std::string> types = edge_types_of(a);
  for (const auto& t : edge_types_of(b)) types.insert(t);
  SignatureMap sig = signatures_for(types, {a, b}, gamma);
  VarSet fv = free_vars(a);
  for (const auto& v : free_vars(b)) fv.insert(v);
  std::vector<std::string> vars(fv.begin(), fv.end());
  std::string fresh_type = fresh_type_of(sig);
  CompiledFormula ca(a), cb(b);

  EquivalenceReport report;
  report.graphs = enumerate_graphs(sig, bound, [&](const Graph& g) {
    return enumerate_assignments(
        g, vars, fresh_type, [&](const Graph& ext, const Assignment& h) {
          if (ca.eval(ext, h) == cb.eval(ext, h)) return true;
          report.equivalent = false;
          report.graph = ext;
          report.assignment = h;
          return false;
        });
  });
  return report;
}

}  // namespace adr
