#include "adr/reconfig.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <stdexcept>

#include "adr/errors.hpp"

namespace adr {

// --------------------------------------------------------------- signature

Signature make_signature(const ProductionSet& productions,
                         const TypeGraph* gamma) {
  Signature sig;
  std::set<std::string> sorts;
  if (gamma)
    for (const auto& [t, s] : gamma->edge_types()) sorts.insert(t);
  for (const auto& [name, p] : productions) {
    Operation op{name, p.argument_types(), p.lhs_type()};
    sorts.insert(op.result);
    sorts.insert(op.args.begin(), op.args.end());
    sig.ops[name] = std::move(op);
  }
  sig.sorts.assign(sorts.begin(), sorts.end());
  return sig;
}

// ------------------------------------------------------------------- terms

Term Term::var(std::string name, std::string sort) {
  return Term{true, std::move(name), std::move(sort), {}};
}

Term Term::app(std::string op, std::vector<Term> args) {
  return Term{false, std::move(op), "", std::move(args)};
}

std::vector<std::string> term_vars(const Term& t) {
  std::vector<std::string> out;
  std::function<void(const Term&)> rec = [&](const Term& u) {
    if (u.is_var) {
      out.push_back(u.name);
      return;
    }
    for (const auto& a : u.args) rec(a);
  };
  rec(t);
  return out;
}

std::string to_string(const Term& t) {
  if (t.is_var) return t.name;
  std::string out = t.name + "(";
  for (std::size_t k = 0; k < t.args.size(); ++k)
    out += (k ? ", " : "") + to_string(t.args[k]);
  return out + ")";
}

namespace {

class TermParser {
 public:
  TermParser(std::string_view s, const Signature* sig) : s_(s), sig_(sig) {}

  Term parse_all() {
    Term t = term();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what, pos_);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  std::string ident() {
    skip();
    std::size_t at = pos_;
    auto ok = [&](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
    };
    if (pos_ >= s_.size() ||
        !(std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      fail("expected an identifier");
    while (pos_ < s_.size() && ok(s_[pos_])) ++pos_;
    return std::string(s_.substr(at, pos_ - at));
  }

  Term term() {
    std::string name = ident();
    if (eat('(')) {
      std::vector<Term> args;
      if (!eat(')')) {
        do args.push_back(term());
        while (eat(','));
        if (!eat(')')) fail("expected ')'");
      }
      return Term::app(name, std::move(args));
    }
    if (eat(':')) return Term::var(name, ident());
    if (sig_) {
      auto it = sig_->ops.find(name);
      if (it != sig_->ops.end() && it->second.args.empty())
        return Term::app(name, {});
    }
    return Term::var(name);
  }

  std::string_view s_;
  const Signature* sig_;
  std::size_t pos_ = 0;
};

}  // namespace

Term parse_term(std::string_view text, const Signature* sig) {
  return TermParser(text, sig).parse_all();
}

// ------------------------------------------------------------------- rules

namespace {

struct SortChecker {
  const Signature& sig;
  std::map<std::string, std::string> var_sorts;
  std::vector<std::string> problems;

  void note_var(const std::string& x, const std::string& sort) {
    if (sort.empty()) return;
    auto [it, fresh] = var_sorts.emplace(x, sort);
    if (!fresh && it->second != sort)
      problems.push_back("variable " + x + " is used with sorts " + it->second +
                         " and " + sort);
  }

  // Collects variable sorts from annotations and positions.
  void collect(const Term& t, const std::string& expected) {
    if (t.is_var) {
      note_var(t.name, t.sort);
      note_var(t.name, expected);
      return;
    }
    auto it = sig.ops.find(t.name);
    if (it == sig.ops.end()) {
      problems.push_back("unknown operation " + t.name);
      return;
    }
    const Operation& op = it->second;
    if (op.args.size() != t.args.size()) {
      problems.push_back(t.name + " takes " + std::to_string(op.args.size()) +
                         " argument(s), given " + std::to_string(t.args.size()));
      return;
    }
    if (!expected.empty() && expected != op.result)
      problems.push_back(t.name + " has sort " + op.result + " where " +
                         expected + " is expected");
    for (std::size_t j = 0; j < t.args.size(); ++j) collect(t.args[j], op.args[j]);
  }

  void fill(Term& t) {
    if (t.is_var) {
      auto it = var_sorts.find(t.name);
      if (it != var_sorts.end()) t.sort = it->second;
      return;
    }
    auto it = sig.ops.find(t.name);
    if (it != sig.ops.end()) t.sort = it->second.result;
    for (auto& a : t.args) fill(a);
  }
};

void check_linear(const Term& t, const char* side,
                  std::vector<std::string>& problems) {
  std::set<std::string> seen;
  for (const auto& x : term_vars(t))
    if (!seen.insert(x).second)
      problems.push_back(std::string(side) + " is not linear: " + x +
                         " occurs more than once");
}

std::pair<ReconfigRule, RuleReport> analyse(ReconfigRule rule,
                                            const Signature& sig) {
  RuleReport report;
  check_linear(rule.lhs, "left-hand side", report.problems);
  check_linear(rule.rhs, "right-hand side", report.problems);
  auto lv = term_vars(rule.lhs);
  std::set<std::string> lhs_vars(lv.begin(), lv.end());
  for (const auto& x : term_vars(rule.rhs))
    if (!lhs_vars.count(x))
      report.problems.push_back("variable " + x +
                                " of the right-hand side does not occur on the "
                                "left-hand side");

  SortChecker sc{sig, {}, {}};
  sc.collect(rule.lhs, "");
  sc.collect(rule.rhs, "");
  // A bare variable on one side takes the sort of the other side.
  for (int pass = 0; pass < 2; ++pass) {
    sc.fill(rule.lhs);
    sc.fill(rule.rhs);
    if (rule.lhs.is_var && rule.lhs.sort.empty() && !rule.rhs.sort.empty())
      sc.note_var(rule.lhs.name, rule.rhs.sort);
    if (rule.rhs.is_var && rule.rhs.sort.empty() && !rule.lhs.sort.empty())
      sc.note_var(rule.rhs.name, rule.lhs.sort);
  }
  report.problems.insert(report.problems.end(), sc.problems.begin(),
                         sc.problems.end());
  for (const auto& x : lhs_vars)
    if (!sc.var_sorts.count(x))
      report.problems.push_back("the sort of variable " + x +
                                " cannot be inferred");
  for (const auto& [x, sort] : sc.var_sorts)
    if (std::find(sig.sorts.begin(), sig.sorts.end(), sort) == sig.sorts.end())
      report.problems.push_back("unknown sort " + sort + " for variable " + x);
  report.same_sort = !rule.lhs.sort.empty() && rule.lhs.sort == rule.rhs.sort;
  rule.same_sort = report.same_sort;
  return {std::move(rule), std::move(report)};
}

}  // namespace

RuleReport validate_rule(const ReconfigRule& rule, const Signature& sig) {
  return analyse(rule, sig).second;
}

ReconfigRule check_rule(ReconfigRule rule, const Signature& sig) {
  auto [out, report] = analyse(std::move(rule), sig);
  if (!report.ok()) {
    std::string msg = "rule " + out.name + ": ";
    for (std::size_t i = 0; i < report.problems.size(); ++i)
      msg += (i ? "; " : "") + report.problems[i];
    throw IllFormedRule(msg);
  }
  return out;
}

ReconfigRule parse_rule(std::string_view text, const Signature& sig,
                        std::string name) {
  std::string s(text);
  auto trim = [](std::string x) {
    auto b = x.find_first_not_of(" \t\r\n");
    auto e = x.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : x.substr(b, e - b + 1);
  };
  s = trim(s);
  if (s.rfind("rule", 0) == 0 && s.size() > 4 &&
      std::isspace(static_cast<unsigned char>(s[4]))) {
    auto colon = s.find(':');
    if (colon == std::string::npos)
      throw SyntaxError("expected ':' after the rule name", 4);
    name = trim(s.substr(4, colon - 4));
    s = trim(s.substr(colon + 1));
  }
  std::map<std::string, std::string> annotations;
  if (auto w = s.find(" where "); w != std::string::npos) {
    std::string rest = s.substr(w + 7);
    s = trim(s.substr(0, w));
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      std::string item = trim(rest.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      auto c = item.find(':');
      if (c == std::string::npos)
        throw SyntaxError("expected 'var:Sort' in the where clause", w + 7 + start);
      annotations[trim(item.substr(0, c))] = trim(item.substr(c + 1));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  auto arrow = s.find("->");
  if (arrow == std::string::npos) throw SyntaxError("expected '->'", s.size());
  ReconfigRule rule{name, parse_term(trim(s.substr(0, arrow)), &sig),
                    parse_term(trim(s.substr(arrow + 2)), &sig), false};
  std::function<void(Term&)> annotate = [&](Term& t) {
    if (t.is_var) {
      auto it = annotations.find(t.name);
      if (it != annotations.end()) {
        if (!t.sort.empty() && t.sort != it->second)
          throw IllFormedRule("conflicting sorts for variable " + t.name);
        t.sort = it->second;
      }
      return;
    }
    for (auto& a : t.args) annotate(a);
  };
  annotate(rule.lhs);
  annotate(rule.rhs);
  return check_rule(std::move(rule), sig);
}

std::string to_string(const ReconfigRule& rule) {
  return "rule " + rule.name + " : " + to_string(rule.lhs) + " -> " +
         to_string(rule.rhs);
}

// ---------------------------------------------------------------- matching

bool bow_tie(const Term& t, const TrackedSystem& s, VertexId v) {
  if (t.is_var) return true;
  if (!s.forest.contains(v)) return false;
  auto it = s.env.env2.find(v);
  if (it == s.env.env2.end() || it->second != t.name) return false;
  const auto& kids = s.forest.kids(v);
  if (t.args.empty())
    return std::all_of(kids.begin(), kids.end(),
                       [&](VertexId c) { return s.is_tombstone(c); });
  if (kids.size() != t.args.size()) return false;
  for (std::size_t j = 0; j < kids.size(); ++j)
    if (!bow_tie(t.args[j], s, kids[j])) return false;
  return true;
}

std::vector<VertexId> find_rule_matches(const TrackedSystem& s,
                                        const ReconfigRule& rule) {
  std::vector<VertexId> out;
  for (VertexId v : s.forest.preorder()) {
    auto rec = s.env.env1.find(v);
    if (rec == s.env.env1.end()) continue;
    if (!rule.lhs.sort.empty() && rec->second.type != rule.lhs.sort) continue;
    if (bow_tie(rule.lhs, s, v)) out.push_back(v);
  }
  return out;
}

VertexId get_var_tree(const Term& t, const TrackedSystem& s, VertexId v,
                      const std::string& x) {
  if (t.is_var) {
    if (t.name == x) return v;
    throw std::invalid_argument("variable " + x + " does not occur in the term");
  }
  auto it = s.env.env2.find(v);
  if (it == s.env.env2.end() || it->second != t.name)
    throw std::invalid_argument("term " + to_string(t) +
                                " does not match the tree");
  const auto& kids = s.forest.kids(v);
  for (std::size_t j = 0; j < t.args.size(); ++j) {
    auto vars = term_vars(t.args[j]);
    if (std::find(vars.begin(), vars.end(), x) == vars.end()) continue;
    if (j >= kids.size())
      throw std::invalid_argument("tree is too shallow for " + to_string(t));
    return get_var_tree(t.args[j], s, kids[j], x);
  }
  throw std::invalid_argument("variable " + x + " does not occur in the term");
}

// ----------------------------------------------------------- term to graph

namespace {

std::vector<std::string> node_types_for(const std::string& sort,
                                        const ProductionSet& productions) {
  for (const auto& [name, p] : productions) {
    for (const Graph* g : {&p.lhs, &p.rhs})
      for (const auto& e : g->edges())
        if (e.type == sort) {
          std::vector<std::string> out;
          for (NodeId n : e.att) out.push_back(g->node(n).type);
          return out;
        }
  }
  throw IllFormedRule("no production mentions sort " + sort);
}

void rename_tree(GammaNode& n, const std::map<NodeId, NodeId>& sigma) {
  for (auto& x : n.interface) {
    auto it = sigma.find(x);
    if (it != sigma.end()) x = it->second;
  }
  for (auto& c : n.children) rename_tree(c, sigma);
}

GammaResult gamma(const Term& t, const ProductionSet& productions,
                  IdAllocator& ids) {
  GammaResult out;
  if (t.is_var) {
    if (t.sort.empty())
      throw IllFormedRule("variable " + t.name + " has no sort");
    Edge e{ids.edge(), t.sort, {}, true, t.name};
    for (const auto& nt : node_types_for(t.sort, productions)) {
      NodeId n = ids.node();
      out.graph.add_node({n, nt, ""});
      e.att.push_back(n);
    }
    out.interface = e.att;
    out.placeholders[t.name] = e.id;
    out.tree = GammaNode{"", t.name, t.sort, e.att, {}};
    out.graph.add_edge(std::move(e));
    return out;
  }

  auto pit = productions.find(t.name);
  if (pit == productions.end())
    throw IllFormedRule("unknown operation " + t.name);
  const Production& p = pit->second;
  if (p.rhs_order.size() != t.args.size())
    throw IllFormedRule(t.name + " takes " + std::to_string(p.rhs_order.size()) +
                        " argument(s)");

  std::vector<GammaResult> kids;
  for (const auto& a : t.args) kids.push_back(gamma(a, productions, ids));
  auto [rcopy, iota] = fresh_copy(p.rhs, ids);

  std::map<NodeId, NodeId> sigma;
  for (std::size_t j = 0; j < kids.size(); ++j) {
    const Edge& rj = p.rhs.edge(p.rhs_order[j]);
    if (kids[j].interface.size() != rj.att.size())
      throw IllFormedRule("argument " + std::to_string(j + 1) + " of " + t.name +
                          " has the wrong arity");
    for (std::size_t m = 0; m < rj.att.size(); ++m) {
      NodeId target = iota.nodes.at(rj.att[m]);
      auto [it, fresh] = sigma.emplace(kids[j].interface[m], target);
      if (!fresh && it->second != target)
        throw IllFormedRule("argument " + std::to_string(j + 1) + " of " +
                            t.name + " glues one node to two places");
    }
  }

  for (const auto& n : rcopy.nodes()) out.graph.add_node(n);
  for (auto& k : kids) {
    for (const auto& n : k.graph.nodes())
      if (!sigma.count(n.id)) out.graph.add_node(n);
    for (Edge e : k.graph.edges()) {
      for (auto& a : e.att)
        if (auto it = sigma.find(a); it != sigma.end()) a = it->second;
      out.graph.add_edge(std::move(e));
    }
    for (const auto& [x, e] : k.placeholders) out.placeholders[x] = e;
    rename_tree(k.tree, sigma);
  }
  for (NodeId l : p.lhs_edge().att)
    out.interface.push_back(iota.nodes.at(p.interface.at(l)));
  out.tree = GammaNode{t.name, "", p.lhs_type(), out.interface, {}};
  for (auto& k : kids) out.tree.children.push_back(std::move(k.tree));
  return out;
}

struct UnionFind {
  std::map<NodeId, NodeId> up;
  NodeId find(NodeId x) {
    auto it = up.find(x);
    if (it == up.end() || it->second == x) return x;
    NodeId r = find(it->second);
    up[x] = r;
    return r;
  }
  void unite(NodeId a, NodeId b) {
    a = find(a);
    b = find(b);
    if (a != b) up[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<EdgeId> leaf_edges(const TrackedSystem& s, VertexId v) {
  std::vector<EdgeId> out;
  for (VertexId l : s.forest.leaves(v)) {
    auto it = s.env.env1.find(l);
    if (it != s.env.env1.end()) out.push_back(it->second.edge);
  }
  return out;
}

}  // namespace

GammaResult term_to_graph(const Term& t, const ProductionSet& productions,
                          IdAllocator& ids) {
  return gamma(t, productions, ids);
}

// ---------------------------------------------------------- reconfiguration

void apply_reconfiguration_in_place(TrackedSystem& s, const ReconfigRule& rule,
                                    VertexId v0,
                                    const ProductionSet& productions) {
  auto root_rec = s.env.env1.find(v0);
  if (!s.forest.contains(v0) || root_rec == s.env.env1.end())
    throw StaleMatch("vertex " + std::to_string(v0.value) +
                     " is not a recorded vertex of the forest");
  if (!rule.lhs.sort.empty() && root_rec->second.type != rule.lhs.sort)
    throw StaleMatch("vertex " + std::to_string(v0.value) + " records a " +
                     root_rec->second.type + " edge, rule " + rule.name +
                     " rewrites " + rule.lhs.sort);
  if (!bow_tie(rule.lhs, s, v0))
    throw StaleMatch("rule " + rule.name + " does not match at vertex " +
                     std::to_string(v0.value));

  const std::vector<NodeId> n0 = root_rec->second.nodes;
  const std::set<NodeId> n0set(n0.begin(), n0.end());

  // Subgraphs of the matched subtree and of each variable.
  std::vector<EdgeId> gl = leaf_edges(s, v0);
  for (EdgeId e : gl) {
    const Edge* edge = s.graph.find_edge(e);
    const EdgeRecord& rec = s.env.env1.at(*s.env.vertex_of(e));
    if (!edge || edge->att != rec.nodes)
      throw IntegrityError("leaf record of edge " + std::to_string(e.value) +
                           " disagrees with the graph");
  }
  std::map<std::string, VertexId> tx;
  std::map<std::string, std::vector<NodeId>> boundary;
  for (const auto& x : term_vars(rule.lhs)) {
    tx[x] = get_var_tree(rule.lhs, s, v0, x);
    auto rec = s.env.env1.find(tx[x]);
    if (rec == s.env.env1.end())
      throw IntegrityError("the subtree of variable " + x +
                           " has no recorded edge");
    boundary[x] = rec->second.nodes;
  }
  const std::vector<std::string> rhs_vars = term_vars(rule.rhs);

  // Skeleton of the right-hand side and the node classes it induces.
  GammaResult g = term_to_graph(rule.rhs, productions, s.ids);
  UnionFind uf;
  for (const auto& x : rhs_vars) {
    const auto& p = g.graph.edge(g.placeholders.at(x)).att;
    const auto& b = boundary.at(x);
    if (p.size() != b.size())
      throw IllFormedRule("variable " + x + " changes arity");
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t k2 = k + 1; k2 < b.size(); ++k2)
        if (b[k] == b[k2]) uf.unite(p[k], p[k2]);
  }
  for (std::size_t k = 0; k < n0.size() && k < g.interface.size(); ++k)
    for (std::size_t k2 = k + 1; k2 < n0.size() && k2 < g.interface.size(); ++k2)
      if (n0[k] == n0[k2]) uf.unite(g.interface[k], g.interface[k2]);

  std::map<NodeId, NodeId> rep;
  std::set<NodeId> used;
  for (std::size_t k = 0; k < g.interface.size() && k < n0.size(); ++k) {
    NodeId c = uf.find(g.interface[k]);
    auto [it, fresh] = rep.emplace(c, n0[k]);
    if (!fresh && it->second != n0[k])
      throw IllFormedRule("rule " + rule.name +
                          " would identify distinct interface nodes");
    used.insert(n0[k]);
  }
  for (const auto& x : rhs_vars) {
    const auto& p = g.graph.edge(g.placeholders.at(x)).att;
    const auto& b = boundary.at(x);
    for (std::size_t k = 0; k < p.size(); ++k) {
      NodeId c = uf.find(p[k]);
      if (rep.count(c) || used.count(b[k]) || n0set.count(b[k])) continue;
      rep[c] = b[k];
      used.insert(b[k]);
    }
  }
  // Leftover boundary nodes of the right type are reused before fresh ones.
  std::vector<NodeId> spare;
  for (const auto& x : rhs_vars)
    for (NodeId b : boundary.at(x))
      if (!used.count(b) && !n0set.count(b) &&
          std::find(spare.begin(), spare.end(), b) == spare.end())
        spare.push_back(b);
  std::vector<Node> fresh_nodes;
  for (const auto& n : g.graph.nodes()) {
    NodeId c = uf.find(n.id);
    if (rep.count(c)) continue;
    auto sp = std::find_if(spare.begin(), spare.end(), [&](NodeId b) {
      return !used.count(b) && s.graph.node(b).type == n.type;
    });
    if (sp != spare.end()) {
      rep[c] = *sp;
      used.insert(*sp);
      continue;
    }
    NodeId f = s.ids.node();
    rep[c] = f;
    fresh_nodes.push_back({f, n.type, ""});
  }
  auto rep_of = [&](NodeId skeleton) { return rep.at(uf.find(skeleton)); };

  std::map<std::string, std::map<NodeId, NodeId>> rename;
  for (const auto& x : rhs_vars) {
    const auto& p = g.graph.edge(g.placeholders.at(x)).att;
    const auto& b = boundary.at(x);
    for (std::size_t k = 0; k < b.size(); ++k) rename[x][b[k]] = rep_of(p[k]);
  }
  auto apply_rename = [](const std::map<NodeId, NodeId>& m,
                         std::vector<NodeId> nodes) {
    for (auto& n : nodes)
      if (auto it = m.find(n); it != m.end()) n = it->second;
    return nodes;
  };

  // Graph: drop the subgraphs of discarded variables, re-attach the kept
  // ones, collect orphans.
  Graph out = s.graph;
  std::set<NodeId> touched;
  for (EdgeId e : gl)
    for (NodeId n : s.graph.edge(e).att) touched.insert(n);
  for (const auto& x : term_vars(rule.lhs)) {
    if (std::find(rhs_vars.begin(), rhs_vars.end(), x) != rhs_vars.end()) continue;
    for (EdgeId e : leaf_edges(s, tx.at(x))) out.remove_edge(e);
  }
  for (const auto& n : fresh_nodes) out.add_node(n);
  for (const auto& x : rhs_vars)
    for (EdgeId e : leaf_edges(s, tx.at(x)))
      out.set_attachment(e, apply_rename(rename.at(x), out.edge(e).att));
  for (NodeId n : touched)
    if (out.has_node(n) && !n0set.count(n) && out.incident(n).empty())
      out.remove_node(n);

  // Forest: keep the variables' subtrees, rebuild everything above them.
  std::set<VertexId> kept;
  for (const auto& x : rhs_vars)
    for (VertexId w : s.forest.subtree(tx.at(x))) {
      kept.insert(w);
      auto it = s.env.env1.find(w);
      if (it != s.env.env1.end())
        it->second.nodes = apply_rename(rename.at(x), it->second.nodes);
    }
  for (VertexId w : s.forest.subtree(v0)) {
    if (kept.count(w) || w == v0) continue;
    s.forest.children.erase(w);
    s.forest.parent.erase(w);
    s.env.env1.erase(w);
    s.env.env2.erase(w);
  }
  s.forest.children.at(v0).clear();

  auto attach = [&](VertexId child, VertexId parent) {
    s.forest.parent[child] = parent;
    s.forest.children.at(parent).push_back(child);
  };
  auto reps = [&](const std::vector<NodeId>& skeleton) {
    std::vector<NodeId> r;
    for (NodeId n : skeleton) r.push_back(rep_of(n));
    return r;
  };
  std::function<void(const GammaNode&, VertexId)> build =
      [&](const GammaNode& gn, VertexId v) {
        s.env.env2[v] = gn.op;
        for (const auto& c : gn.children) {
          if (!c.var.empty()) {
            attach(tx.at(c.var), v);
            continue;
          }
          VertexId w = s.ids.vertex();
          s.forest.children[w] = {};
          attach(w, v);
          s.env.env1[w] =
              EdgeRecord{s.ids.edge(), c.sort, reps(c.interface), "", true};
          build(c, w);
        }
        if (gn.children.empty()) {
          VertexId w = s.ids.vertex();
          s.forest.children[w] = {};
          attach(w, v);
        }
      };

  VertexId result = v0;
  if (!g.tree.var.empty()) {
    // The whole subtree collapses onto one variable's subtree.
    VertexId w = tx.at(g.tree.var);
    s.forest.parent.erase(w);
    if (auto p = s.forest.parent_of(v0)) {
      auto& sib = s.forest.children.at(*p);
      *std::find(sib.begin(), sib.end(), v0) = w;
      s.forest.parent[w] = *p;
    } else {
      *std::find(s.forest.roots.begin(), s.forest.roots.end(), v0) = w;
    }
    s.forest.children.erase(v0);
    s.forest.parent.erase(v0);
    s.env.env1.erase(v0);
    s.env.env2.erase(v0);
    result = w;
  } else {
    for (const auto& c : g.tree.children)
      if (!c.var.empty()) s.forest.parent.erase(tx.at(c.var));
    EdgeRecord& rec = s.env.env1.at(v0);
    if (rec.type != g.tree.sort)
      rec = EdgeRecord{s.ids.edge(), g.tree.sort, reps(g.interface), "", true};
    build(g.tree, v0);
  }

  s.graph = std::move(out);
  s.log.push_back({Event::Kind::Reconfiguration, rule.name, {}, v0, result});
}

TrackedSystem apply_reconfiguration(const TrackedSystem& s,
                                    const ReconfigRule& rule, VertexId root,
                                    const ProductionSet& productions) {
  TrackedSystem out = s;
  apply_reconfiguration_in_place(out, rule, root, productions);
  return out;
}

}  // namespace adr
