#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "adr/graph.hpp"
#include "adr/production.hpp"
#include "adr/tracking.hpp"

namespace adr {

using ProductionSet = std::map<std::string, Production>;

/// A production seen as an operation E1 x ... x En -> L.
struct Operation {
  std::string name;
  std::vector<std::string> args;
  std::string result;
};

/// Sorts are the edge types; operations are the productions.
struct Signature {
  std::vector<std::string> sorts;
  std::map<std::string, Operation> ops;
};

Signature make_signature(const ProductionSet& productions,
                         const TypeGraph* gamma = nullptr);

/// A term over the production signature. Variables carry a sort (possibly
/// empty until inferred); applications carry the result sort of their
/// operation once checked.
struct Term {
  bool is_var = false;
  std::string name;  // variable or operation name
  std::string sort;
  std::vector<Term> args;

  static Term var(std::string name, std::string sort = "");
  static Term app(std::string op, std::vector<Term> args);

  bool operator==(const Term&) const = default;
};

/// Variables in left-to-right order, with repetitions.
std::vector<std::string> term_vars(const Term& t);
std::string to_string(const Term& t);

/// `brF(x, bookF(y:Fl, z))`; a bare identifier is an operation when it is
/// followed by parentheses or names a nullary operation of `sig`, and a
/// variable otherwise.
Term parse_term(std::string_view text, const Signature* sig = nullptr);

struct ReconfigRule {
  std::string name;
  Term lhs;
  Term rhs;
  bool same_sort = false;

  bool operator==(const ReconfigRule&) const = default;
};

struct RuleReport {
  std::vector<std::string> problems;
  bool same_sort = false;
  bool ok() const { return problems.empty(); }
};

/// Linearity, variable inclusion and sorting. Variable sorts are inferred
/// from their positions when not annotated.
RuleReport validate_rule(const ReconfigRule& rule, const Signature& sig);

/// Fills in sorts and same_sort. Throws IllFormedRule.
ReconfigRule check_rule(ReconfigRule rule, const Signature& sig);

/// `rule cf : brF(x, bookF(y,z)) -> brF(bookF(x,z), y)`, optionally
/// followed by `where x:Fl, y:Fl, z:Client`. The `rule` keyword and the
/// name may be omitted when `name` is given.
ReconfigRule parse_rule(std::string_view text, const Signature& sig,
                        std::string name = "");
std::string to_string(const ReconfigRule& rule);

/// t matches the tree rooted at v up to t's variables.
bool bow_tie(const Term& t, const TrackedSystem& s, VertexId v);

/// Vertices (preorder) where the rule's left-hand side matches and whose
/// recorded edge has the left-hand side's sort.
std::vector<VertexId> find_rule_matches(const TrackedSystem& s,
                                        const ReconfigRule& rule);

/// The subtree standing for variable x. Throws std::invalid_argument when
/// x does not occur in t or t does not match.
VertexId get_var_tree(const Term& t, const TrackedSystem& s, VertexId v,
                      const std::string& x);

/// One position of a term in the graph built for it: the operation (or
/// variable) there and the nodes its design is attached to.
struct GammaNode {
  std::string op;   // empty for variables
  std::string var;  // empty for applications
  std::string sort;
  std::vector<NodeId> interface;
  std::vector<GammaNode> children;
};

struct GammaResult {
  Graph graph;
  std::vector<NodeId> interface;
  std::map<std::string, EdgeId> placeholders;
  GammaNode tree;
};

/// The design denoted by t: a placeholder edge on fresh nodes for every
/// variable, glued together along the productions' right-hand sides.
GammaResult term_to_graph(const Term& t, const ProductionSet& productions,
                          IdAllocator& ids);

/// Rewrites the subtree at `root` according to `rule`. Edges under the
/// rule's variables keep their ids; the subtree is replaced by one shaped
/// like the right-hand side. Throws StaleMatch when the rule does not
/// match at `root`.
TrackedSystem apply_reconfiguration(const TrackedSystem& s,
                                    const ReconfigRule& rule, VertexId root,
                                    const ProductionSet& productions);
void apply_reconfiguration_in_place(TrackedSystem& s, const ReconfigRule& rule,
                                    VertexId root,
                                    const ProductionSet& productions);

}  // namespace adr
