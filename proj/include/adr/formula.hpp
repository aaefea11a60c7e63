#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "adr/graph.hpp"
#include "adr/ids.hpp"

namespace adr {

struct FormulaNode;

/// Immutable formula of the ADR graph logic:
///
///   phi ::= x = y | top | !phi | phi & phi | forall D(x1,...,xn). phi
///
/// Everything else (bot, |, ->, exists, x != y, "no D") is sugar expanded at
/// construction time. Sub-formulas are shared, so copies are cheap.
class Formula {
 public:
  struct Eq {
    std::string lhs, rhs;
  };
  struct Top {};
  struct Not;
  struct And;
  struct Forall;

  static Formula top();
  static Formula eq(std::string x, std::string y);
  static Formula neg(Formula body);
  static Formula conj(Formula lhs, Formula rhs);
  static Formula forall(std::string edge_type, std::vector<std::string> vars,
                        Formula body);

  const FormulaNode& node() const { return *node_; }

  template <class T>
  const T* as() const;

  bool operator==(const Formula& other) const;

 private:
  explicit Formula(std::shared_ptr<const FormulaNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const FormulaNode> node_;
};

struct Formula::Not {
  Formula body;
};
struct Formula::And {
  Formula lhs, rhs;
};
struct Formula::Forall {
  std::string edge_type;
  std::vector<std::string> vars;
  Formula body;
};

struct FormulaNode {
  std::variant<Formula::Eq, Formula::Top, Formula::Not, Formula::And,
               Formula::Forall>
      v;
};

template <class T>
const T* Formula::as() const {
  return std::get_if<T>(&node_->v);
}

using Assignment = std::map<std::string, NodeId>;
using VarSet = std::set<std::string>;

VarSet free_vars(const Formula& f);
/// Every variable name occurring in `f`, bound or free.
VarSet all_vars(const Formula& f);
std::set<std::string> edge_types_of(const Formula& f);
bool is_closed(const Formula& f);

// Derived connectives.
Formula bot();
Formula neq(std::string x, std::string y);
Formula disj(Formula a, Formula b);
Formula implies(Formula a, Formula b);
Formula exists(std::string edge_type, std::vector<std::string> vars,
               Formula body);
/// "no D": forall D(vars). bot
Formula no_edges(std::string edge_type, std::vector<std::string> vars);
/// x1 = x2 & x2 = x3 & ... ; top for fewer than two variables.
Formula eq_chain(const std::vector<std::string>& vars);

struct DesugarArgs {
  std::vector<Formula> formulas;
  std::string edge_type;
  std::vector<std::string> vars;
};

/// Expands a named derived form: Bot, Or, Implies, Exists, NoD, EqChain.
/// Throws UnknownConnective for anything else.
Formula desugar(std::string_view name, const DesugarArgs& args);

/// Structural problems against a type graph: unknown edge types, bound
/// variable lists of the wrong length or with repeated names.
std::vector<std::string> check_formula(const Formula& f, const TypeGraph& gamma);

/// G |=_h phi. Throws UnboundVariable when h misses a free variable, and
/// std::invalid_argument when h points outside the graph.
bool satisfies(const Graph& g, const Formula& f, const Assignment& h = {});

/// Why a formula fails: the assignment reached (extended with the bound
/// variables of the quantifiers descended through) and a short reason.
struct Witness {
  Assignment assignment;
  std::string reason;
};

/// Descends into a false formula to the innermost failing sub-formula.
/// Returns nothing when G satisfies f under h.
std::optional<Witness> find_violation(const Graph& g, const Formula& f,
                                      const Assignment& h = {});

/// Pre-resolved formula for repeated evaluation over many graphs.
class CompiledFormula {
 public:
  explicit CompiledFormula(const Formula& f);
  ~CompiledFormula();
  CompiledFormula(CompiledFormula&&) noexcept;
  CompiledFormula& operator=(CompiledFormula&&) noexcept;

  const std::vector<std::string>& free_variables() const;
  /// `values` follows free_variables() order.
  bool eval(const Graph& g, const std::vector<NodeId>& values) const;
  bool eval(const Graph& g, const Assignment& h) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Text syntax. `gamma` is only needed for the arity of "no D".
Formula parse_formula(std::string_view text, const TypeGraph* gamma = nullptr);
std::string to_string(const Formula& f);

}  // namespace adr
