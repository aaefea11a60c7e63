#include "adr/formula.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "adr/errors.hpp"

namespace adr {

// ------------------------------------------------------------- construction

Formula Formula::top() {
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{Top{}}));
}

Formula Formula::eq(std::string x, std::string y) {
  return Formula(std::make_shared<const FormulaNode>(
      FormulaNode{Eq{std::move(x), std::move(y)}}));
}

Formula Formula::neg(Formula body) {
  return Formula(
      std::make_shared<const FormulaNode>(FormulaNode{Not{std::move(body)}}));
}

Formula Formula::conj(Formula lhs, Formula rhs) {
  return Formula(std::make_shared<const FormulaNode>(
      FormulaNode{And{std::move(lhs), std::move(rhs)}}));
}

Formula Formula::forall(std::string edge_type, std::vector<std::string> vars,
                        Formula body) {
  return Formula(std::make_shared<const FormulaNode>(FormulaNode{
      Forall{std::move(edge_type), std::move(vars), std::move(body)}}));
}

bool Formula::operator==(const Formula& other) const {
  if (node_ == other.node_) return true;
  const auto& a = node_->v;
  const auto& b = other.node_->v;
  if (a.index() != b.index()) return false;
  if (auto* x = std::get_if<Eq>(&a)) {
    auto* y = std::get_if<Eq>(&b);
    return x->lhs == y->lhs && x->rhs == y->rhs;
  }
  if (std::holds_alternative<Top>(a)) return true;
  if (auto* x = std::get_if<Not>(&a)) return x->body == std::get<Not>(b).body;
  if (auto* x = std::get_if<And>(&a)) {
    const auto& y = std::get<And>(b);
    return x->lhs == y.lhs && x->rhs == y.rhs;
  }
  const auto& x = std::get<Forall>(a);
  const auto& y = std::get<Forall>(b);
  return x.edge_type == y.edge_type && x.vars == y.vars && x.body == y.body;
}

// ---------------------------------------------------------------- variables

namespace {

void collect_free(const Formula& f, VarSet& bound, VarSet& out) {
  if (auto* e = f.as<Formula::Eq>()) {
    if (!bound.count(e->lhs)) out.insert(e->lhs);
    if (!bound.count(e->rhs)) out.insert(e->rhs);
  } else if (auto* n = f.as<Formula::Not>()) {
    collect_free(n->body, bound, out);
  } else if (auto* a = f.as<Formula::And>()) {
    collect_free(a->lhs, bound, out);
    collect_free(a->rhs, bound, out);
  } else if (auto* q = f.as<Formula::Forall>()) {
    VarSet inner = bound;
    inner.insert(q->vars.begin(), q->vars.end());
    collect_free(q->body, inner, out);
  }
}

template <class Fn>
void walk(const Formula& f, Fn&& fn) {
  fn(f);
  if (auto* n = f.as<Formula::Not>()) {
    walk(n->body, fn);
  } else if (auto* a = f.as<Formula::And>()) {
    walk(a->lhs, fn);
    walk(a->rhs, fn);
  } else if (auto* q = f.as<Formula::Forall>()) {
    walk(q->body, fn);
  }
}

}  // namespace

VarSet free_vars(const Formula& f) {
  VarSet bound, out;
  collect_free(f, bound, out);
  return out;
}

VarSet all_vars(const Formula& f) {
  VarSet out;
  walk(f, [&](const Formula& g) {
    if (auto* e = g.as<Formula::Eq>()) {
      out.insert(e->lhs);
      out.insert(e->rhs);
    } else if (auto* q = g.as<Formula::Forall>()) {
      out.insert(q->vars.begin(), q->vars.end());
    }
  });
  return out;
}

std::set<std::string> edge_types_of(const Formula& f) {
  std::set<std::string> out;
  walk(f, [&](const Formula& g) {
    if (auto* q = g.as<Formula::Forall>()) out.insert(q->edge_type);
  });
  return out;
}

bool is_closed(const Formula& f) { return free_vars(f).empty(); }

// ------------------------------------------------------------------- sugar

Formula bot() { return Formula::neg(Formula::top()); }

Formula neq(std::string x, std::string y) {
  return Formula::neg(Formula::eq(std::move(x), std::move(y)));
}

Formula disj(Formula a, Formula b) {
  return Formula::neg(
      Formula::conj(Formula::neg(std::move(a)), Formula::neg(std::move(b))));
}

Formula implies(Formula a, Formula b) {
  return disj(Formula::neg(std::move(a)), std::move(b));
}

Formula exists(std::string edge_type, std::vector<std::string> vars,
               Formula body) {
  return Formula::neg(Formula::forall(std::move(edge_type), std::move(vars),
                                      Formula::neg(std::move(body))));
}

Formula no_edges(std::string edge_type, std::vector<std::string> vars) {
  return Formula::forall(std::move(edge_type), std::move(vars), bot());
}

Formula eq_chain(const std::vector<std::string>& vars) {
  if (vars.size() < 2) return Formula::top();
  Formula out = Formula::eq(vars[0], vars[1]);
  for (std::size_t i = 2; i < vars.size(); ++i)
    out = Formula::conj(out, Formula::eq(vars[i - 1], vars[i]));
  return out;
}

Formula desugar(std::string_view name, const DesugarArgs& args) {
  auto need = [&](std::size_t n) {
    if (args.formulas.size() != n)
      throw std::invalid_argument(std::string(name) + " expects " +
                                  std::to_string(n) + " formula argument(s)");
  };
  if (name == "Bot") return bot();
  if (name == "Or") {
    need(2);
    return disj(args.formulas[0], args.formulas[1]);
  }
  if (name == "Implies") {
    need(2);
    return implies(args.formulas[0], args.formulas[1]);
  }
  if (name == "Exists") {
    need(1);
    return exists(args.edge_type, args.vars, args.formulas[0]);
  }
  if (name == "NoD") return no_edges(args.edge_type, args.vars);
  if (name == "EqChain") return eq_chain(args.vars);
  throw UnknownConnective("unknown derived form '" + std::string(name) + "'");
}

std::vector<std::string> check_formula(const Formula& f,
                                       const TypeGraph& gamma) {
  std::vector<std::string> out;
  walk(f, [&](const Formula& g) {
    auto* q = g.as<Formula::Forall>();
    if (!q) return;
    if (!gamma.has_edge_type(q->edge_type)) {
      out.push_back("unknown edge type '" + q->edge_type + "'");
      return;
    }
    if (gamma.arity(q->edge_type) != q->vars.size())
      out.push_back("quantifier over '" + q->edge_type + "' binds " +
                    std::to_string(q->vars.size()) + " variable(s), arity is " +
                    std::to_string(gamma.arity(q->edge_type)));
    std::set<std::string> distinct(q->vars.begin(), q->vars.end());
    if (distinct.size() != q->vars.size())
      out.push_back("quantifier over '" + q->edge_type +
                    "' repeats a bound variable");
  });
  return out;
}

// --------------------------------------------------------------- evaluation

struct CompiledFormula::Impl {
  enum class Kind { Eq, Top, Not, And, Forall };
  struct Op {
    Kind kind;
    int a = -1, b = -1;  // slots (Eq) or child ops (Not, And, Forall body)
    int type = -1;
    std::vector<int> slots;
  };

  std::vector<Op> ops;
  int root = -1;
  int slot_count = 0;
  std::vector<std::string> free;
  std::vector<std::string> types;

  int compile(const Formula& f, const std::map<std::string, int>& scope) {
    Op op{};
    if (auto* e = f.as<Formula::Eq>()) {
      op.kind = Kind::Eq;
      op.a = scope.at(e->lhs);
      op.b = scope.at(e->rhs);
    } else if (f.as<Formula::Top>()) {
      op.kind = Kind::Top;
    } else if (auto* n = f.as<Formula::Not>()) {
      op.kind = Kind::Not;
      op.a = compile(n->body, scope);
    } else if (auto* c = f.as<Formula::And>()) {
      op.kind = Kind::And;
      op.a = compile(c->lhs, scope);
      op.b = compile(c->rhs, scope);
    } else {
      const auto& q = *f.as<Formula::Forall>();
      op.kind = Kind::Forall;
      auto it = std::find(types.begin(), types.end(), q.edge_type);
      op.type = static_cast<int>(it - types.begin());
      if (it == types.end()) types.push_back(q.edge_type);
      std::map<std::string, int> inner = scope;
      for (const auto& v : q.vars) {
        op.slots.push_back(slot_count);
        inner[v] = slot_count++;
      }
      op.a = compile(q.body, inner);
    }
    ops.push_back(std::move(op));
    return static_cast<int>(ops.size()) - 1;
  }

  bool eval(int i, const std::vector<std::vector<const Edge*>>& by_type,
            std::vector<NodeId>& slots) const {
    const Op& op = ops[i];
    switch (op.kind) {
      case Kind::Eq:
        return slots[op.a] == slots[op.b];
      case Kind::Top:
        return true;
      case Kind::Not:
        return !eval(op.a, by_type, slots);
      case Kind::And:
        return eval(op.a, by_type, slots) && eval(op.b, by_type, slots);
      case Kind::Forall:
        for (const Edge* e : by_type[op.type]) {
          if (e->att.size() != op.slots.size())
            throw std::invalid_argument("edge of type '" + e->type +
                                        "' has arity " +
                                        std::to_string(e->att.size()) +
                                        ", quantifier binds " +
                                        std::to_string(op.slots.size()));
          for (std::size_t k = 0; k < op.slots.size(); ++k)
            slots[op.slots[k]] = e->att[k];
          if (!eval(op.a, by_type, slots)) return false;
        }
        return true;
    }
    return false;
  }
};

CompiledFormula::CompiledFormula(const Formula& f)
    : impl_(std::make_unique<Impl>()) {
  std::map<std::string, int> scope;
  for (const auto& v : free_vars(f)) {
    impl_->free.push_back(v);
    scope[v] = impl_->slot_count++;
  }
  impl_->root = impl_->compile(f, scope);
}

CompiledFormula::~CompiledFormula() = default;
CompiledFormula::CompiledFormula(CompiledFormula&&) noexcept = default;
CompiledFormula& CompiledFormula::operator=(CompiledFormula&&) noexcept =
    default;

const std::vector<std::string>& CompiledFormula::free_variables() const {
  return impl_->free;
}

bool CompiledFormula::eval(const Graph& g,
                           const std::vector<NodeId>& values) const {
  std::vector<std::vector<const Edge*>> by_type(impl_->types.size());
  for (const auto& e : g.edges()) {
    for (std::size_t t = 0; t < impl_->types.size(); ++t)
      if (impl_->types[t] == e.type) {
        by_type[t].push_back(&e);
        break;
      }
  }
  std::vector<NodeId> slots(static_cast<std::size_t>(impl_->slot_count));
  std::copy(values.begin(), values.end(), slots.begin());
  return impl_->eval(impl_->root, by_type, slots);
}

bool CompiledFormula::eval(const Graph& g, const Assignment& h) const {
  std::vector<NodeId> values;
  for (const auto& v : impl_->free) {
    auto it = h.find(v);
    if (it == h.end())
      throw UnboundVariable("free variable '" + v + "' is not assigned");
    if (!g.has_node(it->second))
      throw std::invalid_argument("variable '" + v +
                                  "' is assigned to a node outside the graph");
    values.push_back(it->second);
  }
  return eval(g, values);
}

bool satisfies(const Graph& g, const Formula& f, const Assignment& h) {
  return CompiledFormula(f).eval(g, h);
}

namespace {

std::optional<Witness> violation(const Graph& g, const Formula& f,
                                 const Assignment& h) {
  if (satisfies(g, f, h)) return std::nullopt;
  if (auto* e = f.as<Formula::Eq>()) {
    return Witness{h, e->lhs + " != " + e->rhs + " (" +
                          g.label(h.at(e->lhs)) + " vs " +
                          g.label(h.at(e->rhs)) + ")"};
  }
  if (auto* c = f.as<Formula::And>()) {
    if (auto w = violation(g, c->lhs, h)) return w;
    return violation(g, c->rhs, h);
  }
  if (auto* q = f.as<Formula::Forall>()) {
    for (const auto& e : g.edges()) {
      if (e.type != q->edge_type) continue;
      Assignment inner = h;
      for (std::size_t k = 0; k < q->vars.size(); ++k)
        inner[q->vars[k]] = e.att.at(k);
      if (auto w = violation(g, q->body, inner)) {
        w->reason = "at edge " + g.label(e.id) + ": " + w->reason;
        return w;
      }
    }
    return std::nullopt;
  }
  const Formula& body = f.as<Formula::Not>()->body;
  if (auto* e = body.as<Formula::Eq>()) {
    return Witness{h, e->lhs + "=" + e->rhs + " at the shared node " +
                          g.label(h.at(e->lhs))};
  }
  return Witness{h, "'" + to_string(body) + "' holds"};
}

}  // namespace

std::optional<Witness> find_violation(const Graph& g, const Formula& f,
                                      const Assignment& h) {
  return violation(g, f, h);
}

// ------------------------------------------------------------------ parsing

namespace {

struct Token {
  enum Kind { Ident, LParen, RParen, Comma, Dot, Eq, Neq, Bang, Amp, Bar,
              Arrow, End } kind;
  std::string text;
  std::size_t offset;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '\'';
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t at = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && ident_char(s[i])) ++i;
      out.push_back({Token::Ident, std::string(s.substr(at, i - at)), at});
      continue;
    }
    auto two = s.substr(i, 2);
    if (two == "!=") {
      out.push_back({Token::Neq, "!=", at});
      i += 2;
    } else if (two == "->") {
      out.push_back({Token::Arrow, "->", at});
      i += 2;
    } else {
      Token::Kind k;
      switch (c) {
        case '(': k = Token::LParen; break;
        case ')': k = Token::RParen; break;
        case ',': k = Token::Comma; break;
        case '.': k = Token::Dot; break;
        case '=': k = Token::Eq; break;
        case '!': k = Token::Bang; break;
        case '~': k = Token::Bang; break;
        case '&': k = Token::Amp; break;
        case '|': k = Token::Bar; break;
        default:
          throw SyntaxError(std::string("unexpected character '") + c + "'",
                            at);
      }
      out.push_back({k, std::string(1, c), at});
      ++i;
    }
  }
  out.push_back({Token::End, "", s.size()});
  return out;
}

class FormulaParser {
 public:
  FormulaParser(std::string_view text, const TypeGraph* gamma)
      : tokens_(lex(text)), gamma_(gamma) {}

  Formula parse() {
    Formula f = implication();
    if (peek().kind != Token::End)
      throw SyntaxError("unexpected '" + peek().text + "'", peek().offset);
    return f;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  bool at_keyword(std::string_view kw) const {
    return peek().kind == Token::Ident && peek().text == kw;
  }
  Token expect(Token::Kind k, const char* what) {
    if (peek().kind != k)
      throw SyntaxError(std::string("expected ") + what, peek().offset);
    return tokens_[pos_++];
  }

  Formula implication() {
    Formula lhs = disjunction();
    if (peek().kind == Token::Arrow) {
      ++pos_;
      return implies(lhs, implication());
    }
    return lhs;
  }

  Formula disjunction() {
    Formula f = conjunction();
    while (peek().kind == Token::Bar) {
      ++pos_;
      f = disj(f, conjunction());
    }
    return f;
  }

  Formula conjunction() {
    Formula f = unary();
    while (peek().kind == Token::Amp) {
      ++pos_;
      f = Formula::conj(f, unary());
    }
    return f;
  }

  std::vector<std::string> var_list() {
    expect(Token::LParen, "'('");
    std::vector<std::string> vars;
    if (peek().kind != Token::RParen) {
      vars.push_back(expect(Token::Ident, "variable").text);
      while (peek().kind == Token::Comma) {
        ++pos_;
        vars.push_back(expect(Token::Ident, "variable").text);
      }
    }
    expect(Token::RParen, "')'");
    return vars;
  }

  Formula unary() {
    if (peek().kind == Token::Bang) {
      ++pos_;
      return Formula::neg(unary());
    }
    if (at_keyword("forall") || at_keyword("exists")) {
      bool universal = peek().text == "forall";
      ++pos_;
      std::string type = expect(Token::Ident, "edge type").text;
      auto vars = var_list();
      expect(Token::Dot, "'.'");
      Formula body = implication();
      return universal ? Formula::forall(type, vars, body)
                       : exists(type, vars, body);
    }
    if (at_keyword("no")) {
      ++pos_;
      Token type = expect(Token::Ident, "edge type");
      std::vector<std::string> vars;
      if (peek().kind == Token::LParen) {
        vars = var_list();
      } else {
        if (!gamma_)
          throw SyntaxError("'no " + type.text +
                                "' needs a type graph or an explicit "
                                "variable list",
                            type.offset);
        std::size_t n = gamma_->arity(type.text);
        for (std::size_t k = 1; k <= n; ++k)
          vars.push_back("_" + std::to_string(k));
      }
      return no_edges(type.text, vars);
    }
    if (at_keyword("top")) {
      ++pos_;
      return Formula::top();
    }
    if (at_keyword("bot")) {
      ++pos_;
      return bot();
    }
    if (peek().kind == Token::LParen) {
      ++pos_;
      Formula f = implication();
      expect(Token::RParen, "')'");
      return f;
    }
    std::string x = expect(Token::Ident, "formula").text;
    if (peek().kind == Token::Eq) {
      ++pos_;
      return Formula::eq(x, expect(Token::Ident, "variable").text);
    }
    if (peek().kind == Token::Neq) {
      ++pos_;
      return neq(x, expect(Token::Ident, "variable").text);
    }
    throw SyntaxError("expected '=' or '!=' after '" + x + "'", peek().offset);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const TypeGraph* gamma_;
};

// ----------------------------------------------------------------- printing

enum Prec { kImp = 0, kOr = 1, kAnd = 2, kUnary = 3 };

class Printer {
 public:
  std::string str() const { return os_.str(); }

  // `tail` is true when nothing follows the printed text in its context;
  // quantifier bodies extend to the right, so they need parentheses
  // otherwise.
  void print(const Formula& f, Prec ctx, bool tail) {
    if (auto* e = f.as<Formula::Eq>()) {
      os_ << e->lhs << " = " << e->rhs;
      return;
    }
    if (f.as<Formula::Top>()) {
      os_ << "top";
      return;
    }
    if (auto* q = f.as<Formula::Forall>()) {
      quantifier("forall", *q, q->body, tail);
      return;
    }
    if (auto* c = f.as<Formula::And>()) {
      bool paren = ctx > kAnd;
      open(paren);
      print(c->lhs, kAnd, false);
      os_ << " & ";
      print(c->rhs, kUnary, paren || tail);
      close(paren);
      return;
    }
    const Formula& body = f.as<Formula::Not>()->body;
    if (body.as<Formula::Top>()) {
      os_ << "bot";
      return;
    }
    if (auto* e = body.as<Formula::Eq>()) {
      os_ << e->lhs << " != " << e->rhs;
      return;
    }
    if (auto* c = body.as<Formula::And>()) {
      auto* l = c->lhs.as<Formula::Not>();
      auto* r = c->rhs.as<Formula::Not>();
      if (l && r) {
        if (auto* ll = l->body.as<Formula::Not>()) {
          bool paren = ctx > kImp;
          open(paren);
          print(ll->body, kOr, false);
          os_ << " -> ";
          print(r->body, kImp, paren || tail);
          close(paren);
        } else {
          bool paren = ctx > kOr;
          open(paren);
          print(l->body, kOr, false);
          os_ << " | ";
          print(r->body, kAnd, paren || tail);
          close(paren);
        }
        return;
      }
    }
    if (auto* q = body.as<Formula::Forall>()) {
      if (auto* inner = q->body.as<Formula::Not>()) {
        quantifier("exists", *q, inner->body, tail);
        return;
      }
    }
    os_ << "!";
    print(body, kUnary, tail);
  }

 private:
  void quantifier(const char* kw, const Formula::Forall& q, const Formula& body,
                  bool tail) {
    open(!tail);
    os_ << kw << ' ' << q.edge_type << '(';
    for (std::size_t k = 0; k < q.vars.size(); ++k)
      os_ << (k ? "," : "") << q.vars[k];
    os_ << "). ";
    print(body, kImp, true);
    close(!tail);
  }
  void open(bool p) {
    if (p) os_ << '(';
  }
  void close(bool p) {
    if (p) os_ << ')';
  }

  std::ostringstream os_;
};

}  // namespace

Formula parse_formula(std::string_view text, const TypeGraph* gamma) {
  return FormulaParser(text, gamma).parse();
}

std::string to_string(const Formula& f) {
  Printer p;
  p.print(f, kImp, true);
  return p.str();
}

}  // namespace adr
