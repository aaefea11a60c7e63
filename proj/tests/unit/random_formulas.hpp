#pragma once
// Random formulas and graphs over a small vocabulary, for property tests.

#include <random>
#include <string>
#include <vector>

#include "adr/formula.hpp"
#include "adr/graph.hpp"

namespace rnd {

using namespace adr;

/// Edge types D (binary) and U (unary) over one node type "*".
inline Graph graph(std::mt19937& rng, int max_nodes = 4, int max_edges = 4) {
  Graph g;
  int n = 1 + static_cast<int>(rng() % max_nodes);
  for (int k = 1; k <= n; ++k) g.add_node({NodeId(k), "*", ""});
  int m = static_cast<int>(rng() % (max_edges + 1));
  for (int k = 0; k < m; ++k) {
    bool binary = rng() % 2;
    Edge e{EdgeId(100 + k), binary ? "D" : "U", {}, true, ""};
    for (int t = 0; t < (binary ? 2 : 1); ++t)
      e.att.push_back(NodeId(1 + rng() % n));
    g.add_edge(std::move(e));
  }
  return g;
}

/// A formula whose free variables lie in `free`.
inline Formula formula(std::mt19937& rng, std::vector<std::string> scope,
                       int depth, int& fresh) {
  int pick = static_cast<int>(rng() % (depth <= 0 ? 2 : 6));
  auto var = [&] { return scope[rng() % scope.size()]; };
  switch (pick) {
    case 0:
      if (scope.empty()) return Formula::top();
      return Formula::eq(var(), var());
    case 1:
      return rng() % 2 ? Formula::top() : bot();
    case 2:
      return Formula::neg(formula(rng, scope, depth - 1, fresh));
    case 3:
      return Formula::conj(formula(rng, scope, depth - 1, fresh),
                           formula(rng, scope, depth - 1, fresh));
    case 4:
      return disj(formula(rng, scope, depth - 1, fresh),
                  formula(rng, scope, depth - 1, fresh));
    default: {
      bool binary = rng() % 2;
      std::vector<std::string> vars;
      for (int t = 0; t < (binary ? 2 : 1); ++t)
        vars.push_back("v" + std::to_string(fresh++));
      auto inner = scope;
      inner.insert(inner.end(), vars.begin(), vars.end());
      Formula body = formula(rng, inner, depth - 1, fresh);
      return rng() % 2 ? Formula::forall(binary ? "D" : "U", vars, body)
                       : exists(binary ? "D" : "U", vars, body);
    }
  }
}

}  // namespace rnd
