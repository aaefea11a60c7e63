#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adr/formula.hpp"
#include "adr/graph.hpp"
#include "adr/production.hpp"

namespace adr {

struct WpResult {
  Formula pre = Formula::top();
  /// Assignment of the precondition's generated variables to L's nodes.
  /// Free variables of the postcondition that were not sent into R are
  /// passed through unchanged and do not appear here.
  Assignment h;
  std::vector<std::string> notes;
};

/// A precondition for `p` guaranteeing `post` (under `post_h`, which maps
/// into R's nodes) after every application whose match satisfies it. The
/// result is sound both when evaluated on the graph being rewritten and on
/// that graph with the matched edge removed. Throws UnknownEdgeType when
/// `gamma` is given and `post` quantifies over an undeclared type.
WpResult weakest_precondition(const Production& p, const Formula& post,
                              const Assignment& post_h = {},
                              const TypeGraph* gamma = nullptr);

/// <wp(p, post), h> p <post, post_h>.
AssertedProduction asserted_from_wp(const Production& p, const Formula& post,
                                    const Assignment& post_h = {},
                                    const TypeGraph* gamma = nullptr);

// ------------------------------------------------------ bounded enumeration

/// Edge-count cap for every enumeration below: ADR_ISO_BOUND when set,
/// otherwise 4.
std::size_t oracle_edge_cap();

/// Signatures used when enumerating graphs: edge type -> node types of its
/// tentacles.
using SignatureMap = std::map<std::string, std::vector<std::string>>;

/// Signatures for `types`, taken from `gamma` when given. Without a type
/// graph, arities are read off the quantifiers of `formulas` and every node
/// gets the single type "*".
SignatureMap signatures_for(const std::set<std::string>& types,
                            const std::vector<Formula>& formulas,
                            const TypeGraph* gamma);

/// Calls `visit` once for every graph with at most `max_edges` edges over
/// `sig` (all edges replaceable, no isolated nodes), up to isomorphism
/// possibly with repetitions. Stops early when `visit` returns false.
/// Throws OracleBoundError when `max_edges` exceeds oracle_edge_cap().
std::size_t enumerate_graphs(const SignatureMap& sig, std::size_t max_edges,
                             const std::function<bool(const Graph&)>& visit);

struct Counterexample {
  Graph graph;
  Match match;
  Assignment pre_h;
  Graph result;
  std::string scope;  // "graph" or "residual"
  std::string reason;
};

struct OracleReport {
  std::size_t graphs = 0;
  std::size_t applications = 0;
  std::vector<Counterexample> counterexamples;
  bool ok() const { return counterexamples.empty(); }
};

/// Exhaustive check of <pre> p <post> over all graphs with at most `bound`
/// edges, every match and every value of precondition variables not fixed
/// by pre_h. The precondition is evaluated both on G and on G minus the
/// matched edge. Stops after `max_counterexamples` findings.
OracleReport check_validity_oracle(const AssertedProduction& a,
                                   std::size_t bound,
                                   const TypeGraph* gamma = nullptr,
                                   std::size_t max_counterexamples = 1);

struct EquivalenceReport {
  bool equivalent = true;
  std::size_t graphs = 0;
  std::optional<Graph> graph;  // distinguishing graph, if any
  Assignment assignment;
};

/// Bounded semantic equivalence: same truth value on every graph with at
/// most `bound` edges, for every assignment of the union of free variables
/// (to existing nodes or to fresh isolated ones).
EquivalenceReport semantic_equivalence(const Formula& a, const Formula& b,
                                       std::size_t bound,
                                       const TypeGraph* gamma = nullptr);

struct WeaknessReport {
  std::size_t instances = 0;  // graph/match/assignment triples examined
  std::size_t witnesses = 0;  // pre false yet the application satisfies post
  std::optional<Counterexample> example;
};

/// Instances where the precondition (on G) rejects a match although the
/// application satisfies the postcondition. Informational only.
WeaknessReport measure_weakness(const AssertedProduction& a, std::size_t bound,
                                const TypeGraph* gamma = nullptr);

}  // namespace adr
