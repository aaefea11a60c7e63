#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adr/formula.hpp"
#include "adr/graph.hpp"
#include "adr/production.hpp"
#include "adr/reconfig.hpp"
#include "adr/tracking.hpp"
#include "adr/wp.hpp"

namespace adr {

// ------------------------------------------------------------------ parsing

/// A forest vertex carrying a production whose children are all leaves.
bool is_two_tier(const TrackedSystem& s, VertexId v);
/// Two-tier vertices in preorder, optionally restricted to one subtree.
std::vector<VertexId> two_tier_vertices(const TrackedSystem& s,
                                        std::optional<VertexId> within = {});

struct ParseResult {
  Graph graph;
  EdgeId edge;  // the folded L edge
  std::vector<NodeId> att;
};

/// Folds the children of `v` back into one edge of the production's
/// left-hand side. The folded edges must be replaceable; with `strict`,
/// every edge of `g` must be. Throws ParseRefused.
ParseResult parse_step(const Graph& g, VertexId v, const TrackedSystem& s,
                       const ProductionSet& productions, IdAllocator& ids,
                       bool strict = false);

/// parse_step on the system's own graph; `v` becomes a leaf recording the
/// new edge and a parse event is logged.
void parse_tracked_in_place(TrackedSystem& s, VertexId v,
                            const ProductionSet& productions,
                            bool strict = false);
TrackedSystem parse_tracked(const TrackedSystem& s, VertexId v,
                            const ProductionSet& productions,
                            bool strict = false);

/// Replays one logged event. Throws whatever the operation throws, or
/// WorkspaceError for unknown names.
void apply_event(TrackedSystem& s, const Event& ev,
                 const ProductionSet& productions,
                 const std::map<std::string, ReconfigRule>& rules);

/// Rebuilds a system from its initial graph and event log. Throws whatever
/// the replayed operation throws, or WorkspaceError for unknown names.
TrackedSystem replay_system(const Graph& initial, std::uint64_t seed,
                            const std::vector<Event>& log,
                            const ProductionSet& productions,
                            const std::map<std::string, ReconfigRule>& rules);

// ----------------------------------------------------------------- sessions

enum class SessionState {
  Idle,
  Violated,
  AwaitingProductionChoice,
  AwaitingIterateOrParse,
  AwaitingSubtreeChoice,
  Recovered,
  Abandoned,
};

std::string to_string(SessionState s);

struct Candidate {
  std::string production;
  Match match;
  Formula condition = Formula::top();  // wp against the working condition
  Assignment assignment;               // its free variables, in the graph
};

struct Decision {
  enum class Kind { Propose, AcceptProduction, Iterate, RequestParse, Parse, Abandon };
  Kind kind = Kind::Propose;
  std::string production;  // AcceptProduction, Iterate
  EdgeId edge;             // AcceptProduction, Iterate
  VertexId vertex;         // Parse

  bool operator==(const Decision&) const = default;
};

std::string to_string(Decision::Kind k);
Decision::Kind decision_kind_from_string(const std::string& s);
std::string to_string(const Decision& d);

/// One recovery run over a copy of a tracked system. All state changes go
/// through propose() and decide(); `log` replays the run.
struct RecoverySession {
  SessionState state = SessionState::Idle;
  TrackedSystem system;
  Formula invariant = Formula::top();

  Graph working_graph;
  Formula working_condition = Formula::top();
  Assignment working_assignment;
  std::vector<Match> iterated_matches;
  std::vector<std::string> iterated_productions;

  /// Root of the subtree the last reconfiguration produced; empty means
  /// the whole forest.
  std::optional<VertexId> marked;
  std::vector<Candidate> candidates;
  std::vector<Decision> log;
  std::optional<Witness> violation;
  bool strict_parse = false;

  /// wp per (production, working condition).
  std::map<std::pair<std::string, std::string>, WpResult> wp_cache;
};

/// Checks the invariant on the current graph and marks the subtree of the
/// most recent reconfiguration.
RecoverySession start_recovery(const TrackedSystem& s, const Formula& invariant);

/// Lists production/match pairs whose residual graph satisfies the wp of
/// the working condition. Throws StaleDecision outside Violated,
/// AwaitingIterateOrParse and AwaitingProductionChoice.
void propose(RecoverySession& r, const ProductionSet& productions);

/// Applies one designer decision. Throws StaleDecision when the state does
/// not accept it, and ParseRefused / StaleMatch for unusable arguments
/// (the session is left unchanged).
void decide(RecoverySession& r, const Decision& d,
            const ProductionSet& productions);

/// Accepts the first candidate, iterating or parsing when there is none;
/// abandons after `max_steps` decisions without recovery.
void auto_recover(RecoverySession& r, const ProductionSet& productions,
                  std::size_t max_steps = 32);

/// start_recovery followed by the logged steps.
RecoverySession replay_session(const TrackedSystem& s, const Formula& invariant,
                               const std::vector<Decision>& log,
                               const ProductionSet& productions);

}  // namespace adr
