#include <doctest.h>

#include <random>

#include "../fixtures.hpp"
#include "adr/errors.hpp"
#include "random_systems.hpp"

using namespace adr;
using namespace fx;

TEST_CASE("parsing the second browseFlights step") {
  auto ps = booking_productions();
  TrackedSystem s2 = two_requests_system();
  TrackedSystem s1 = init_tracking(booking_g0());
  step(s1, ps, "brF", EdgeId(3));

  VertexId x2 = s2.forest.kids(s2.forest.roots[0])[1];
  CHECK(is_two_tier(s2, x2));
  CHECK_FALSE(is_two_tier(s2, s2.forest.roots[0]));
  TrackedSystem p = parse_tracked(s2, x2, ps);
  CHECK(isomorphic(p.graph, s1.graph));
  CHECK(check_tracking(p).empty());

  // Round trip: re-applying the production at the folded edge.
  EdgeId folded = p.env.env1.at(x2).edge;
  Graph again = apply_production(p.graph, ps.at("brF"),
                                 match_at(p.graph, ps.at("brF"), folded))
                    .graph;
  CHECK(isomorphic(again, s2.graph));

  TrackedSystem p0 = parse_tracked(p, p.forest.roots[0], ps);
  CHECK(isomorphic(p0.graph, booking_g0()));
  CHECK(p0.forest.is_leaf(p0.forest.roots[0]));
}

TEST_CASE("parsing refuses non-replaceable children") {
  auto ps = booking_productions();
  TrackedSystem s = two_requests_system();
  VertexId x2 = s.forest.kids(s.forest.roots[0])[1];
  EdgeId f3 = s.env.env1.at(s.forest.kids(x2)[0]).edge;
  s.graph.set_theta(f3, false);
  CHECK_THROWS_AS(parse_tracked(s, x2, ps), ParseRefused);
  CHECK_THROWS_AS(parse_tracked(s, s.forest.roots[0], ps), ParseRefused);
  // Strict mode also refuses when some other edge is fixed.
  TrackedSystem t = two_requests_system();
  t.graph.set_theta(leaf_edge(t, 0), false);
  CHECK_NOTHROW(parse_tracked(t, x2, ps));
  CHECK_THROWS_AS(parse_tracked(t, x2, ps, true), ParseRefused);
}

TEST_CASE("property: parsing inverts every recorded production") {
  std::mt19937 rng(16);
  auto ps = booking_productions();
  for (int round = 0; round < 200; ++round) {
    TrackedSystem s = rnd::derive(rng, booking_g0(), ps, 1 + round % 7);
    std::size_t productions = s.log.size();
    std::size_t steps = 0;
    while (true) {
      auto two = two_tier_vertices(s);
      if (two.empty()) break;
      VertexId v = two[rng() % two.size()];
      const Production& p = ps.at(s.env.env2.at(v));
      Graph before = s.graph;
      parse_tracked_in_place(s, v, ps);
      ++steps;
      EdgeId e = s.env.env1.at(v).edge;
      Graph again = apply_production(s.graph, p, match_at(s.graph, p, e)).graph;
      CHECK(isomorphic(again, before));
      CHECK(check_tracking(s).empty());
    }
    CHECK(steps <= productions);
    CHECK(isomorphic(s.graph, booking_g0()));
  }
}

TEST_CASE("recovery of the failed server") {
  auto ps = server_productions();
  Formula inv = servers_invariant();

  SUBCASE("the healthy configuration is recovered immediately") {
    auto r = start_recovery(init_tracking(servers_g0()), inv);
    CHECK(r.state == SessionState::Recovered);
  }
  SUBCASE("top is always recovered") {
    auto r = start_recovery(servers_failed(), Formula::top());
    CHECK(r.state == SessionState::Recovered);
  }
  SUBCASE("accepting goodServer") {
    auto r = start_recovery(servers_failed(), inv);
    CHECK(r.state == SessionState::Violated);
    REQUIRE(r.violation);
    propose(r, ps);
    CHECK(r.state == SessionState::AwaitingProductionChoice);
    REQUIRE(r.candidates.size() == 1);
    CHECK(r.candidates[0].production == "goodServer");
    EdgeId f = r.candidates[0].match.edge;
    CHECK(r.system.graph.edge(f).type == "F");
    decide(r, {Decision::Kind::AcceptProduction, "goodServer", f, {}}, ps);
    CHECK(r.state == SessionState::Recovered);
    CHECK(satisfies(r.system.graph, inv));
    CHECK(check_tracking(r.system).empty());
    CHECK_THROWS_AS(decide(r, {Decision::Kind::Abandon, "", {}, {}}, ps),
                    StaleDecision);
  }
  SUBCASE("auto mode") {
    auto r = start_recovery(servers_failed(), inv);
    auto_recover(r, ps);
    CHECK(r.state == SessionState::Recovered);
    CHECK(satisfies(r.system.graph, inv));
  }
  SUBCASE("no productions") {
    auto r = start_recovery(servers_failed(), inv);
    propose(r, {});
    CHECK(r.state == SessionState::AwaitingIterateOrParse);
    CHECK(r.candidates.empty());
  }
  SUBCASE("working condition top admits every match") {
    auto r = start_recovery(servers_failed(), inv);
    r.working_condition = Formula::top();
    propose(r, ps);
    CHECK(r.candidates.size() == 1);  // the only match in the graph
  }
  SUBCASE("abandon") {
    auto r = start_recovery(servers_failed(), inv);
    propose(r, ps);
    decide(r, {Decision::Kind::Abandon, "", {}, {}}, ps);
    CHECK(r.state == SessionState::Abandoned);
  }
  SUBCASE("wrong-state decisions") {
    auto r = start_recovery(servers_failed(), inv);
    CHECK_THROWS_AS(
        decide(r, {Decision::Kind::AcceptProduction, "goodServer", EdgeId(1), {}}, ps),
        StaleDecision);
    propose(r, ps);
    CHECK_THROWS_AS(
        decide(r, {Decision::Kind::AcceptProduction, "badServer", EdgeId(1), {}}, ps),
        StaleDecision);
  }
  SUBCASE("parse undoes the failure") {
    auto r = start_recovery(servers_failed(), inv);
    propose(r, ps);
    decide(r, {Decision::Kind::RequestParse, "", {}, {}}, ps);
    CHECK(r.state == SessionState::AwaitingSubtreeChoice);
    decide(r, {Decision::Kind::Parse, "", {}, r.system.forest.roots[0]}, ps);
    CHECK(r.state == SessionState::Recovered);
    CHECK(satisfies(r.system.graph, inv));
  }
}

TEST_CASE("two failed servers need an iteration") {
  auto ps = server_productions();
  Formula inv = servers_invariant();
  auto r = start_recovery(servers_two_failed(), inv);
  REQUIRE(r.state == SessionState::Violated);
  propose(r, ps);
  CHECK(r.state == SessionState::AwaitingIterateOrParse);
  CHECK(r.candidates.empty());

  auto fs = find_matches(r.working_graph, ps.at("goodServer"));
  REQUIRE(fs.size() == 2);
  decide(r, {Decision::Kind::Iterate, "goodServer", fs[1].edge, {}}, ps);
  REQUIRE(r.state == SessionState::AwaitingProductionChoice);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].match.edge == fs[0].edge);

  // The iterated condition is sound: checked by the wp oracle.
  auto gamma = servers_gamma();
  auto a1 = asserted_from_wp(ps.at("goodServer"), inv, {}, &gamma);
  CHECK(check_validity_oracle(a1, 3, &gamma).ok());

  RecoverySession copy = r;
  decide(r, {Decision::Kind::AcceptProduction, "goodServer", fs[0].edge, {}}, ps);
  CHECK(r.state == SessionState::Recovered);
  CHECK(satisfies(r.system.graph, inv));

  // Replaying the decision log reproduces the outcome.
  auto again = replay_session(servers_two_failed(), inv, r.log, ps);
  CHECK(again.state == r.state);
  CHECK(again.system == r.system);

  // Auto mode finds the same repair.
  auto a = start_recovery(servers_two_failed(), inv);
  auto_recover(a, ps);
  CHECK(a.state == SessionState::Recovered);
}

TEST_CASE("replaying a mixed event log") {
  auto ps = booking_productions();
  std::map<std::string, ReconfigRule> rules{
      {"cf", parse_rule(kCfRule, make_signature(ps))}};
  TrackedSystem s = booked_client_system();
  apply_reconfiguration_in_place(s, rules.at("cf"), s.forest.roots[0], ps);
  auto two = two_tier_vertices(s);
  REQUIRE(!two.empty());
  parse_tracked_in_place(s, two.front(), ps);
  TrackedSystem r = replay_system(s.initial, s.seed, s.log, ps, rules);
  CHECK(r == s);
}
