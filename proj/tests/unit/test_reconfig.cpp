#include <doctest.h>

#include <random>

#include "../fixtures.hpp"
#include "adr/errors.hpp"
#include "random_systems.hpp"

using namespace adr;
using namespace fx;

namespace {

ReconfigRule cf() {
  return parse_rule(kCfRule, make_signature(booking_productions()));
}

}  // namespace

TEST_CASE("signature from productions") {
  auto sig = make_signature(booking_productions(), nullptr);
  REQUIRE(sig.ops.count("brF"));
  CHECK(sig.ops.at("brF").args == std::vector<std::string>{"Fl", "Fl"});
  CHECK(sig.ops.at("bookF").args == std::vector<std::string>{"Fl", "Client"});
  CHECK(sig.ops.at("addC").result == "Client");
}

TEST_CASE("rule parsing and validation") {
  auto sig = make_signature(booking_productions());
  ReconfigRule r = cf();
  CHECK(r.name == "cf");
  CHECK(r.same_sort);
  CHECK(r.lhs.sort == "Fl");
  CHECK(to_string(r) == "rule cf : brF(x, bookF(y, z)) -> brF(bookF(x, z), y)");
  CHECK(parse_rule(to_string(r), sig) == r);

  // Sorts are inferred from positions.
  auto vars = r.lhs.args[1].args;
  CHECK(vars[0].sort == "Fl");
  CHECK(vars[1].sort == "Client");

  CHECK_THROWS_AS(parse_rule("rule bad : brF(x, x) -> x", sig), IllFormedRule);
  CHECK_THROWS_AS(parse_rule("rule bad : brF(x, y) -> brF(x, w)", sig),
                  IllFormedRule);
  CHECK_THROWS_AS(parse_rule("rule bad : bookF(x, y) -> bookF(y, x)", sig),
                  IllFormedRule);
  CHECK_THROWS_AS(parse_rule("rule bad : nope(x) -> x", sig), IllFormedRule);
  CHECK_THROWS_AS(parse_rule("rule bad : brF(x) -> x", sig), IllFormedRule);
  CHECK_THROWS_AS(parse_rule("rule bad : brF(x, y) -> x where x:Client", sig),
                  IllFormedRule);
  CHECK_THROWS_AS(parse_rule("rule bad brF(x, y) -> x", sig), SyntaxError);

  auto collapse = parse_rule("brF(x, y) -> x", sig, "collapse");
  CHECK(collapse.same_sort);
  auto report = validate_rule(ReconfigRule{"r", parse_term("bookF(x, y)"),
                                           parse_term("y"), false},
                              sig);
  CHECK(report.ok());
  CHECK_FALSE(report.same_sort);
}

TEST_CASE("bow tie and variable subtrees on the addC scenario") {
  TrackedSystem s = booked_client_system();
  ReconfigRule r = cf();
  VertexId root = s.forest.roots[0];
  CHECK(bow_tie(r.lhs, s, root));
  CHECK(find_rule_matches(s, r) == std::vector<VertexId>{root});
  // The right-hand side shape does not match the recorded derivation.
  CHECK_FALSE(bow_tie(r.rhs, s, root));

  auto kids = s.forest.kids(root);
  VertexId tx = get_var_tree(r.lhs, s, root, "x");
  VertexId ty = get_var_tree(r.lhs, s, root, "y");
  VertexId tz = get_var_tree(r.lhs, s, root, "z");
  CHECK(tx == kids[0]);
  CHECK(s.forest.is_leaf(tx));
  CHECK(ty == s.forest.kids(kids[1])[0]);
  CHECK(s.forest.is_leaf(ty));
  CHECK(tz == s.forest.kids(kids[1])[1]);
  CHECK(s.env.env2.at(tz) == "addC");
  CHECK(s.forest.leaves(tz).size() == 2);
  CHECK_THROWS_AS(get_var_tree(r.lhs, s, root, "w"), std::invalid_argument);
}

TEST_CASE("term to graph builds the right-hand side design") {
  auto ps = booking_productions();
  ReconfigRule r = cf();
  IdAllocator ids(1000);
  auto g = term_to_graph(r.rhs, ps, ids);
  CHECK(g.graph.edges().size() == 3);  // one placeholder per variable
  CHECK(g.graph.nodes().size() == 4);
  CHECK(g.placeholders.size() == 3);
  CHECK(g.interface.size() == 2);
  CHECK(validate_graph(g.graph, booking_gamma()).ok());
  CHECK(g.tree.op == "brF");
  CHECK(g.tree.children[0].op == "bookF");
  CHECK(g.tree.children[1].var == "y");
}

TEST_CASE("cf on the single-client scenario") {
  auto ps = booking_productions();
  TrackedSystem s = booked_system();
  EdgeId c = leaf_edge(s, 2);
  EdgeId f1 = leaf_edge(s, 0);
  EdgeId f3 = leaf_edge(s, 1);
  REQUIRE(s.graph.edge(c).type == "Client");
  TrackedSystem t = apply_reconfiguration(s, cf(), s.forest.roots[0], ps);
  CHECK(isomorphic(t.graph, booked_reconfigured()));
  CHECK(t.graph.has_edge(c));
  CHECK(t.graph.has_edge(f1));
  CHECK(t.graph.has_edge(f3));
  CHECK(check_tracking(t).empty());
  CHECK(t.log.back().kind == Event::Kind::Reconfiguration);
  // The forest now has the shape of the right-hand side.
  auto rule = cf();
  CHECK(bow_tie(rule.rhs, t, t.forest.roots[0]));
  CHECK(validate_graph(t.graph, booking_gamma()).ok());
}

TEST_CASE("cf on the two-client scenario moves the whole client subgraph") {
  auto ps = booking_productions();
  TrackedSystem s = booked_client_system();
  EdgeId f1 = leaf_edge(s, 0), f3 = leaf_edge(s, 1);
  EdgeId c1 = leaf_edge(s, 2), c2 = leaf_edge(s, 3);
  TrackedSystem t = apply_reconfiguration(s, cf(), s.forest.roots[0], ps);
  CHECK(isomorphic(t.graph, booked_client_reconfigured()));
  for (EdgeId e : {f1, f3, c1, c2}) CHECK(t.graph.has_edge(e));
  CHECK(t.graph.edge(c1).att == t.graph.edge(c2).att);
  CHECK(t.graph.edge(c1).att[1] == t.graph.edge(f1).att[0]);
  CHECK(check_tracking(t).empty());
  CHECK(t.graph.nodes().size() == 4);
}

TEST_CASE("stale reconfiguration matches are refused") {
  auto ps = booking_productions();
  TrackedSystem s = two_requests_system();  // brF below brF: no bookF
  CHECK(find_rule_matches(s, cf()).empty());
  CHECK_THROWS_AS(apply_reconfiguration(s, cf(), s.forest.roots[0], ps),
                  StaleMatch);
  CHECK_THROWS_AS(apply_reconfiguration(s, cf(), VertexId(9999), ps), StaleMatch);
}

TEST_CASE("collapsing and nullary rules") {
  auto ps = booking_productions();
  auto sig = make_signature(ps);
  TrackedSystem s = two_requests_system();
  auto collapse = parse_rule("rule drop : brF(x, y) -> y", sig);
  VertexId root = s.forest.roots[0];
  VertexId inner = s.forest.kids(root)[1];
  TrackedSystem t = apply_reconfiguration(s, collapse, root, ps);
  CHECK(t.forest.roots.size() == 1);
  CHECK(t.forest.roots[0] == inner);
  CHECK(t.graph.edges().size() == 2);
  CHECK(check_tracking(t).empty());
}

TEST_CASE("property: same-sort rules keep systems derivable") {
  std::mt19937 rng(12);
  auto ps = booking_productions();
  auto sig = make_signature(ps);
  std::vector<ReconfigRule> rules{
      parse_rule(kCfRule, sig),
      parse_rule("rule swap : brF(x, y) -> brF(y, x)", sig),
      parse_rule("rule flat : brF(x, brF(y, z)) -> brF(brF(x, y), z)", sig),
      parse_rule("rule drop : brF(x, y) -> y", sig),
  };
  int applied = 0;
  for (int round = 0; round < 300; ++round) {
    TrackedSystem s = rnd::derive(rng, booking_g0(), ps, 2 + round % 6);
    for (int k = 0; k < 3; ++k) {
      std::vector<std::pair<const ReconfigRule*, VertexId>> options;
      for (const auto& r : rules)
        for (VertexId v : find_rule_matches(s, r)) options.emplace_back(&r, v);
      if (options.empty()) break;
      auto [r, v] = options[rng() % options.size()];
      auto edges_before = s.graph.edges().size();
      std::size_t dropped = 0;
      if (r->name == "drop")
        dropped = s.forest.leaves(get_var_tree(r->lhs, s, v, "x")).size();
      s = apply_reconfiguration(s, *r, v, ps);
      ++applied;
      auto problems = check_tracking(s);
      CHECK_MESSAGE(problems.empty(), (problems.empty() ? "" : problems.front()));
      CHECK(validate_graph(s.graph, booking_gamma()).ok());
      if (r->name != "drop") CHECK(s.graph.edges().size() == edges_before);
      else CHECK(s.graph.edges().size() == edges_before - dropped);
    }
    // Parsing folds everything back to a single edge of the initial type.
    for (int guard = 0; guard < 100; ++guard) {
      auto two = two_tier_vertices(s);
      if (two.empty()) break;
      parse_tracked_in_place(s, two.front(), ps);
    }
    REQUIRE(s.graph.edges().size() == 1);
    CHECK(s.graph.edges()[0].type == "Fl");
  }
  CHECK(applied > 100);
}
