#include <doctest.h>

#include <algorithm>
#include <random>

#include "../fixtures.hpp"
#include "adr/errors.hpp"
#include "random_systems.hpp"

using namespace adr;
using namespace fx;

namespace {

std::vector<std::string> labels(const TrackedSystem& s) {
  std::vector<std::string> out;
  for (VertexId v : s.forest.preorder()) out.push_back(vertex_label(s, v));
  return out;
}

// Fresh nodes are named u3, u4, ... in order of creation.
void name_fresh_nodes(TrackedSystem& s) {
  auto nodes = s.graph.nodes();
  int next = 1 + static_cast<int>(std::count_if(
                     nodes.begin(), nodes.end(),
                     [](const Node& n) { return !n.name.empty(); }));
  for (auto& n : nodes)
    if (n.name.empty()) n.name = "u" + std::to_string(next++);
  s.graph = Graph::from_parts(nodes, s.graph.edges());
}

}  // namespace

TEST_CASE("tracking the two browseFlights steps") {
  auto ps = booking_productions();
  TrackedSystem s = init_tracking(booking_g0());
  CHECK(labels(s) == std::vector<std::string>{"[f(u1,u2), ^]"});

  step(s, ps, "brF", EdgeId(3));
  name_fresh_nodes(s);
  // Name edges as in the reference tables.
  auto name_edges = [&](std::vector<std::string> names) {
    auto leaves = s.edge_leaves();
    for (std::size_t k = 0; k < names.size(); ++k) {
      auto& rec = s.env.env1.at(leaves[k]);
      if (rec.name.empty()) rec.name = names[k];
    }
  };
  name_edges({"f1", "f2"});
  CHECK(labels(s) == std::vector<std::string>{"[f(u1,u2), brF]", "[f1(u3,u2), ^]",
                                              "[f2(u1,u2), ^]"});
  CHECK(s.forest.roots.size() == 1);
  CHECK(s.forest.kids(s.forest.roots[0]).size() == 2);

  step(s, ps, "brF", leaf_edge(s, 1));
  name_fresh_nodes(s);
  name_edges({"f1", "f3", "f4"});
  CHECK(labels(s) == std::vector<std::string>{
                         "[f(u1,u2), brF]", "[f1(u3,u2), ^]", "[f2(u1,u2), brF]",
                         "[f3(u4,u2), ^]", "[f4(u1,u2), ^]"});
  CHECK(check_tracking(s).empty());
  CHECK(current_graph(s) == s.graph);
  CHECK(s.log.size() == 2);
}

TEST_CASE("tracking keeps tombstones for empty right-hand sides") {
  Graph l, r;
  node(l, 1, kDot);
  node(l, 2, kDot);
  edge(l, 3, "Client", {1, 2}, true);
  node(r, 11, kDot);
  node(r, 12, kDot);
  ProductionSet ps;
  ps.emplace("drop", make_production("drop", l, r, {{N(1), N(11)}, {N(2), N(12)}}));
  Graph g;
  node(g, 1, kDot);
  node(g, 2, kDot);
  edge(g, 3, "Client", {1, 2}, true);
  edge(g, 4, "Fl", {1, 2}, true);
  TrackedSystem s = init_tracking(g);
  step(s, ps, "drop", EdgeId(3));
  CHECK(s.graph.edges().size() == 1);
  VertexId root = s.forest.roots[0];
  REQUIRE(s.forest.kids(root).size() == 1);
  CHECK(s.is_tombstone(s.forest.kids(root)[0]));
  CHECK(check_tracking(s).empty());
  CHECK(vertex_label(s, s.forest.kids(root)[0]) == "[^, ^]");
}

TEST_CASE("tracking detects disagreement with the graph") {
  TrackedSystem s = two_requests_system();
  s.graph.set_attachment(leaf_edge(s, 0), {NodeId(1), NodeId(1)});
  CHECK_FALSE(check_tracking(s).empty());
  CHECK_THROWS_AS(current_graph(s), IntegrityError);
}

TEST_CASE("exports") {
  TrackedSystem s = two_requests_system();
  auto text = forest_to_text(s);
  CHECK(text.find("  [") != std::string::npos);
  auto dot = forest_to_dot(s);
  CHECK(dot.rfind("digraph forest", 0) == 0);
  auto gdot = graph_to_dot(s.graph);
  CHECK(gdot.find("peripheries=2") != std::string::npos);
  CHECK(gdot.find("dir=forward") != std::string::npos);
}

TEST_CASE("property: leaves and edges stay in bijection") {
  std::mt19937 rng(14);
  auto ps = booking_productions();
  for (int round = 0; round < 1000; ++round) {
    TrackedSystem s = rnd::derive(rng, booking_g0(), ps, 1 + round % 8);
    auto problems = check_tracking(s);
    CHECK_MESSAGE(problems.empty(), (problems.empty() ? "" : problems.front()));
    CHECK(s.edge_leaves().size() == s.graph.edges().size());
    CHECK(current_graph(s) == s.graph);
    // Replaying the log reproduces the system.
    TrackedSystem r = init_tracking(s.initial, s.seed);
    for (const auto& ev : s.log)
      step(r, ps, ev.name, ev.edge);
    CHECK(r == s);
  }
}
