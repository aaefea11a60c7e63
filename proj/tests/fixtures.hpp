#pragma once
// Shared scenario fixtures for unit and acceptance tests.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adr/formula.hpp"
#include "adr/graph.hpp"
#include "adr/production.hpp"
#include "adr/reconfig.hpp"
#include "adr/recovery.hpp"
#include "adr/tracking.hpp"

namespace fx {

using namespace adr;

inline const std::string kDot = "\xE2\x80\xA2";     // filled node type
inline const std::string kCircle = "\xE2\x88\x98";  // hollow node type

inline NodeId N(std::uint64_t v) { return NodeId(v); }
inline EdgeId E(std::uint64_t v) { return EdgeId(v); }

inline void node(Graph& g, std::uint64_t id, const std::string& type,
                 const std::string& name = "") {
  g.add_node({N(id), type, name});
}

inline void edge(Graph& g, std::uint64_t id, const std::string& type,
                 std::vector<std::uint64_t> att, bool theta,
                 const std::string& name = "") {
  Edge e{E(id), type, {}, theta, name};
  for (auto a : att) e.att.push_back(N(a));
  g.add_edge(std::move(e));
}

// ------------------------------------------------------- flights vocabulary

inline TypeGraph flights_gamma() {
  TypeGraph t;
  t.add_node_type(kDot);
  t.add_node_type(kCircle);
  t.add_edge_type("C", {kDot});
  t.add_edge_type("B", {kDot, kCircle});
  for (const char* e : {"FF", "Fls", "Fl", "BF", "P", "PF"})
    t.add_edge_type(e, {kDot, kDot});
  return t;
}

/// ff:FF(u2,u1), fl1:Fls(u3,u2), fl2:Fls(u4,u2); ff is not replaceable.
inline Graph flights_graph() {
  Graph g;
  node(g, 1, kDot, "u1");
  node(g, 2, kDot, "u2");
  node(g, 3, kDot, "u3");
  node(g, 4, kDot, "u4");
  edge(g, 11, "FF", {2, 1}, false, "ff");
  edge(g, 12, "Fls", {3, 2}, true, "fl1");
  edge(g, 13, "Fls", {4, 2}, true, "fl2");
  return g;
}

/// fs:Fls(a,b) -> fls:Fl(u,u2), pa:P(u1,u) with a -> u1, b -> u2.
inline Production book_flight() {
  Graph l, r;
  node(l, 1, kDot, "a");
  node(l, 2, kDot, "b");
  edge(l, 3, "Fls", {1, 2}, true, "fs");
  node(r, 11, kDot, "u1");
  node(r, 12, kDot, "u2");
  node(r, 13, kDot, "u");
  edge(r, 14, "Fl", {13, 12}, true, "fls");
  edge(r, 15, "P", {11, 13}, true, "pa");
  return make_production("bookFlight", l, r, {{N(1), N(11)}, {N(2), N(12)}},
                         {E(14), E(15)});
}

/// ff:FF(u1,u) fixed, fls:Fls(u1,u1) replaceable.
inline Graph booking_graph() {
  Graph g;
  node(g, 1, kDot, "u1");
  node(g, 2, kDot, "u");
  edge(g, 10, "FF", {1, 2}, false, "ff");
  edge(g, 11, "Fls", {1, 1}, true, "fls");
  return g;
}

/// Expected result of bookFlight on booking_graph: ff(u1,u), f(n,u1), p(u1,n).
inline Graph booking_result() {
  Graph g;
  node(g, 1, kDot);
  node(g, 2, kDot);
  node(g, 3, kDot);
  edge(g, 10, "FF", {1, 2}, false);
  edge(g, 11, "Fl", {3, 1}, true);
  edge(g, 12, "P", {1, 3}, true);
  return g;
}

/// ff:FF(u1,u), fls:Fls(u3,u1).
inline Graph rebooking_graph() {
  Graph g;
  node(g, 1, kDot, "u1");
  node(g, 2, kDot, "u");
  node(g, 3, kDot, "u3");
  edge(g, 10, "FF", {1, 2}, false, "ff");
  edge(g, 11, "Fls", {3, 1}, true, "fls");
  return g;
}

/// ff(u1,u), f(n,u1), p(u3,n).
inline Graph rebooking_result() {
  Graph g;
  node(g, 1, kDot);
  node(g, 2, kDot);
  node(g, 3, kDot);
  node(g, 4, kDot);
  edge(g, 10, "FF", {1, 2}, false);
  edge(g, 11, "Fl", {4, 1}, true);
  edge(g, 12, "P", {3, 4}, true);
  return g;
}

/// forall Fls(x,y). x != y
inline Formula distinct_pre() { return parse_formula("forall Fls(x,y). x != y"); }

// ---------------------------------------------------------------- logic

inline TypeGraph cover_gamma() {
  TypeGraph t;
  t.add_node_type(kDot);
  t.add_edge_type("D", {kDot, kDot});
  t.add_edge_type("Dp", {kDot});
  return t;
}

inline Formula cover_formula() {
  return parse_formula("forall D(x,y). exists Dp(z). x = z");
}

/// d1:D(u1,u2), d2:D(u1,u4), d':Dp(u1).
inline Graph cover_valid() {
  Graph g;
  node(g, 1, kDot, "u1");
  node(g, 2, kDot, "u2");
  node(g, 4, kDot, "u4");
  edge(g, 11, "D", {1, 2}, false, "d1");
  edge(g, 12, "D", {1, 4}, false, "d2");
  edge(g, 13, "Dp", {1}, false, "d'");
  return g;
}

/// d1:D(u1,u2), d2:D(u3,u4), d':Dp(u1).
inline Graph cover_invalid() {
  Graph g;
  node(g, 1, kDot, "u1");
  node(g, 2, kDot, "u2");
  node(g, 3, kDot, "u3");
  node(g, 4, kDot, "u4");
  edge(g, 11, "D", {1, 2}, false, "d1");
  edge(g, 12, "D", {3, 4}, false, "d2");
  edge(g, 13, "Dp", {1}, false, "d'");
  return g;
}

// ------------------------------------------------------------------- wp

inline TypeGraph pay_gamma() {
  TypeGraph t;
  t.add_node_type(kDot);
  t.add_node_type(kCircle);
  t.add_edge_type("P", {kDot});
  t.add_edge_type("B", {kDot, kCircle});
  t.add_edge_type("C", {kDot});
  return t;
}

/// P(v) -> b:B(u1,u) with v -> u1 and u internal.
inline Production pay() {
  Graph l, r;
  node(l, 1, kDot, "v");
  edge(l, 2, "P", {1}, true);
  node(r, 11, kDot, "u1");
  node(r, 12, kCircle, "u");
  edge(r, 13, "B", {11, 12}, false, "b");
  return make_production("pay", l, r, {{N(1), N(11)}});
}

inline Formula pay_post() {
  return parse_formula("forall B(x,y). forall C(z). y = z");
}

/// The reference precondition for pay and pay_post, three conjuncts.
inline Formula pay_reference(const TypeGraph& g) {
  return parse_formula(
      "(no C) & (forall B(x,y). forall C(z). no C) & "
      "(forall B(x,y). forall C(z). y = z)",
      &g);
}

// ------------------------------------------- flights with clients (tracking)

inline TypeGraph booking_gamma() {
  TypeGraph t;
  t.add_node_type(kDot);
  t.add_edge_type("Fl", {kDot, kDot});
  t.add_edge_type("Client", {kDot, kDot});
  return t;
}

/// Fl(a,b) -> f1:Fl(x3,x2), f2:Fl(x1,x2); a -> x1, b -> x2.
inline Production browse_flights() {
  Graph l, r;
  node(l, 1, kDot, "a");
  node(l, 2, kDot, "b");
  edge(l, 3, "Fl", {1, 2}, true);
  node(r, 11, kDot, "x1");
  node(r, 12, kDot, "x2");
  node(r, 13, kDot, "x3");
  edge(r, 14, "Fl", {13, 12}, true, "f1");
  edge(r, 15, "Fl", {11, 12}, true, "f2");
  return make_production("brF", l, r, {{N(1), N(11)}, {N(2), N(12)}},
                         {E(14), E(15)});
}

/// Fl(a,b) -> f:Fl(x,x2), c:Client(x1,x); a -> x1, b -> x2.
inline Production book_f() {
  Graph l, r;
  node(l, 1, kDot, "a");
  node(l, 2, kDot, "b");
  edge(l, 3, "Fl", {1, 2}, true);
  node(r, 11, kDot, "x1");
  node(r, 12, kDot, "x2");
  node(r, 13, kDot, "x");
  edge(r, 14, "Fl", {13, 12}, true, "f");
  edge(r, 15, "Client", {11, 13}, true, "c");
  return make_production("bookF", l, r, {{N(1), N(11)}, {N(2), N(12)}},
                         {E(14), E(15)});
}

/// Client(a,b) -> c1:Client(x1,x2), c2:Client(x1,x2).
inline Production add_c() {
  Graph l, r;
  node(l, 1, kDot, "a");
  node(l, 2, kDot, "b");
  edge(l, 3, "Client", {1, 2}, true);
  node(r, 11, kDot, "x1");
  node(r, 12, kDot, "x2");
  edge(r, 13, "Client", {11, 12}, true, "c1");
  edge(r, 14, "Client", {11, 12}, true, "c2");
  return make_production("addC", l, r, {{N(1), N(11)}, {N(2), N(12)}},
                         {E(13), E(14)});
}

inline ProductionSet booking_productions() {
  ProductionSet ps;
  for (auto p : {browse_flights(), book_f(), add_c()}) ps.emplace(p.name, p);
  return ps;
}

/// f:Fl(u1,u2).
inline Graph booking_g0() {
  Graph g;
  node(g, 1, kDot, "u1");
  node(g, 2, kDot, "u2");
  edge(g, 3, "Fl", {1, 2}, true, "f");
  return g;
}

inline const char* kCfRule =
    "rule cf : brF(x, bookF(y, z)) -> brF(bookF(x, z), y)";

/// Applies `name` at the edge recorded under `edge_name`, naming the new
/// edges in order.
inline void step(TrackedSystem& s, const ProductionSet& ps,
                 const std::string& name, EdgeId at) {
  const Production& p = ps.at(name);
  record_production_in_place(s, p, match_at(s.graph, p, at));
}

inline EdgeId edge_of(const TrackedSystem& s, VertexId v) {
  return s.env.env1.at(v).edge;
}

/// Leaf vertex k (preorder, 0-based) among the edge leaves.
inline EdgeId leaf_edge(const TrackedSystem& s, std::size_t k) {
  return s.env.env1.at(s.edge_leaves().at(k)).edge;
}

/// brF at f, then brF at f2.
inline TrackedSystem two_requests_system() {
  auto ps = booking_productions();
  TrackedSystem s = init_tracking(booking_g0());
  step(s, ps, "brF", E(3));
  step(s, ps, "brF", leaf_edge(s, 1));
  return s;
}

/// brF at f, then bookF at f2: f1(u3,u2), f3(x,u2), c(u1,x).
inline TrackedSystem booked_system() {
  auto ps = booking_productions();
  TrackedSystem s = init_tracking(booking_g0());
  step(s, ps, "brF", E(3));
  step(s, ps, "bookF", leaf_edge(s, 1));
  return s;
}

/// booked_system, then addC at c.
inline TrackedSystem booked_client_system() {
  auto ps = booking_productions();
  TrackedSystem s = booked_system();
  step(s, ps, "addC", leaf_edge(s, 2));
  return s;
}

/// Expected graph after cf on booked_system: f1(u3,u2), c(n,u3),
/// f3(u1,u2).
inline Graph booked_reconfigured() {
  Graph g;
  node(g, 1, kDot);
  node(g, 2, kDot);
  node(g, 3, kDot);
  node(g, 4, kDot);
  edge(g, 10, "Fl", {3, 2}, true);
  edge(g, 11, "Fl", {1, 2}, true);
  edge(g, 12, "Client", {4, 3}, true);
  return g;
}

/// Expected graph after cf on booked_client_system: f1(u3,u2), f3(u1,u2),
/// c1(u4,u3), c2(u4,u3).
inline Graph booked_client_reconfigured() {
  Graph g;
  node(g, 1, kDot);
  node(g, 2, kDot);
  node(g, 3, kDot);
  node(g, 4, kDot);
  edge(g, 10, "Fl", {3, 2}, true);
  edge(g, 11, "Fl", {1, 2}, true);
  edge(g, 12, "Client", {4, 3}, true);
  edge(g, 13, "Client", {4, 3}, true);
  return g;
}

// ------------------------------------------------------- servers / clients

inline TypeGraph servers_gamma() {
  TypeGraph t;
  t.add_node_type(kDot);
  t.add_edge_type("S", {kDot, kDot});
  t.add_edge_type("F", {kDot, kDot});
  t.add_edge_type("C", {kDot});
  return t;
}

inline Production rename_edge(const std::string& name, const std::string& from,
                              const std::string& to) {
  Graph l, r;
  node(l, 1, kDot, "a");
  node(l, 2, kDot, "b");
  edge(l, 3, from, {1, 2}, true);
  node(r, 11, kDot, "a");
  node(r, 12, kDot, "b");
  edge(r, 13, to, {11, 12}, true, to == "S" ? "s" : "f");
  return make_production(name, l, r, {{N(1), N(11)}, {N(2), N(12)}});
}

inline ProductionSet server_productions() {
  ProductionSet ps;
  ps.emplace("badServer", rename_edge("badServer", "S", "F"));
  ps.emplace("goodServer", rename_edge("goodServer", "F", "S"));
  return ps;
}

/// Every client is attached to the second tentacle of a working server.
inline Formula servers_invariant() {
  return parse_formula("forall C(x). exists S(y,z). x = z");
}

/// s:S(v,u) replaceable, c:C(u) fixed.
inline Graph servers_g0() {
  Graph g;
  node(g, 1, kDot, "v");
  node(g, 2, kDot, "u");
  edge(g, 3, "S", {1, 2}, true, "s");
  edge(g, 4, "C", {2}, false, "c");
  return g;
}

/// servers_g0 after badServer at s: the client hangs off a failed server.
inline TrackedSystem servers_failed() {
  auto ps = server_productions();
  TrackedSystem s = init_tracking(servers_g0());
  step(s, ps, "badServer", E(3));
  return s;
}

/// Two servers, two clients, both servers failed: no single repair
/// restores the invariant.
inline TrackedSystem servers_two_failed() {
  Graph g;
  node(g, 1, kDot, "v1");
  node(g, 2, kDot, "u1");
  node(g, 3, kDot, "v2");
  node(g, 4, kDot, "u2");
  edge(g, 5, "S", {1, 2}, true, "s1");
  edge(g, 6, "C", {2}, false, "c1");
  edge(g, 7, "S", {3, 4}, true, "s2");
  edge(g, 8, "C", {4}, false, "c2");
  auto ps = server_productions();
  TrackedSystem s = init_tracking(g);
  step(s, ps, "badServer", E(5));
  step(s, ps, "badServer", leaf_edge(s, 2));
  return s;
}

}  // namespace fx
