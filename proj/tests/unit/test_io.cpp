#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "../fixtures.hpp"
#include "adr/io.hpp"

using namespace fx;
using json = nlohmann::json;

namespace {

std::string data(const std::string& name) { return std::string(ADR_TEST_DATA) + "/" + name; }

Graph graph_from(const json& j) {
  Graph g;
  for (const auto& n : j["nodes"])
    g.add_node({NodeId(n["id"].get<std::uint64_t>()), n["tau"], n["name"]});
  for (const auto& e : j["edges"]) {
    Edge x{EdgeId(e["id"].get<std::uint64_t>()), e["tau"], {}, e["theta"].get<int>() == 1,
           e["name"]};
    for (const auto& a : e["att"]) x.att.push_back(NodeId(a.get<std::uint64_t>()));
    g.add_edge(std::move(x));
  }
  return g;
}

void check_same(const Workspace& a, const Workspace& b) {
  CHECK(a.gamma == b.gamma);
  CHECK(a.productions == b.productions);
  CHECK(a.rules == b.rules);
  CHECK(a.invariant.has_value() == b.invariant.has_value());
  if (a.invariant && b.invariant) CHECK(to_string(*a.invariant) == to_string(*b.invariant));
  REQUIRE(a.systems.size() == b.systems.size());
  for (std::size_t i = 0; i < a.systems.size(); ++i) {
    CHECK(a.systems[i].name == b.systems[i].name);
    CHECK(a.systems[i].system == b.systems[i].system);
    CHECK(a.systems[i].recovery.has_value() == b.systems[i].recovery.has_value());
    if (a.systems[i].recovery && b.systems[i].recovery) {
      CHECK(a.systems[i].recovery->session.log == b.systems[i].recovery->session.log);
      CHECK(a.systems[i].recovery->session.state == b.systems[i].recovery->session.state);
      CHECK(a.systems[i].recovery->session.system == b.systems[i].recovery->session.system);
    }
  }
}

Workspace flights_workspace() {
  Workspace ws;
  ws.gamma = flights_gamma();
  ws.productions.emplace("bookFlight", book_flight());
  ws.systems.push_back({"flights", init_tracking(flights_graph()), {}, 0});
  TrackedSystem s5 = init_tracking(booking_graph());
  record_production_in_place(s5, book_flight(), match_at(s5.graph, book_flight(), E(11)));
  ws.systems.push_back({"book", s5, {}, 0});
  return ws;
}

}  // namespace

TEST_CASE("workspace round trip keeps ids, theta, rhs_order and logs") {
  Workspace ws = flights_workspace();
  std::string text = dump_workspace(ws);
  Workspace back = parse_workspace(text);
  check_same(ws, back);
  CHECK(dump_workspace(back) == text);

  auto path = std::filesystem::temp_directory_path() / "adr_roundtrip.json";
  save_workspace(ws, path);
  check_same(ws, load_workspace(path));
  std::filesystem::remove(path);
}

TEST_CASE("scenario files are canonical after one normalization") {
  for (const char* name : {"flights.json", "booking.json", "servers.json"}) {
    CAPTURE(name);
    Workspace ws = load_workspace(data(name));
    std::string once = dump_workspace(ws);
    CHECK(normalize_workspace(once) == once);
    check_same(ws, parse_workspace(once));
  }
}

TEST_CASE("scenario files decode to the fixture systems") {
  Workspace flights = load_workspace(data("flights.json"));
  CHECK(flights.find_system("flights")->system.graph == flights_graph());
  CHECK(isomorphic(flights.find_system("book")->system.graph, booking_result()));
  CHECK(isomorphic(flights.find_system("rebook")->system.graph, rebooking_result()));

  Workspace booking = load_workspace(data("booking.json"));
  CHECK(booking.find_system("two_requests")->system == two_requests_system());

  // After cf on the booked client system: the documented graph, with c1, c2, f1, f3 kept.
  TrackedSystem bc = booked_client_system();
  Graph before = bc.graph;
  const auto& loaded = booking.find_system("booked_client")->system;
  CHECK(isomorphic(loaded.graph, booked_client_reconfigured()));
  for (auto id : {E(15), E(16), E(6), E(11)}) {
    CHECK(before.has_edge(id));
    CHECK(loaded.graph.has_edge(id));
  }
  CHECK_FALSE(loaded.graph.has_edge(E(12)));
  CHECK(isomorphic(booking.find_system("booked")->system.graph, booked_reconfigured()));

  Workspace servers = load_workspace(data("servers.json"));
  const auto* rec = servers.find_system("recovered");
  REQUIRE(rec->recovery);
  CHECK(rec->recovery->session.state == SessionState::Recovered);
  CHECK(satisfies(rec->system.graph, servers_invariant()));
  CHECK(servers.find_system("failed")->system == servers_failed());
}

TEST_CASE("schema violations carry lines and field paths") {
  std::string text = dump_workspace(flights_workspace());

  SUBCASE("left-hand side with two edges") {
    json doc = json::parse(text);
    doc["productions"][0]["lhs"]["edges"].push_back(
        {{"id", 4}, {"tau", "Fls"}, {"att", {2, 1}}, {"theta", 1}, {"name", "x"}});
    try {
      parse_workspace(doc.dump(2));
      FAIL("accepted");
    } catch (const WorkspaceLoadError& e) {
      REQUIRE(e.diagnostics.size() == 1);
      CHECK(e.diagnostics[0].path == "/productions/0");
      CHECK(e.diagnostics[0].line > 1);
      CHECK(e.diagnostics[0].message.find("exactly one edge") != std::string::npos);
    }
  }
  SUBCASE("bad theta points at its line") {
    json doc = json::parse(text);
    doc["systems"][0]["initial"]["edges"][1]["theta"] = 7;
    std::string bad = doc.dump(2);
    try {
      parse_workspace(bad);
      FAIL("accepted");
    } catch (const WorkspaceLoadError& e) {
      REQUIRE(e.diagnostics.size() == 1);
      CHECK(e.diagnostics[0].path == "/systems/0/initial/edges/1/theta");
      std::size_t at = bad.find("\"theta\": 7");
      std::size_t line = 1 + std::count(bad.begin(), bad.begin() + at, '\n');
      CHECK(e.diagnostics[0].line == line);
    }
  }
  SUBCASE("malformed JSON") {
    try {
      parse_workspace("{\n  \"format\": ,\n}");
      FAIL("accepted");
    } catch (const WorkspaceLoadError& e) {
      CHECK(e.diagnostics.at(0).line == 2);
    }
  }
  SUBCASE("event that cannot replay") {
    json doc = json::parse(text);
    doc["systems"][1]["events"][0]["edge"] = 10;  // ff is not replaceable
    CHECK_THROWS_AS(parse_workspace(doc.dump()), WorkspaceLoadError);
  }
  SUBCASE("tampered snapshot") {
    json doc = json::parse(text);
    doc["systems"][1]["snapshot"]["graph"]["edges"][1]["att"] = {1, 1};
    try {
      parse_workspace(doc.dump());
      FAIL("accepted");
    } catch (const WorkspaceLoadError& e) {
      CHECK(e.diagnostics.at(0).path == "/systems/1/snapshot/graph");
    }
  }
  SUBCASE("unknown format") {
    json doc = json::parse(text);
    doc["format"] = "other/2";
    CHECK_THROWS_AS(parse_workspace(doc.dump()), WorkspaceLoadError);
  }
}

TEST_CASE("service endpoints") {
  Service svc(load_workspace(data("flights.json")));
  auto get = [&](const std::string& p) { return svc.handle("GET", p); };
  auto post = [&](const std::string& p, const json& b) { return svc.handle("POST", p, b.dump()); };

  auto r = get("/systems/flights/graph");
  REQUIRE(r.status == 200);
  json body = json::parse(r.body);
  CHECK(body["revision"] == 0);
  CHECK(graph_from(body["graph"]) == flights_graph());

  // bookFlight on a fresh system.
  Workspace ws;
  ws.gamma = flights_gamma();
  ws.productions.emplace("bookFlight", book_flight());
  ws.systems.push_back({"g", init_tracking(booking_graph()), {}, 0});
  Service s5(std::move(ws));
  r = s5.handle("POST", "/systems/g/productions/bookFlight/apply", R"({"edge": 11})");
  REQUIRE(r.status == 200);
  body = json::parse(r.body);
  CHECK(body["revision"] == 1);
  CHECK(isomorphic(graph_from(body["graph"]), booking_result()));
  CHECK(body["created"].size() == 2);

  SUBCASE("stale writes and bad targets") {
    r = s5.handle("POST", "/systems/g/productions/bookFlight/apply",
                  R"({"edge": 11, "revision": 0})");
    CHECK(r.status == 409);
    r = s5.handle("POST", "/systems/g/productions/bookFlight/apply", R"({"edge": 10})");
    CHECK(r.status == 409);  // not replaceable
    CHECK(s5.handle("GET", "/systems/nope/graph").status == 404);
    CHECK(s5.handle("POST", "/systems/g/productions/nope/apply", R"({"edge": 1})").status == 404);
    CHECK(s5.handle("GET", "/systems/g/productions/bookFlight/apply").status == 405);
    CHECK(s5.handle("POST", "/systems/g/productions/bookFlight/apply", "[").status == 400);
    CHECK(s5.revision() == 1);
  }
  SUBCASE("dot exports") {
    r = get("/systems/flights/graph.dot");
    CHECK(r.status == 200);
    CHECK(r.content_type == "text/vnd.graphviz");
    CHECK(r.body.rfind("graph G {", 0) == 0);
    CHECK(get("/systems/flights/forest.dot").status == 200);
    CHECK(json::parse(get("/systems/book/forest").body)["forest"]["roots"].size() == 2);
    CHECK(json::parse(get("/workspace").body)["workspace"]["format"] == kWorkspaceFormat);
  }
}

TEST_CASE("service recovery and reconfiguration endpoints") {
  SUBCASE("recovery") {
    Service svc(load_workspace(data("servers.json")));
    auto post = [&](const std::string& p, const json& b) {
      return svc.handle("POST", p, b.dump());
    };
    CHECK(svc.handle("GET", "/systems/failed/recovery").status == 404);
    auto r = post("/systems/failed/recovery/start", json::object());
    REQUIRE(r.status == 200);
    json body = json::parse(r.body);
    CHECK(body["session"]["state"] == "Violated");
    std::uint64_t rev = body["revision"];

    r = post("/systems/failed/recovery/decision",
             {{"kind", "AcceptProduction"}, {"production", "goodServer"}, {"edge", 7}});
    CHECK(r.status == 409);  // nothing proposed yet
    r = post("/systems/failed/recovery/decision", {{"kind", "Propose"}, {"revision", rev}});
    REQUIRE(r.status == 200);
    body = json::parse(svc.handle("GET", "/systems/failed/recovery/candidates").body);
    REQUIRE(body["candidates"].size() == 1);
    CHECK(body["candidates"][0]["production"] == "goodServer");

    // Writes to the system are held off while the session runs.
    CHECK(post("/systems/failed/productions/badServer/apply", {{"edge", 7}}).status == 409);

    r = post("/systems/failed/recovery/decision",
             {{"kind", "AcceptProduction"}, {"production", "goodServer"}, {"edge", 7}});
    REQUIRE(r.status == 200);
    CHECK(json::parse(r.body)["session"]["state"] == "Recovered");
    CHECK(json::parse(r.body)["revision"].get<std::uint64_t>() > rev);
    r = post("/systems/failed/recovery/decision", {{"kind", "Abandon"}});
    CHECK(r.status == 409);
    Graph g = graph_from(json::parse(svc.handle("GET", "/systems/failed/graph").body)["graph"]);
    CHECK(satisfies(g, servers_invariant()));

    // The session survives a save and reload.
    Workspace back = parse_workspace(dump_workspace(svc.snapshot()));
    const auto* e = back.find_system("failed");
    REQUIRE(e->recovery);
    CHECK(e->recovery->session.state == SessionState::Recovered);
    CHECK(e->system == svc.snapshot().find_system("failed")->system);
  }
  SUBCASE("reconfiguration and parse refusal") {
    Workspace ws = load_workspace(data("booking.json"));
    ws.systems.push_back({"fresh", booked_client_system(), {}, 0});
    Service svc(std::move(ws));
    auto r = svc.handle("POST", "/systems/fresh/rules/cf/matches");
    REQUIRE(r.status == 200);
    json ms = json::parse(r.body)["matches"];
    REQUIRE(ms.size() == 1);
    r = svc.handle("POST", "/systems/fresh/rules/cf/apply",
                   json{{"vertex", ms[0]}}.dump());
    REQUIRE(r.status == 200);
    CHECK(isomorphic(graph_from(json::parse(r.body)["graph"]), booked_client_reconfigured()));
    CHECK(svc.handle("POST", "/systems/fresh/rules/cf/apply",
                     json{{"vertex", ms[0]}}.dump()).status == 409);

    // Every client must sit at the target of some flight; c1 and c2 do not.
    // The root vertex is not two-tier, so parsing it is refused.
    r = svc.handle("POST", "/systems/fresh/recovery/start",
                   R"({"invariant": "forall Client(x,y). exists Fl(a,b). x = b"})");
    REQUIRE(r.status == 200);
    CHECK(json::parse(r.body)["session"]["state"] == "Violated");
    CHECK(json::parse(r.body)["session"]["marked"] == ms[0]);
    REQUIRE(svc.handle("POST", "/systems/fresh/recovery/decision", R"({"kind": "Propose"})")
                .status == 200);
    r = svc.handle("POST", "/systems/fresh/recovery/decision",
                   json{{"kind", "Parse"}, {"vertex", ms[0]}}.dump());
    CHECK(r.status == 422);
    CHECK(json::parse(r.body)["error"]["kind"] == "ParseRefused");
    CHECK(svc.handle("POST", "/systems/fresh/recovery/start", R"({"invariant": "forall"})")
              .status == 400);
  }
}

TEST_CASE("http transport and busy port") {
  Service svc(load_workspace(data("flights.json")));
  httplib::Server blocker;
  int port = blocker.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  CHECK_THROWS_AS(svc.serve("127.0.0.1", port), WorkspaceError);
  blocker.stop();

  // Serve on a free port and talk to it over a socket.
  int free_port = 0;
  {
    int sock = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(sock, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    socklen_t len = sizeof(addr);
    ::getsockname(sock, reinterpret_cast<sockaddr*>(&addr), &len);
    free_port = ntohs(addr.sin_port);
    ::close(sock);
  }
  std::atomic<bool> failed{false};
  std::thread t([&] {
    try {
      svc.serve("127.0.0.1", free_port);
    } catch (...) {
      failed = true;
    }
  });
  httplib::Client client("127.0.0.1", free_port);
  client.set_read_timeout(5, 0);
  httplib::Result res;
  for (int i = 0; i < 100 && !res && !failed; ++i) {
    res = client.Get("/systems/flights/graph");
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(graph_from(json::parse(res->body)["graph"]) == flights_graph());
  svc.stop();
  t.join();
}
