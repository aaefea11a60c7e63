// adr: command-line front end over workspace files.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "adr/errors.hpp"
#include "adr/io.hpp"
#include "adr/wp.hpp"

using namespace adr;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorkspaceError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SystemEntry& system_of(Workspace& ws, const std::string& name) {
  if (name.empty() && ws.systems.size() == 1) return ws.systems.front();
  if (auto* e = ws.find_system(name)) return *e;
  throw WorkspaceError(name.empty() ? "several systems; pick one with --system"
                                    : "no system named " + name);
}

const Production& production_of(const Workspace& ws, const std::string& name) {
  auto it = ws.productions.find(name);
  if (it == ws.productions.end()) throw WorkspaceError("no production named " + name);
  return it->second;
}

void print_system(const SystemEntry& e) {
  std::cout << "system " << e.name << "\n";
  for (const auto& edge : e.system.graph.edges()) {
    std::cout << "  " << e.system.graph.label(edge.id) << ":" << edge.type << "(";
    for (std::size_t i = 0; i < edge.att.size(); ++i)
      std::cout << (i ? "," : "") << e.system.graph.label(edge.att[i]);
    std::cout << ") theta=" << (edge.replaceable() ? 1 : 0) << "  [id " << edge.id << "]\n";
  }
  std::cout << "forest:\n" << forest_to_text(e.system);
  if (e.recovery)
    std::cout << "recovery: " << to_string(e.recovery->session.state) << "\n";
}

void print_session(const RecoverySession& r) {
  std::cout << "state: " << to_string(r.state) << "\n";
  if (r.violation) {
    std::cout << "violation: " << r.violation->reason << " at {";
    const char* sep = "";
    for (const auto& [x, n] : r.violation->assignment) {
      std::cout << sep << x << "=" << n;
      sep = ", ";
    }
    std::cout << "}\n";
  }
  if (r.state == SessionState::AwaitingProductionChoice ||
      r.state == SessionState::AwaitingIterateOrParse) {
    std::cout << "working condition: " << to_string(r.working_condition) << "\n";
    for (std::size_t i = 0; i < r.candidates.size(); ++i)
      std::cout << "  [" << i << "] " << r.candidates[i].production << " at edge "
                << r.candidates[i].match.edge << "\n";
  }
  if (r.state == SessionState::AwaitingProductionChoice ||
      r.state == SessionState::AwaitingIterateOrParse ||
      r.state == SessionState::AwaitingSubtreeChoice) {
    std::cout << "two-tier vertices:";
    for (auto v : two_tier_vertices(r.system, r.marked)) std::cout << " " << v;
    std::cout << "\n";
  }
}

/// Reads one decision from stdin; returns nothing at end of input.
std::optional<Decision> prompt(const RecoverySession& r) {
  using K = Decision::Kind;
  while (true) {
    std::cout << "decision (accept N | iterate N | request-parse | parse V | "
                 "propose | abandon)> "
              << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return std::nullopt;
    std::istringstream in(line);
    std::string cmd;
    in >> cmd;
    std::uint64_t n = 0;
    if (cmd == "accept" || cmd == "iterate") {
      if (!(in >> n) || n >= r.candidates.size()) {
        std::cout << "no candidate " << n << "\n";
        continue;
      }
      const auto& c = r.candidates[n];
      return Decision{cmd == "accept" ? K::AcceptProduction : K::Iterate, c.production,
                      c.match.edge, {}};
    }
    if (cmd == "parse") {
      if (!(in >> n)) {
        std::cout << "parse needs a vertex id\n";
        continue;
      }
      return Decision{K::Parse, "", {}, VertexId(n)};
    }
    if (cmd == "request-parse") return Decision{K::RequestParse, "", {}, {}};
    if (cmd == "propose") return Decision{K::Propose, "", {}, {}};
    if (cmd == "abandon") return Decision{K::Abandon, "", {}, {}};
    if (!cmd.empty()) std::cout << "unknown decision '" << cmd << "'\n";
  }
}

bool terminal(SessionState s) {
  return s == SessionState::Recovered || s == SessionState::Abandoned;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Architectural design rewriting workspace tool"};
  app.require_subcommand(1);

  std::string iso_bound;
  app.add_option("--iso-bound", iso_bound, "Edge cap for exhaustive oracles")
      ->envname("ADR_ISO_BOUND");

  std::string file, system, production, rule, formula, out;
  std::uint64_t edge = 0, vertex = 0;
  bool dry_run = false;

  auto add_file = [&](CLI::App* c) {
    c->add_option("workspace", file, "Workspace file")->envname("ADR_WORKSPACE")->required();
  };
  auto add_out = [&](CLI::App* c) {
    c->add_option("-o,--out", out, "Write the workspace here instead of in place");
    c->add_flag("--dry-run", dry_run, "Do not write the workspace");
  };

  auto* validate = app.add_subcommand("validate", "Load, replay and check a workspace");
  add_file(validate);

  auto* show = app.add_subcommand("show", "Print systems, forests or DOT");
  add_file(show);
  show->add_option("-s,--system", system);
  std::string dot;
  show->add_option("--dot", dot, "graph or forest")->check(CLI::IsMember({"graph", "forest"}));
  bool show_json = false;
  show->add_flag("--json", show_json, "Print the canonical workspace");

  auto* apply = app.add_subcommand("apply", "Apply a production at an edge");
  add_file(apply);
  apply->add_option("-s,--system", system);
  apply->add_option("production", production)->required();
  apply->add_option("edge", edge)->required();
  add_out(apply);

  auto* wp = app.add_subcommand("wp", "Weakest precondition of a production");
  add_file(wp);
  wp->add_option("production", production)->required();
  wp->add_option("formula", formula, "Postcondition")->required();

  auto* oracle = app.add_subcommand("oracle", "Exhaustively check the wp of a production");
  add_file(oracle);
  oracle->add_option("production", production)->required();
  oracle->add_option("formula", formula, "Postcondition")->required();
  std::size_t bound = 3;
  oracle->add_option("--bound", bound, "Largest graph size in edges");

  auto* reconfigure = app.add_subcommand("reconfigure", "Apply a reconfiguration rule");
  add_file(reconfigure);
  reconfigure->add_option("-s,--system", system);
  reconfigure->add_option("rule", rule)->required();
  auto* at_opt = reconfigure->add_option("--at", vertex, "Forest vertex to rewrite");
  add_out(reconfigure);

  auto* parse = app.add_subcommand("parse", "Fold a two-tier subtree back into one edge");
  add_file(parse);
  parse->add_option("-s,--system", system);
  parse->add_option("vertex", vertex)->required();
  add_out(parse);

  auto* recover = app.add_subcommand("recover", "Run a recovery session");
  add_file(recover);
  recover->add_option("-s,--system", system);
  std::string invariant_file;
  recover->add_option("--invariant", invariant_file, "File holding the invariant formula")
      ->required();
  bool automatic = false;
  recover->add_flag("--auto", automatic, "Accept the first candidate at every step");
  add_out(recover);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP session API");
  serve->add_option("--workspace", file)->envname("ADR_WORKSPACE")->required();
  int port = 8080;
  serve->add_option("--port", port)->envname("ADR_PORT");
  std::string host = "127.0.0.1";
  serve->add_option("--host", host);
  bool persist = false;
  serve->add_flag("--save", persist, "Write the workspace after every change");

  CLI11_PARSE(app, argc, argv);
  if (!iso_bound.empty()) setenv("ADR_ISO_BOUND", iso_bound.c_str(), 1);

  auto write_back = [&](const Workspace& ws) {
    if (dry_run) return;
    save_workspace(ws, out.empty() ? file : out);
  };

  try {
    Workspace ws = load_workspace(file);

    if (*validate) {
      std::size_t events = 0;
      for (const auto& s : ws.systems) events += s.system.log.size();
      std::cout << "ok: " << ws.productions.size() << " productions, " << ws.rules.size()
                << " rules, " << ws.systems.size() << " systems, " << events
                << " events replayed\n";
      return 0;
    }

    if (*show) {
      if (show_json) {
        std::cout << dump_workspace(ws);
        return 0;
      }
      if (!dot.empty()) {
        const auto& e = system_of(ws, system);
        std::cout << (dot == "graph" ? graph_to_dot(e.system.graph) : forest_to_dot(e.system));
        return 0;
      }
      for (const auto& e : ws.systems)
        if (system.empty() || e.name == system) print_system(e);
      return 0;
    }

    if (*apply) {
      auto& e = system_of(ws, system);
      const auto& p = production_of(ws, production);
      record_production_in_place(e.system, p, match_at(e.system.graph, p, EdgeId(edge)));
      print_system(e);
      write_back(ws);
      return 0;
    }

    if (*wp || *oracle) {
      const auto& p = production_of(ws, production);
      Formula post = parse_formula(formula, &ws.gamma);
      WpResult res = weakest_precondition(p, post, {}, &ws.gamma);
      std::cout << to_string(res.pre) << "\n";
      for (const auto& [x, n] : res.h)
        std::cout << "  " << x << " -> " << p.lhs.label(n) << "\n";
      for (const auto& n : res.notes) std::cout << "note: " << n << "\n";
      if (*oracle) {
        auto report = check_validity_oracle(asserted_from_wp(p, post, {}, &ws.gamma), bound,
                                            &ws.gamma);
        std::cout << "oracle: " << report.graphs << " graphs, " << report.applications
                  << " applications, " << report.counterexamples.size()
                  << " counterexamples\n";
        for (const auto& c : report.counterexamples)
          std::cout << "  " << c.scope << ": " << c.reason << "\n";
        return report.ok() ? 0 : 1;
      }
      return 0;
    }

    if (*reconfigure) {
      auto& e = system_of(ws, system);
      auto it = ws.rules.find(rule);
      if (it == ws.rules.end()) throw WorkspaceError("no rule named " + rule);
      VertexId at(vertex);
      if (at_opt->count() == 0) {
        auto matches = find_rule_matches(e.system, it->second);
        if (matches.empty()) throw WorkspaceError("rule " + rule + " matches nowhere");
        at = matches.front();
        std::cout << "rewriting at vertex " << at << "\n";
      }
      apply_reconfiguration_in_place(e.system, it->second, at, ws.productions);
      print_system(e);
      write_back(ws);
      return 0;
    }

    if (*parse) {
      auto& e = system_of(ws, system);
      parse_tracked_in_place(e.system, VertexId(vertex), ws.productions);
      print_system(e);
      write_back(ws);
      return 0;
    }

    if (*recover) {
      auto& e = system_of(ws, system);
      Formula inv = parse_formula(read_file(invariant_file), &ws.gamma);
      RecoveryRecord record{e.system.log.size(), start_recovery(e.system, inv)};
      RecoverySession& r = record.session;
      if (automatic) {
        auto_recover(r, ws.productions);
      } else {
        if (r.state == SessionState::Violated) propose(r, ws.productions);
        while (!terminal(r.state) && r.state != SessionState::Idle) {
          print_session(r);
          auto d = prompt(r);
          if (!d) break;
          try {
            decide(r, *d, ws.productions);
          } catch (const Error& err) {
            std::cout << "refused: " << err.what() << "\n";
          }
        }
      }
      print_session(r);
      for (const auto& d : r.log) std::cout << "  " << to_string(d) << "\n";
      e.system = r.system;
      e.recovery = std::move(record);
      write_back(ws);
      return r.state == SessionState::Recovered || r.state == SessionState::Idle ? 0 : 1;
    }

    if (*serve) {
      Service service(std::move(ws), persist ? std::filesystem::path(file)
                                             : std::filesystem::path());
      std::cout << "serving " << file << " on http://" << host << ":" << port << "\n"
                << std::flush;
      service.serve(host, port);
      return 0;
    }
  } catch (const WorkspaceLoadError& e) {
    for (const auto& d : e.diagnostics)
      std::cerr << file << ":" << d.line << ": " << (d.path.empty() ? "" : d.path + ": ")
                << d.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
