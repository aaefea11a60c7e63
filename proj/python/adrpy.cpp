// Python bindings: workspaces, the engine operations on their systems, and
// the HTTP routing table without a socket.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adr/errors.hpp"
#include "adr/io.hpp"
#include "adr/wp.hpp"

namespace py = pybind11;
using namespace adr;

namespace {

SystemEntry& entry(Workspace& ws, const std::string& name) {
  if (auto* e = ws.find_system(name)) return *e;
  throw py::key_error("no system named " + name);
}

const Production& production(const Workspace& ws, const std::string& name) {
  auto it = ws.productions.find(name);
  if (it == ws.productions.end()) throw py::key_error("no production named " + name);
  return it->second;
}

}  // namespace

PYBIND11_MODULE(adrpy, m) {
  m.doc() = "Typed hypergraph designs, productions, reconfiguration and recovery";

  py::register_exception<Error>(m, "AdrError", PyExc_RuntimeError);
  py::register_exception<WorkspaceError>(m, "WorkspaceError", PyExc_ValueError);

  py::class_<Workspace>(m, "Workspace")
      .def_property_readonly("systems",
                             [](const Workspace& ws) {
                               std::vector<std::string> out;
                               for (const auto& s : ws.systems) out.push_back(s.name);
                               return out;
                             })
      .def_property_readonly("productions",
                             [](const Workspace& ws) {
                               std::vector<std::string> out;
                               for (const auto& [n, p] : ws.productions) out.push_back(n);
                               return out;
                             })
      .def_property_readonly("rules",
                             [](const Workspace& ws) {
                               std::vector<std::string> out;
                               for (const auto& [n, r] : ws.rules) out.push_back(n);
                               return out;
                             })
      .def("dump", &dump_workspace, "Canonical JSON text")
      .def("save", [](const Workspace& ws, const std::string& path) { save_workspace(ws, path); })
      .def("graph_json",
           [](Workspace& ws, const std::string& s) { return graph_json(entry(ws, s).system.graph); })
      .def("forest_json",
           [](Workspace& ws, const std::string& s) { return forest_json(entry(ws, s).system); })
      .def("forest_text",
           [](Workspace& ws, const std::string& s) { return forest_to_text(entry(ws, s).system); })
      .def("graph_dot",
           [](Workspace& ws, const std::string& s) { return graph_to_dot(entry(ws, s).system.graph); })
      .def(
          "apply_production",
          [](Workspace& ws, const std::string& s, const std::string& p, std::uint64_t edge) {
            auto& e = entry(ws, s);
            const auto& prod = production(ws, p);
            record_production_in_place(e.system, prod, match_at(e.system.graph, prod, EdgeId(edge)));
          },
          py::arg("system"), py::arg("production"), py::arg("edge"))
      .def(
          "rule_matches",
          [](Workspace& ws, const std::string& s, const std::string& rule) {
            auto it = ws.rules.find(rule);
            if (it == ws.rules.end()) throw py::key_error("no rule named " + rule);
            std::vector<std::uint64_t> out;
            for (auto v : find_rule_matches(entry(ws, s).system, it->second)) out.push_back(v.value);
            return out;
          },
          py::arg("system"), py::arg("rule"))
      .def(
          "reconfigure",
          [](Workspace& ws, const std::string& s, const std::string& rule, std::uint64_t v) {
            auto it = ws.rules.find(rule);
            if (it == ws.rules.end()) throw py::key_error("no rule named " + rule);
            apply_reconfiguration_in_place(entry(ws, s).system, it->second, VertexId(v),
                                           ws.productions);
          },
          py::arg("system"), py::arg("rule"), py::arg("vertex"))
      .def(
          "parse",
          [](Workspace& ws, const std::string& s, std::uint64_t v) {
            parse_tracked_in_place(entry(ws, s).system, VertexId(v), ws.productions);
          },
          py::arg("system"), py::arg("vertex"))
      .def(
          "satisfies",
          [](Workspace& ws, const std::string& s, const std::string& formula) {
            return satisfies(entry(ws, s).system.graph, parse_formula(formula, &ws.gamma));
          },
          py::arg("system"), py::arg("formula"))
      .def(
          "weakest_precondition",
          [](const Workspace& ws, const std::string& p, const std::string& post) {
            return to_string(
                weakest_precondition(production(ws, p), parse_formula(post, &ws.gamma), {}, &ws.gamma)
                    .pre);
          },
          py::arg("production"), py::arg("post"))
      .def(
          "auto_recover",
          [](Workspace& ws, const std::string& s, const std::string& invariant) {
            auto& e = entry(ws, s);
            RecoveryRecord record{e.system.log.size(),
                                  start_recovery(e.system, parse_formula(invariant, &ws.gamma))};
            auto_recover(record.session, ws.productions);
            e.system = record.session.system;
            std::string state = to_string(record.session.state);
            e.recovery = std::move(record);
            return state;
          },
          py::arg("system"), py::arg("invariant"));

  m.def("load_workspace", [](const std::string& path) { return load_workspace(path); });
  m.def("parse_workspace", &parse_workspace);
  m.def("normalize_workspace", &normalize_workspace);

  py::class_<Service>(m, "Service")
      .def(py::init([](const Workspace& ws) { return std::make_unique<Service>(ws); }))
      .def_property_readonly("revision", &Service::revision)
      .def(
          "handle",
          [](Service& s, const std::string& method, const std::string& path,
             const std::string& body) {
            Response r = s.handle(method, path, body);
            return py::make_tuple(r.status, r.body, r.content_type);
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "");
}
