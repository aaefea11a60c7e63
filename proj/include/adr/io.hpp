#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "adr/errors.hpp"
#include "adr/formula.hpp"
#include "adr/graph.hpp"
#include "adr/production.hpp"
#include "adr/reconfig.hpp"
#include "adr/recovery.hpp"
#include "adr/tracking.hpp"

namespace adr {

inline constexpr const char* kWorkspaceFormat = "adr-workspace/1";

/// A recovery run attached to a system. The session started after the
/// first `base_events` events of the system's log.
struct RecoveryRecord {
  std::size_t base_events = 0;
  RecoverySession session;
};

struct SystemEntry {
  std::string name;
  TrackedSystem system;
  std::optional<RecoveryRecord> recovery;
  std::uint64_t revision = 0;
};

struct Workspace {
  TypeGraph gamma;
  ProductionSet productions;
  std::map<std::string, ReconfigRule> rules;
  std::optional<Formula> invariant;
  std::vector<SystemEntry> systems;

  SystemEntry* find_system(const std::string& name);
  const SystemEntry* find_system(const std::string& name) const;
};

/// One schema problem. `line` is 1-based, 0 when unknown; `path` is a JSON
/// pointer into the document.
struct Diagnostic {
  std::size_t line = 0;
  std::string path;
  std::string message;

  std::string to_string() const;
};

struct WorkspaceLoadError : WorkspaceError {
  explicit WorkspaceLoadError(std::vector<Diagnostic> diagnostics);
  std::vector<Diagnostic> diagnostics;
};

/// Parses a workspace document, replays every event log and decision log,
/// and checks stored snapshots against the replay. Throws
/// WorkspaceLoadError listing every problem found.
Workspace parse_workspace(const std::string& text);
Workspace load_workspace(const std::filesystem::path& path);

/// Canonical form: sorted keys, two-space indent, ids as numbers, theta as
/// 0/1, productions and rules by name, systems in workspace order.
std::string dump_workspace(const Workspace& ws);
void save_workspace(const Workspace& ws, const std::filesystem::path& path);

/// dump_workspace(parse_workspace(text)).
std::string normalize_workspace(const std::string& text);

// JSON views shared by the CLI and the service. Strings hold JSON text.
std::string graph_json(const Graph& g);
std::string forest_json(const TrackedSystem& s);
std::string session_json(const RecoverySession& r);

// ------------------------------------------------------------------ service

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// The HTTP session API over one workspace. handle() is the whole routing
/// table, so it can be driven without a socket. Every response body that
/// is JSON carries `revision`; writes may pass the revision they were based
/// on and are rejected with 409 when it is stale.
class Service {
 public:
  explicit Service(Workspace ws, std::filesystem::path save_path = {});

  Response handle(const std::string& method, const std::string& path,
                  const std::string& body = "");

  /// Blocks serving HTTP on host:port. Throws WorkspaceError when the port
  /// cannot be bound.
  void serve(const std::string& host, int port);
  void stop();

  std::uint64_t revision() const;
  Workspace snapshot() const;

 private:
  Response dispatch(const std::string& method,
                    const std::vector<std::string>& parts,
                    const std::string& body);

  mutable std::mutex mutex_;
  Workspace ws_;
  std::filesystem::path save_path_;
  std::uint64_t revision_ = 0;
  void* server_ = nullptr;  // httplib::Server while serving
};

}  // namespace adr
