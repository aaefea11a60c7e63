#include <httplib.h>

#include "adr/errors.hpp"
#include "adr/io.hpp"

namespace adr {

void Service::serve(const std::string& host, int port) {
  httplib::Server server;
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    Response r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  // The library default sets SO_REUSEPORT, which lets a second server bind
  // a busy port without error.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes),
               sizeof(yes));
  });
  server.Get(".*", route);
  server.Post(".*", route);
  if (!server.bind_to_port(host, port))
    throw WorkspaceError("cannot listen on " + host + ":" + std::to_string(port) +
                         " (port busy?)");
  {
    std::lock_guard lock(mutex_);
    server_ = &server;
  }
  server.listen_after_bind();
  std::lock_guard lock(mutex_);
  server_ = nullptr;
}

void Service::stop() {
  std::lock_guard lock(mutex_);
  if (server_) static_cast<httplib::Server*>(server_)->stop();
}

}  // namespace adr
