#pragma once

#include <memory>
#include <string>

#include "qoe/session.hpp"

namespace httplib {
class Server;
}

namespace qoe::http {

/// HTTP status for an error code raised by the session service.
int status_for(const std::string& code);

/// JSON endpoints over a SessionService:
///   POST /raters                          -> 201 {"rater_id"}
///   POST /sessions {"rater_id"}           -> 201 plan
///   GET  /sessions/{id}                   -> plan
///   GET  /sessions/{id}/items/{n}/stream  -> application/x-ndjson wire events
///   POST /sessions/{id}/items/{n}/rating  -> 201 stored record
///   GET  /export/ratings                  -> JSON Lines
///   GET  /health                          -> {"status":"ok"}
/// Errors are {"error": code, "detail": text}.
class Server {
 public:
  explicit Server(session::SessionService& service);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  session::SessionService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace qoe::http
