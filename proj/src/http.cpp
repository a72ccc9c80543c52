#include "qoe/http.hpp"

#include "httplib.h"

#include "qoe/error.hpp"

namespace qoe::http {

namespace {

void send_error(httplib::Response& res, const std::string& code, const std::string& detail) {
  ordered_json j;
  j["error"] = code;
  j["detail"] = detail;
  res.status = status_for(code);
  res.set_content(j.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const ordered_json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

ordered_json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return ordered_json::object();
  try {
    auto j = ordered_json::parse(req.body);
    if (!j.is_object()) throw Error("bad-json", "body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("bad-json", e.what());
  }
}

std::size_t parse_index(const std::string& s) {
  if (s.empty() || s.size() > 9 || s.find_first_not_of("0123456789") != std::string::npos) {
    throw Error("bad-index", s);
  }
  return std::stoul(s);
}

// Runs `fn`, translating domain errors into JSON error responses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.detail());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, "bad-json", e.what());
  } catch (const std::exception& e) {
    send_error(res, "internal", e.what());
  }
}

}  // namespace

int status_for(const std::string& code) {
  if (code == "unknown-rater" || code == "unknown-session" || code == "bad-index" ||
      code == "not-found") {
    return 404;
  }
  if (code == "session-limit-exceeded" || code == "already-rated" ||
      code == "duplicate-submission" || code == "not-streamed" || code == "exhausted") {
    return 409;
  }
  if (code == "internal" || code == "io-error") return 500;
  return 400;
}

Server::Server(session::SessionService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& svc = service_;
  auto& srv = *server_;

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  srv.Post("/raters", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = parse_body(req);
      body.erase("rater_id");
      body.erase("sessions_completed");
      const auto id = svc.register_rater(profile_from_json(body));
      send_json(res, 201, {{"rater_id", id}});
    });
  });

  srv.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      if (!body.contains("rater_id") || !body["rater_id"].is_string()) {
        throw Error("missing-field", "rater_id");
      }
      const auto plan = svc.create_session(body["rater_id"].get<std::string>());
      send_json(res, 201, session::to_json(plan, &svc.content()));
    });
  });

  srv.Get(R"(/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto plan = svc.plan(req.matches[1]);
      if (!plan) throw Error("unknown-session", req.matches[1]);
      send_json(res, 200, session::to_json(*plan, &svc.content()));
    });
  });

  srv.Get(R"(/sessions/([^/]+)/items/([^/]+)/stream)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const std::string sid = req.matches[1];
              const auto index = parse_index(req.matches[2]);
              svc.check_streamable(sid, index);
              res.status = 200;
              res.set_chunked_content_provider(
                  "application/x-ndjson", [&svc, sid, index](std::size_t, httplib::DataSink& sink) {
                    try {
                      const auto trace = svc.stream_item(
                          sid, index, [&sink](std::size_t i, std::string_view tok) {
                            const auto line = stream::token_event(i, tok) + "\n";
                            return sink.is_writable() && sink.write(line.data(), line.size());
                          });
                      const auto done = stream::done_event(trace.items.size()) + "\n";
                      sink.write(done.data(), done.size());
                      sink.done();
                      return true;
                    } catch (const std::exception&) {
                      return false;
                    }
                  });
            });
          });

  srv.Post(R"(/sessions/([^/]+)/items/([^/]+)/rating)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const std::string sid = req.matches[1];
               const auto index = parse_index(req.matches[2]);
               const auto body = parse_body(req);
               const auto& scores = body.contains("scores") ? body.at("scores") : body;
               const auto record = svc.submit_rating(sid, index, scores_from_json(scores));
               send_json(res, 201, to_json(record));
             });
           });

  srv.Get("/export/ratings", [&svc](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(svc.export_ratings(), "application/x-ndjson");
  });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("io-error", "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Server::listen() { server_->listen_after_bind(); }

void Server::stop() {
  if (server_) server_->stop();
}

}  // namespace qoe::http
