#include "madsa/app/service.hpp"

#include "madsa/app/config.hpp"

#include <httplib.h>

#include <fstream>

namespace madsa::app {

namespace {

using json = nlohmann::ordered_json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) { reply(res, status, {{"error", message}}); }

// Maps exceptions from a handler body onto status codes.
template <typename F>
httplib::Server::Handler guarded(F body) {
  return [body](const httplib::Request& req, httplib::Response& res) {
    try {
      body(req, res);
    } catch (const UnknownSessionError& e) {
      fail(res, 404, e.what());
    } catch (const EmptySessionError& e) {
      fail(res, 409, e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(res, 400, std::string("bad request body: ") + e.what());
    } catch (const std::invalid_argument& e) {
      fail(res, 400, e.what());
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  };
}

}  // namespace

void install_routes(httplib::Server& server, const Models& models, SessionStore& store, const ServiceOptions& options) {
  server.Get("/api/health", guarded([&](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, {{"status", "ok"}, {"sessions", store.size()}});
             }));

  server.Post("/api/session", guarded([&](const httplib::Request&, httplib::Response& res) {
                reply(res, 201, {{"session_id", store.create()}});
              }));

  server.Get(R"(/api/session/([0-9a-f]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               json body = store.with(id, [](Session& s) { return s.to_json(); });
               body["session_id"] = id;
               reply(res, 200, body);
             }));

  server.Post(R"(/api/session/([0-9a-f]+)/message)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const auto body = nlohmann::json::parse(req.body);
                const auto it = body.find("text");
                if (it == body.end() || !it->is_string()) throw std::invalid_argument("body needs a string \"text\"");
                const std::string text = it->get<std::string>();
                const Exchange ex = store.with(id, [&](Session& s) { return s.send(models, text, options.hooks); });
                reply(res, 200, {{"response", ex.response}, {"gate", ex.gate.to_json()}, {"turn_index", ex.turn_index}});
              }));

  server.Get(R"(/api/session/([0-9a-f]+)/assessment)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto report = store.with(id, [&](Session& s) { return s.assess(models); });
               reply(res, 200, report.to_json());
             }));

  server.Delete(R"(/api/session/([0-9a-f]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  Session s = store.close(id);
                  if (options.transcript_dir) {
                    std::filesystem::create_directories(*options.transcript_dir);
                    std::ofstream out(*options.transcript_dir / (id + ".jsonl"));
                    s.write_transcript(out);
                  }
                  res.status = 204;
                }));

  if (options.static_dir && !server.set_mount_point("/", options.static_dir->string())) {
    throw InputError("static dir not found: " + options.static_dir->string());
  }
}

}  // namespace madsa::app
