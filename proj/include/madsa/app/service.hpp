#pragma once

#include "madsa/app/session.hpp"

#include <filesystem>
#include <optional>

namespace httplib {
class Server;
}

namespace madsa::app {

struct ServiceOptions {
  std::optional<std::filesystem::path> static_dir;      // chat UI bundle, served at /
  std::optional<std::filesystem::path> transcript_dir;  // closed sessions are written here as JSONL
  dialogue::GateHooks hooks;
};

// JSON API:
//   POST   /api/session                  -> 201 {"session_id"}
//   GET    /api/session/{id}             -> {"session_id", "turns", "asked"}
//   POST   /api/session/{id}/message     {"text"} -> {"response", "gate", "turn_index"}
//   GET    /api/session/{id}/assessment  -> AssessmentReport, 409 before any user turn
//   DELETE /api/session/{id}             -> 204
//   GET    /api/health                   -> {"status", "sessions"}
// Errors are {"error": message} with 400, 404, 409 or 500.
void install_routes(httplib::Server& server, const Models& models, SessionStore& store, const ServiceOptions& options);

}  // namespace madsa::app
