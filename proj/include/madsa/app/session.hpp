#pragma once

#include "madsa/assessor/assessor.hpp"
#include "madsa/dialogue/dialogue_model.hpp"
#include "madsa/synthesis/phq_bank.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace madsa::app {

// Everything a conversation needs, loaded once and shared read-only.
struct Models {
  dialogue::DialogueModel dialogue;
  assessor::Assessor assessor;
  synthesis::PhqBank bank;

  static Models load(const std::filesystem::path& dialogue_ckpt, const std::filesystem::path& assessor_ckpt,
                     const std::filesystem::path& bank_path);
};

// Assessment was requested before any user turn.
struct EmptySessionError : std::logic_error {
  using std::logic_error::logic_error;
};

struct Exchange {
  std::size_t turn_index = 0;  // index of the system turn
  std::string response;
  dialogue::GateDecision gate;
};

// One conversation. User turns carry the predicted emotion; system turns
// carry their gate decision. Assessment reads the history and never changes it.
class Session {
 public:
  Exchange send(const Models& m, const std::string& text, const dialogue::GateHooks& hooks = {});
  assessor::AssessmentReport assess(const Models& m) const;

  const std::vector<Turn>& turns() const { return turns_; }
  const std::vector<std::optional<dialogue::GateDecision>>& gates() const { return gates_; }
  const dialogue::PhqState& phq_state() const { return state_; }
  bool has_user_turns() const;

  // One JSON object per turn.
  void write_transcript(std::ostream& out) const;
  nlohmann::ordered_json to_json() const;

 private:
  std::vector<Turn> turns_;
  std::vector<std::optional<dialogue::GateDecision>> gates_;
  dialogue::PhqState state_;
};

struct UnknownSessionError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// In-memory sessions keyed by id. Calls on one session are serialized;
// different sessions proceed in parallel.
class SessionStore {
 public:
  explicit SessionStore(std::uint64_t seed) : rng_(seed) {}

  std::string create();

  template <typename F>
  auto with(const std::string& id, F&& f) {
    std::shared_ptr<Entry> e = find(id);
    std::lock_guard lock(e->mu);
    return f(e->session);
  }

  // Removes the session and returns it.
  Session close(const std::string& id);
  std::size_t size() const;

 private:
  struct Entry {
    std::mutex mu;
    Session session;
  };
  std::shared_ptr<Entry> find(const std::string& id) const;

  mutable std::mutex mu_;
  Rng rng_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace madsa::app
