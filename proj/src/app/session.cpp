#include "madsa/app/session.hpp"

#include "madsa/app/config.hpp"
#include "madsa/text/vocabulary.hpp"

#include <cstdio>

namespace madsa::app {

namespace {

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) throw InputError(what + " not found: " + p.string());
}

}  // namespace

Models Models::load(const std::filesystem::path& dialogue_ckpt, const std::filesystem::path& assessor_ckpt,
                    const std::filesystem::path& bank_path) {
  require_file(dialogue_ckpt, "dialogue checkpoint");
  require_file(assessor_ckpt, "assessor checkpoint");
  require_file(bank_path, "phq bank");
  Models m{dialogue::DialogueModel::load(dialogue_ckpt), assessor::Assessor::load(assessor_ckpt),
           synthesis::PhqBank::load(bank_path)};
  if (m.assessor.dims().input != m.dialogue.dim()) {
    throw CheckpointError("assessor expects encoder width " + std::to_string(m.assessor.dims().input) +
                          ", dialogue model has " + std::to_string(m.dialogue.dim()));
  }
  return m;
}

Exchange Session::send(const Models& m, const std::string& text, const dialogue::GateHooks& hooks) {
  if (text::tokenize(text).empty()) throw std::invalid_argument("message has no text");
  std::vector<Turn> next = turns_;
  next.push_back({Speaker::User, text, Emotion::Positive, std::nullopt, std::nullopt});
  const auto history = turn_texts(history_window(next, next.size()));
  auto out = dialogue::induce_response(m.dialogue, m.bank, history, state_, hooks);
  next.back().emotion = out.gate.predicted_emotion;
  next.push_back({Speaker::System, out.response.text, std::nullopt, std::nullopt, std::nullopt});
  turns_ = std::move(next);
  gates_.push_back(std::nullopt);
  gates_.push_back(out.gate);
  return {turns_.size() - 1, out.response.text, out.gate};
}

bool Session::has_user_turns() const {
  for (const auto& t : turns_) {
    if (t.speaker == Speaker::User) return true;
  }
  return false;
}

assessor::AssessmentReport Session::assess(const Models& m) const {
  if (!has_user_turns()) throw EmptySessionError("session has no user turns yet");
  return assessor::assess(m.assessor, m.dialogue, turns_);
}

nlohmann::ordered_json Session::to_json() const {
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < turns_.size(); ++i) {
    nlohmann::ordered_json t;
    t["turn_index"] = i;
    t["speaker"] = speaker_name(turns_[i].speaker);
    t["text"] = turns_[i].text;
    if (turns_[i].emotion) t["emotion"] = emotion_name(*turns_[i].emotion);
    if (gates_[i]) t["gate"] = gates_[i]->to_json();
    turns.push_back(std::move(t));
  }
  nlohmann::ordered_json asked = nlohmann::ordered_json::array();
  for (Aspect a : kAspects) {
    if (state_.asked[aspect_index(a)]) asked.push_back(aspect_name(a));
  }
  return {{"turns", std::move(turns)}, {"asked", std::move(asked)}};
}

void Session::write_transcript(std::ostream& out) const {
  const auto j = to_json();
  for (const auto& t : j["turns"]) out << t.dump() << '\n';
}

std::string SessionStore::create() {
  std::lock_guard lock(mu_);
  std::string id;
  do {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_.next()));
    id = buf;
  } while (sessions_.count(id));
  sessions_.emplace(id, std::make_shared<Entry>());
  return id;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSessionError("unknown session " + id);
  return it->second;
}

Session SessionStore::close(const std::string& id) {
  std::shared_ptr<Entry> e;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSessionError("unknown session " + id);
    e = it->second;
    sessions_.erase(it);
  }
  std::lock_guard lock(e->mu);
  return std::move(e->session);
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace madsa::app
