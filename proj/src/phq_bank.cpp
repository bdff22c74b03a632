#include "madsa/synthesis/phq_bank.hpp"

#include <fstream>

namespace madsa::synthesis {

PhqBank PhqBank::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw PhqBankError("phq bank: expected a JSON array of items");
  if (j.size() != kAspectCount) {
    throw PhqBankError("phq bank: expected 8 items, found " + std::to_string(j.size()));
  }
  PhqBank bank;
  std::array<bool, kAspectCount> seen{};
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("aspect") || !e.contains("question") || !e.contains("answers")) {
      throw PhqBankError("phq bank: each item needs aspect, question and answers");
    }
    const auto aspect = parse_aspect(e["aspect"].get<std::string>());
    if (!aspect) throw PhqBankError("phq bank: unknown aspect '" + e["aspect"].get<std::string>() + "'");
    const std::size_t k = aspect_index(*aspect);
    if (seen[k]) throw PhqBankError("phq bank: duplicate aspect " + std::string(aspect_name(*aspect)));
    seen[k] = true;
    PhqItem& item = bank.items_[k];
    item.aspect = *aspect;
    item.question = e["question"].get<std::string>();
    if (item.question.empty()) throw PhqBankError("phq bank: empty question for " + std::string(aspect_name(*aspect)));
    for (int s = 0; s <= kMaxItemScore; ++s) {
      const std::string key = std::to_string(s);
      if (!e["answers"].contains(key)) {
        throw PhqBankError("phq bank: " + std::string(aspect_name(*aspect)) + " has no answers for score " + key);
      }
      item.answers[static_cast<std::size_t>(s)] = e["answers"][key].get<std::vector<std::string>>();
      if (item.answers[static_cast<std::size_t>(s)].size() < kMinTemplates) {
        throw PhqBankError("phq bank: " + std::string(aspect_name(*aspect)) + " score " + key +
                           " needs at least 3 answer templates");
      }
    }
  }
  return bank;
}

PhqBank PhqBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PhqBankError("phq bank not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw PhqBankError("phq bank: malformed JSON in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json PhqBank::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& item : items_) {
    nlohmann::ordered_json e;
    e["aspect"] = aspect_name(item.aspect);
    e["question"] = item.question;
    nlohmann::ordered_json answers;
    for (int s = 0; s <= kMaxItemScore; ++s) answers[std::to_string(s)] = item.answers[static_cast<std::size_t>(s)];
    e["answers"] = std::move(answers);
    out.push_back(std::move(e));
  }
  return out;
}

std::size_t PhqBank::max_templates() const {
  std::size_t n = 0;
  for (const auto& item : items_) {
    for (const auto& a : item.answers) n = std::max(n, a.size());
  }
  return n;
}

std::optional<Aspect> PhqBank::question_aspect(std::string_view text) const {
  for (const auto& item : items_) {
    if (item.question == text) return item.aspect;
  }
  return std::nullopt;
}

}  // namespace madsa::synthesis
