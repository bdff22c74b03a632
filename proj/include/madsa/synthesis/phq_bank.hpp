#pragma once

#include "madsa/text/dialogue.hpp"

#include <array>
#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace madsa::synthesis {

inline constexpr std::size_t kMinTemplates = 3;

struct PhqItem {
  Aspect aspect = Aspect::Interest;
  std::string question;
  // answers[s] are the anticipated user answers for item score s
  std::array<std::vector<std::string>, kMaxItemScore + 1> answers;
};

struct PhqBankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exactly one item per aspect, each score level with at least kMinTemplates
// answers. Questions are used verbatim.
class PhqBank {
 public:
  static PhqBank from_json(const nlohmann::json& j);
  static PhqBank load(const std::filesystem::path& path);

  const PhqItem& item(Aspect a) const { return items_[aspect_index(a)]; }
  const std::array<PhqItem, kAspectCount>& items() const { return items_; }
  nlohmann::ordered_json to_json() const;

  // Largest template count over all items and score levels.
  std::size_t max_templates() const;

  // Aspect whose question is exactly `text`, if any.
  std::optional<Aspect> question_aspect(std::string_view text) const;

 private:
  std::array<PhqItem, kAspectCount> items_;
};

}  // namespace madsa::synthesis
