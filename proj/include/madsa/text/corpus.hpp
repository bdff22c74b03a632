#pragma once

#include "madsa/text/dialogue.hpp"

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace madsa::text {

// Raised for a corpus record that violates the schema. line is 1-based, 0
// when the record did not come from a file.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::size_t line, std::string field, const std::string& message);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

nlohmann::ordered_json to_json(const Dialogue& d);
Dialogue dialogue_from_json(const nlohmann::json& j, std::size_t line = 0);

// Checks the Dialogue invariants; throws ValidationError.
void validate(const Dialogue& d, std::size_t line = 0);

std::string to_jsonl_line(const Dialogue& d);
void write_jsonl(std::ostream& out, const std::vector<Dialogue>& dialogues);
std::vector<Dialogue> read_jsonl(std::istream& in);

void save_jsonl(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path);
std::vector<Dialogue> load_jsonl(const std::filesystem::path& path);

}  // namespace madsa::text
