#include "madsa/app/config.hpp"

#include "madsa/text/vocabulary.hpp"

#include <cstdlib>
#include <fstream>

namespace madsa::app {

RunConfig RunConfig::from_environment() {
  RunConfig c;
  if (const char* dir = std::getenv("MADSA_DATA_DIR"); dir && *dir) c.data_dir = dir;
  return c;
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

}  // namespace

void RunConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    take(j, "seed", seed);
    if (auto it = j.find("data_dir"); it != j.end()) data_dir = it->get<std::string>();
    if (auto it = j.find("bank"); it != j.end()) bank = it->get<std::string>();
    if (auto it = j.find("checkpoints"); it != j.end()) checkpoints = it->get<std::string>();
    take(j, "max_len", max_len);
    take(j, "history", history);
    take(j, "dialogue_epochs", dialogue_epochs);
    take(j, "assessor_epochs", assessor_epochs);
    take(j, "batch", batch);
    take(j, "lr", lr);
    take(j, "weight_decay", weight_decay);
    take(j, "dropout", dropout);
    take(j, "embed", embed);
    take(j, "hidden", hidden);
    take(j, "lstm", lstm);
    take(j, "filters", filters);
    take(j, "kernel", kernel);
    take(j, "heads", heads);
    take(j, "urg_epochs", urg_epochs);
    take(j, "urg_lr", urg_lr);
    take(j, "port", port);
    if (auto it = j.find("synthesis"); it != j.end()) synthesis = synthesis::SynthesisConfig::from_json(*it, synthesis);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  apply_json(j);
}

void RunConfig::validate() const {
  if (dialogue_epochs < 1 || assessor_epochs < 1 || urg_epochs < 1 || batch < 1 || embed < 1 || hidden < 1 ||
      lstm < 1 || filters < 1 || kernel < 1 || heads < 1) {
    throw ConfigError("epochs, batch and layer sizes must be positive");
  }
  if (!(lr > 0) || !(urg_lr > 0)) throw ConfigError("learning rates must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must be in [0, 1)");
  if (filters % heads != 0) throw ConfigError("filters must be divisible by heads");
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
  if (max_len != static_cast<int>(text::kDefaultMaxLen)) {
    throw ConfigError("max_len is fixed at " + std::to_string(text::kDefaultMaxLen));
  }
  if (history != static_cast<int>(kHistoryWindow)) {
    throw ConfigError("history is fixed at " + std::to_string(kHistoryWindow) + " turns");
  }
  synthesis.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["data_dir"] = data_dir.string();
  j["bank"] = bank_path().string();
  j["checkpoints"] = checkpoint_dir().string();
  j["max_len"] = max_len;
  j["history"] = history;
  j["dialogue_epochs"] = dialogue_epochs;
  j["assessor_epochs"] = assessor_epochs;
  j["batch"] = batch;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["dropout"] = dropout;
  j["embed"] = embed;
  j["hidden"] = hidden;
  j["lstm"] = lstm;
  j["filters"] = filters;
  j["kernel"] = kernel;
  j["heads"] = heads;
  j["urg_epochs"] = urg_epochs;
  j["urg_lr"] = urg_lr;
  j["port"] = port;
  j["synthesis"] = synthesis.to_json();
  return j;
}

}  // namespace madsa::app
