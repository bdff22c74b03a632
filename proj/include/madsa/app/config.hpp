#pragma once

#include "madsa/synthesis/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <string>

namespace madsa::app {

// Missing or unreadable inputs; exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The process environment is unusable, e.g. the port is taken; exit code 4.
struct EnvironmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Defaults are the reference training settings. Paths default under data_dir,
// which is $MADSA_DATA_DIR when set and ./data otherwise.
struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path data_dir = "data";
  std::filesystem::path bank;         // empty: data_dir/phq8_bank.json
  std::filesystem::path checkpoints;  // empty: data_dir/checkpoints

  int max_len = 512;  // source tokens; fixed by the text encoder
  int history = 7;    // turns; fixed by the text encoder
  int dialogue_epochs = 10;
  int assessor_epochs = 20;
  int batch = 16;
  double lr = 1e-5;
  double weight_decay = 0.01;
  double dropout = 0.3;
  int embed = 32;
  int hidden = 64;
  int lstm = 100;
  int filters = 100;
  int kernel = 5;
  int heads = 2;
  int urg_epochs = 200;
  double urg_lr = 3e-3;
  int port = 8080;
  synthesis::SynthesisConfig synthesis;

  static RunConfig from_environment();

  // Keys present in j override the current values.
  void apply_json(const nlohmann::json& j);
  void load_file(const std::filesystem::path& path);

  void validate() const;
  nlohmann::ordered_json to_json() const;

  std::filesystem::path bank_path() const { return bank.empty() ? data_dir / "phq8_bank.json" : bank; }
  std::filesystem::path checkpoint_dir() const { return checkpoints.empty() ? data_dir / "checkpoints" : checkpoints; }
  std::filesystem::path dialogue_checkpoint() const { return checkpoint_dir() / "dialogue.ckpt"; }
  std::filesystem::path assessor_checkpoint() const { return checkpoint_dir() / "assessor.ckpt"; }
};

}  // namespace madsa::app
