#pragma once

#include "madsa/app/config.hpp"
#include "madsa/app/session.hpp"
#include "madsa/metrics.hpp"

#include <atomic>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace madsa::app {

// 0 success, 2 input error, 3 numeric failure, 4 environment error, 1 anything else.
int exit_code(const std::exception& e);

struct Split {
  std::vector<Dialogue> train;
  std::vector<Dialogue> dev;
};

// Seeded 90/10 split by dialogue; each side keeps corpus order.
Split split_corpus(const std::vector<Dialogue>& corpus, std::uint64_t seed);

using AssessFn = std::function<AspectScores(const Dialogue&)>;

struct EvalReport {
  metrics::EvalTable table;
  metrics::GenerationScores generation;
  double detection_accuracy = 0;
  std::size_t dialogues = 0;

  std::string render() const;
  nlohmann::ordered_json to_json() const;
};

// Gold depression flags come from the gold aspect scores.
EvalReport evaluate(std::span<const Dialogue> gold, const AssessFn& assess, const metrics::ResponseFn& respond);

// Set from a SIGINT handler; the chat loop exits cleanly when it sees it.
std::atomic<bool>& interrupt_flag();

// Terminal chat. "/assess" prints the report so far, "/quit" or end of input
// ends the session; the transcript is written to `transcript` on exit.
int run_chat(const Models& models, const dialogue::GateHooks& hooks, std::istream& in, std::ostream& out,
             const std::filesystem::path& transcript);

// Entry point of the madsa command; args excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace madsa::app
