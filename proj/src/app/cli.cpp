#include "madsa/app/cli.hpp"

#include "madsa/app/service.hpp"
#include "madsa/assessor/assessor.hpp"
#include "madsa/synthesis/synthesis.hpp"
#include "madsa/text/corpus.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

namespace madsa::app {

namespace {

constexpr std::uint64_t kSplitSalt = 0x5bd1e9955bd1e995ULL;

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::is_regular_file(p)) throw InputError(what + " not found: " + p.string());
}

std::filesystem::path or_default(const std::string& given, std::filesystem::path fallback) {
  return given.empty() ? std::move(fallback) : std::filesystem::path(given);
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << s)) throw EnvironmentError("cannot write " + p.string());
}

void write_loss_csv(const std::filesystem::path& p, const std::vector<double>& losses) {
  std::string s = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, losses[i]);
    s += buf;
  }
  write_text(p, s);
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& p) {
  require_file(p, "corpus");
  auto c = text::load_jsonl(p);
  if (c.empty()) throw InputError("corpus is empty: " + p.string());
  return c;
}

}  // namespace

int exit_code(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const EnvironmentError*>(&e)) return 4;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e) ||
      dynamic_cast<const text::ValidationError*>(&e) || dynamic_cast<const synthesis::PhqBankError*>(&e) ||
      dynamic_cast<const CheckpointError*>(&e) || dynamic_cast<const CLI::ParseError*>(&e)) {
    return 2;
  }
  return 1;
}

Split split_corpus(const std::vector<Dialogue>& corpus, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(seed ^ kSplitSalt, 0));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::size_t n_dev = (corpus.size() + 5) / 10;
  if (corpus.size() < 2) n_dev = 0;
  std::vector<bool> dev(corpus.size(), false);
  for (std::size_t k = 0; k < n_dev; ++k) dev[order[k]] = true;
  Split s;
  for (std::size_t i = 0; i < corpus.size(); ++i) (dev[i] ? s.dev : s.train).push_back(corpus[i]);
  return s;
}

EvalReport evaluate(std::span<const Dialogue> gold, const AssessFn& assess, const metrics::ResponseFn& respond) {
  if (gold.empty()) throw InputError("evaluation corpus is empty");
  std::map<std::string, AspectScores> pred;
  std::size_t agree = 0;
  for (const auto& d : gold) {
    const AspectScores s = assess(d);
    pred[d.id] = s;
    if (metrics::detect_depression(s) == metrics::detect_depression(d.aspect_scores)) ++agree;
  }
  EvalReport r;
  r.table = metrics::evaluate_assessment(pred, gold);
  r.generation = metrics::evaluate_generation(respond, gold);
  r.detection_accuracy = static_cast<double>(agree) / static_cast<double>(gold.size());
  r.dialogues = gold.size();
  return r;
}

std::string EvalReport::render() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "BLEU-1 %.4f  BLEU-2 %.4f  (%zu responses)\ndetection accuracy %.2f%%  (%zu dialogues)\n",
                generation.bleu1, generation.bleu2, generation.pairs, 100.0 * detection_accuracy, dialogues);
  return table.render() + buf;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j = table.to_json();
  j["bleu1"] = generation.bleu1;
  j["bleu2"] = generation.bleu2;
  j["responses"] = generation.pairs;
  j["detection_accuracy"] = detection_accuracy;
  j["dialogues"] = dialogues;
  return j;
}

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

int run_chat(const Models& models, const dialogue::GateHooks& hooks, std::istream& in, std::ostream& out,
             const std::filesystem::path& transcript) {
  Session session;
  out << "Type a message, /assess for the current assessment, /quit to leave.\n";
  std::string line;
  while (!interrupt_flag().load()) {
    out << "you> " << std::flush;
    if (!std::getline(in, line)) break;
    if (line == "/quit") break;
    if (line == "/assess") {
      if (!session.has_user_turns()) {
        out << "nothing to assess yet\n";
      } else {
        out << session.assess(models).to_json().dump(2) << "\n";
      }
      continue;
    }
    if (text::tokenize(line).empty()) continue;
    const Exchange ex = session.send(models, line, hooks);
    out << "madsa> " << ex.response << (ex.gate.induced ? " [induced]" : "") << "\n";
  }
  out << "\n";
  ensure_parent(transcript);
  std::ofstream t(transcript, std::ios::binary);
  if (!t) throw EnvironmentError("cannot write transcript " + transcript.string());
  session.write_transcript(t);
  out << "transcript saved to " << transcript.string() << "\n";
  return 0;
}

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string data_dir;
  std::string bank;
  std::string checkpoints;
  std::string out;
  std::string corpus;
  std::string dialogue_ckpt;
  std::string assessor_ckpt;
  std::string loss_log;
  std::string json_out;
  std::string transcript;
  std::string static_dir;
  std::string transcript_dir;
  std::string host = "127.0.0.1";
  std::string model;
  std::optional<int> n, epochs, batch, embed, hidden, lstm, filters, kernel, heads, urg_epochs, port, min_count;
  std::optional<double> lr, dropout, weight_decay, negative_fraction;
  bool no_gate = false;
};

RunConfig resolve(const Flags& f) {
  RunConfig c = RunConfig::from_environment();
  if (!f.data_dir.empty()) c.data_dir = f.data_dir;
  if (!f.config.empty()) c.load_file(f.config);
  if (!f.data_dir.empty()) c.data_dir = f.data_dir;
  if (f.seed) c.seed = *f.seed;
  if (!f.bank.empty()) c.bank = f.bank;
  if (!f.checkpoints.empty()) c.checkpoints = f.checkpoints;
  if (f.batch) c.batch = *f.batch;
  if (f.lr) c.lr = *f.lr;
  if (f.dropout) c.dropout = *f.dropout;
  if (f.weight_decay) c.weight_decay = *f.weight_decay;
  if (f.embed) c.embed = *f.embed;
  if (f.hidden) c.hidden = *f.hidden;
  if (f.lstm) c.lstm = *f.lstm;
  if (f.filters) c.filters = *f.filters;
  if (f.kernel) c.kernel = *f.kernel;
  if (f.heads) c.heads = *f.heads;
  if (f.urg_epochs) c.urg_epochs = *f.urg_epochs;
  if (f.port) c.port = *f.port;
  if (f.n) c.synthesis.n_dialogues = *f.n;
  if (f.negative_fraction) c.synthesis.negative_fraction = *f.negative_fraction;
  if (f.no_gate) c.synthesis.gate_enabled = false;
  c.synthesis.seed = c.seed;
  c.validate();
  return c;
}

int cmd_synth(const Flags& f, const RunConfig& c, std::ostream& out) {
  const auto bank = synthesis::PhqBank::load(c.bank_path());
  const std::filesystem::path dir = f.out.empty() ? c.data_dir : std::filesystem::path(f.out);
  out << "generating " << c.synthesis.n_dialogues << " seed dialogues\n";
  const auto seed = synthesis::generate_seed_corpus(c.synthesis);
  synthesis::UrgConfig uc;
  uc.epochs = c.urg_epochs;
  uc.lr = c.urg_lr;
  uc.weight_decay = c.weight_decay;
  uc.seed = c.seed;
  double urg_loss = 0;
  out << "training user response generator (" << uc.epochs << " epochs)\n";
  const auto urg = synthesis::train_urg(bank, uc, [&](int e, double l) {
    urg_loss = l;
    if (e % 50 == 0 || e == uc.epochs) out << "  urg epoch " << e << " loss " << l << "\n";
  });
  synthesis::HashedEncoder encoder;
  const auto result = synthesis::synthesize_corpus(seed, bank, urg, encoder, c.synthesis);
  const Split split = split_corpus(result.dialogues, c.seed);
  std::filesystem::create_directories(dir);
  text::save_jsonl(split.train, dir / "train.jsonl");
  text::save_jsonl(split.dev, dir / "dev.jsonl");
  urg.save(dir / "urg.ckpt");
  nlohmann::ordered_json stats;
  stats["synthesis"] = c.synthesis.to_json();
  stats["urg"] = {{"epochs", uc.epochs}, {"final_loss", urg_loss}};
  stats["corpus"] = result.stats.to_json();
  stats["train"] = synthesis::corpus_stats(split.train).to_json();
  stats["dev"] = synthesis::corpus_stats(split.dev).to_json();
  write_text(dir / "stats.json", stats.dump(2) + "\n");
  out << "wrote " << split.train.size() << " train and " << split.dev.size() << " dev dialogues to " << dir.string()
      << " (" << result.stats.total_injections() << " PHQ injections)\n";
  return 0;
}

int cmd_train(const Flags& f, const RunConfig& c, std::ostream& out) {
  const std::filesystem::path corpus_path = or_default(f.corpus, c.data_dir / "train.jsonl");
  auto log = [&](int e, double l) { out << "epoch " << e << " loss " << l << "\n" << std::flush; };
  if (f.model == "dialogue") {
    const auto corpus = load_corpus(corpus_path);
    const std::filesystem::path ckpt = f.out.empty() ? c.dialogue_checkpoint() : std::filesystem::path(f.out);
    dialogue::DialogueConfig dc;
    dc.dims = {0, c.embed, c.hidden};
    dc.train = {f.epochs.value_or(c.dialogue_epochs), c.batch, c.lr, c.weight_decay, c.seed};
    dc.min_count = f.min_count.value_or(1);
    std::vector<double> losses;
    const auto m = dialogue::train_dialogue_model(corpus, dc, [&](int e, double l) {
      losses.push_back(l);
      log(e, l);
    });
    ensure_parent(ckpt);
    m.save(ckpt);
    write_loss_csv(or_default(f.loss_log, ckpt.string() + ".loss.csv"), losses);
    out << "saved " << ckpt.string() << "\n";
    return 0;
  }
  const std::filesystem::path enc = or_default(f.dialogue_ckpt, c.dialogue_checkpoint());
  if (!std::filesystem::is_regular_file(enc)) {
    throw InputError("frozen encoder required: train the dialogue model first (" + enc.string() + " not found)");
  }
  const auto corpus = load_corpus(corpus_path);
  const auto encoder = dialogue::DialogueModel::load(enc);
  const std::filesystem::path ckpt = f.out.empty() ? c.assessor_checkpoint() : std::filesystem::path(f.out);
  assessor::AssessorConfig ac;
  ac.dims = {0, c.kernel, c.filters, c.heads, c.lstm};
  ac.epochs = f.epochs.value_or(c.assessor_epochs);
  ac.batch = c.batch;
  ac.lr = c.lr;
  ac.weight_decay = c.weight_decay;
  ac.dropout = c.dropout;
  ac.seed = c.seed;
  std::vector<double> losses;
  const auto m = assessor::train_assessor(corpus, encoder, ac, [&](int e, double l) {
    losses.push_back(l);
    log(e, l);
  });
  ensure_parent(ckpt);
  m.save(ckpt);
  write_loss_csv(or_default(f.loss_log, ckpt.string() + ".loss.csv"), losses);
  out << "saved " << ckpt.string() << "\n";
  return 0;
}

Models load_models(const Flags& f, const RunConfig& c) {
  return Models::load(f.dialogue_ckpt.empty() ? c.dialogue_checkpoint() : std::filesystem::path(f.dialogue_ckpt),
                      f.assessor_ckpt.empty() ? c.assessor_checkpoint() : std::filesystem::path(f.assessor_ckpt),
                      c.bank_path());
}

int cmd_eval(const Flags& f, const RunConfig& c, std::ostream& out) {
  const auto gold = load_corpus(f.corpus.empty() ? c.data_dir / "dev.jsonl" : std::filesystem::path(f.corpus));
  const Models m = load_models(f, c);
  const auto report = evaluate(
      gold, [&](const Dialogue& d) { return assessor::assess(m.assessor, m.dialogue, d.turns).scores.scores; },
      [&](std::span<const Turn> h) { return dialogue::generate_response(m.dialogue, turn_texts(h)).text; });
  out << report.render();
  if (!f.json_out.empty()) write_text(f.json_out, report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_chat(const Flags& f, const RunConfig& c, std::istream& in, std::ostream& out) {
  const Models m = load_models(f, c);
  const std::filesystem::path t = or_default(f.transcript, c.data_dir / "transcripts" / "chat.jsonl");
  return run_chat(m, {}, in, out, t);
}

int cmd_serve(const Flags& f, const RunConfig& c, std::ostream& out) {
  const Models m = load_models(f, c);
  SessionStore store(c.seed);
  ServiceOptions opts;
  if (!f.static_dir.empty()) opts.static_dir = f.static_dir;
  if (!f.transcript_dir.empty()) opts.transcript_dir = f.transcript_dir;
  httplib::Server server;
  // httplib's default also sets SO_REUSEPORT, which would let a second server share a taken port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  install_routes(server, m, store, opts);
  if (!server.bind_to_port(f.host, c.port)) {
    throw EnvironmentError("cannot listen on " + f.host + ":" + std::to_string(c.port) + " (port in use?)");
  }
  out << "listening on http://" << f.host << ":" << c.port << "\n" << std::flush;
  if (!server.listen_after_bind()) throw EnvironmentError("server stopped unexpectedly");
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-aspect depression severity assessment through an inductive dialogue system", "madsa"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--seed", f.seed, "Run seed");
  app.add_option("--config", f.config, "JSON config file");
  app.add_option("--data-dir", f.data_dir, "Data root (default $MADSA_DATA_DIR or ./data)");
  app.add_option("--bank", f.bank, "PHQ-8 bank JSON");
  app.add_option("--checkpoints", f.checkpoints, "Checkpoint directory");

  auto* synth = app.add_subcommand("synth", "Synthesize a PHQ-annotated corpus");
  synth->add_option("--n", f.n, "Number of dialogues");
  synth->add_option("--out", f.out, "Output directory");
  synth->add_option("--negative-fraction", f.negative_fraction, "Share of negative user turns");
  synth->add_option("--urg-epochs", f.urg_epochs, "User response generator epochs");
  synth->add_flag("--no-gate", f.no_gate, "Copy the seed corpus without PHQ injection");

  auto* train = app.add_subcommand("train", "Train the dialogue model or the assessor");
  train->add_option("model", f.model, "dialogue | assessor")->required()->check(CLI::IsMember({"dialogue", "assessor"}));
  train->add_option("--corpus", f.corpus, "Training corpus JSONL");
  train->add_option("--out", f.out, "Checkpoint path");
  train->add_option("--dialogue", f.dialogue_ckpt, "Dialogue checkpoint (frozen encoder for the assessor)");
  train->add_option("--loss-log", f.loss_log, "Loss CSV path");
  train->add_option("--epochs", f.epochs);
  train->add_option("--batch", f.batch);
  train->add_option("--lr", f.lr);
  train->add_option("--weight-decay", f.weight_decay);
  train->add_option("--dropout", f.dropout);
  train->add_option("--embed", f.embed);
  train->add_option("--hidden", f.hidden);
  train->add_option("--lstm", f.lstm);
  train->add_option("--filters", f.filters);
  train->add_option("--kernel", f.kernel);
  train->add_option("--heads", f.heads);
  train->add_option("--min-count", f.min_count, "Vocabulary frequency cutoff");

  auto* eval = app.add_subcommand("eval", "Score checkpoints on a gold corpus");
  eval->add_option("--corpus", f.corpus, "Gold corpus JSONL (default dev.jsonl)");
  eval->add_option("--dialogue", f.dialogue_ckpt);
  eval->add_option("--assessor", f.assessor_ckpt);
  eval->add_option("--json", f.json_out, "Write the report as JSON");

  auto* chat = app.add_subcommand("chat", "Interactive terminal session");
  chat->add_option("--dialogue", f.dialogue_ckpt);
  chat->add_option("--assessor", f.assessor_ckpt);
  chat->add_option("--transcript", f.transcript, "Transcript JSONL written on exit");

  auto* serve = app.add_subcommand("serve", "HTTP JSON API");
  serve->add_option("--dialogue", f.dialogue_ckpt);
  serve->add_option("--assessor", f.assessor_ckpt);
  serve->add_option("--host", f.host);
  serve->add_option("--port", f.port);
  serve->add_option("--static", f.static_dir, "Chat UI bundle directory");
  serve->add_option("--transcripts", f.transcript_dir, "Directory for closed-session transcripts");

  std::vector<std::string> storage = {"madsa"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "madsa: " << e.what() << "\n";
    return 2;
  }

  try {
    const RunConfig c = resolve(f);
    if (synth->parsed()) return cmd_synth(f, c, out);
    if (train->parsed()) return cmd_train(f, c, out);
    if (eval->parsed()) return cmd_eval(f, c, out);
    if (chat->parsed()) return cmd_chat(f, c, in, out);
    return cmd_serve(f, c, out);
  } catch (const std::exception& e) {
    err << "madsa: " << e.what() << "\n";
    return exit_code(e);
  }
}

}  // namespace madsa::app
