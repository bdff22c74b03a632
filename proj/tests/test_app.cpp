#include "madsa/app/cli.hpp"
#include "madsa/app/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

using namespace madsa;
using namespace madsa::app;
using json = nlohmann::json;

namespace {

const std::filesystem::path kBank = std::filesystem::path(MADSA_DATA_DIR) / "phq8_bank.json";

Turn user(std::string text, Emotion e) { return {Speaker::User, std::move(text), e, std::nullopt, std::nullopt}; }
Turn sys(std::string text) { return {Speaker::System, std::move(text), std::nullopt, std::nullopt, std::nullopt}; }

std::vector<Dialogue> toy_corpus() {
  return {
      {"d0", {user("i got a new puppy today", Emotion::Positive), sys("that is wonderful news")}, {0, 0, 1, 0, 0, 0, 0, 0}},
      {"d1", {user("i cannot sleep and i feel hopeless", Emotion::Negative), sys("i am sorry to hear that")},
       {3, 3, 3, 2, 2, 1, 1, 0}},
  };
}

// Untrained but fully wired models; small enough to build per test.
Models tiny_models() {
  dialogue::DialogueConfig c;
  c.dims = {0, 8, 12};
  auto dlg = dialogue::DialogueModel::untrained(toy_corpus(), c);
  assessor::Assessor ass({12, 5, 4, 2, 4}, 3);
  return {std::move(dlg), std::move(ass), synthesis::PhqBank::load(kBank)};
}

// Forces the negative path and makes Sleep the candidate closest to the
// context of a session whose only user turn is `first`.
dialogue::GateHooks rigged(const Models& m, const std::string& first) {
  dialogue::GateHooks h;
  h.forced_emotion = Emotion::Negative;
  const std::string sleep = m.bank.item(Aspect::Sleep).question;
  const synthesis::Vec ctx = synthesis::embed_context(std::vector<std::string>{first}, m.dialogue);
  h.candidate_vector = [sleep, ctx](const std::string& t) -> std::optional<synthesis::Vec> {
    if (t == sleep) return ctx;
    return -ctx;
  };
  return h;
}

struct Cli {
  int code = -1;
  std::string out, err;
};

Cli cli(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  Cli r;
  r.code = run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("madsa_test_app_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("run config layering and validation") {
  ::unsetenv("MADSA_DATA_DIR");
  RunConfig c = RunConfig::from_environment();
  CHECK(c.data_dir == "data");
  CHECK(c.bank_path() == std::filesystem::path("data") / "phq8_bank.json");
  CHECK(c.dialogue_checkpoint() == std::filesystem::path("data") / "checkpoints" / "dialogue.ckpt");
  CHECK_NOTHROW(c.validate());

  ::setenv("MADSA_DATA_DIR", "/srv/madsa", 1);
  CHECK(RunConfig::from_environment().data_dir == "/srv/madsa");
  ::unsetenv("MADSA_DATA_DIR");

  c.apply_json({{"lr", 0.5}, {"heads", 4}, {"synthesis", {{"negative_fraction", 0.7}}}});
  CHECK(c.lr == 0.5);
  CHECK(c.heads == 4);
  CHECK(c.synthesis.negative_fraction == 0.7);
  CHECK(c.batch == 16);

  RunConfig back;
  back.apply_json(json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());

  auto broken = [](json j) {
    RunConfig r;
    r.apply_json(j);
    r.validate();
  };
  CHECK_THROWS_AS(broken({{"max_len", 256}}), ConfigError);
  CHECK_THROWS_AS(broken({{"history", 5}}), ConfigError);
  CHECK_THROWS_AS(broken({{"filters", 99}}), ConfigError);
  CHECK_THROWS_AS(broken({{"dropout", 1.0}}), ConfigError);
  CHECK_THROWS_AS(broken({{"lr", "fast"}}), ConfigError);
  CHECK_THROWS_AS(broken(json::array()), ConfigError);
  CHECK_THROWS_AS(RunConfig().load_file("/nonexistent/madsa.json"), InputError);
}

TEST_CASE("split is 90/10 by dialogue, disjoint and seeded") {
  std::vector<Dialogue> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back({"d" + std::to_string(i), {}, {}});
  const Split a = split_corpus(corpus, 1);
  CHECK(a.train.size() == 45);
  CHECK(a.dev.size() == 5);
  std::set<std::string> ids;
  for (const auto& d : a.train) ids.insert(d.id);
  for (const auto& d : a.dev) ids.insert(d.id);
  CHECK(ids.size() == 50);
  const Split again = split_corpus(corpus, 1);
  const Split other = split_corpus(corpus, 2);
  auto dev_ids = [](const Split& s) {
    std::vector<std::string> v;
    for (const auto& d : s.dev) v.push_back(d.id);
    return v;
  };
  CHECK(dev_ids(again) == dev_ids(a));
  CHECK(dev_ids(other) != dev_ids(a));
  CHECK(split_corpus({corpus[0]}, 1).dev.empty());
}

TEST_CASE("evaluation with oracle predictors is perfect") {
  const auto gold = toy_corpus();
  const auto r = evaluate(
      gold, [](const Dialogue& d) { return d.aspect_scores; },
      [&](std::span<const Turn> h) {
        for (const auto& d : gold) {
          if (d.turns[0].text == h.back().text) return d.turns[1].text;
        }
        return std::string();
      });
  for (double q : r.table.qwk) CHECK(q == doctest::Approx(1.0));
  CHECK(r.generation.bleu1 == doctest::Approx(1.0));
  CHECK(r.detection_accuracy == 1.0);
  CHECK(r.dialogues == 2);
  const auto j = r.to_json();
  CHECK(j["detection_accuracy"] == 1.0);
  CHECK(r.render().find("detection accuracy 100.00%") != std::string::npos);

  // Always predicting the depressed profile gets one of two flags right.
  const auto flat = evaluate(
      gold, [](const Dialogue&) { return AspectScores{3, 3, 3, 3, 3, 3, 3, 3}; },
      [](std::span<const Turn>) { return std::string("nothing"); });
  CHECK(flat.detection_accuracy == 0.5);
  CHECK_THROWS_AS(evaluate({}, {}, {}), InputError);
}

TEST_CASE("session records emotions, gates and transcripts") {
  const Models m = tiny_models();
  Session s;
  CHECK_THROWS_AS(s.assess(m), EmptySessionError);
  CHECK_THROWS_AS(s.send(m, "   "), std::invalid_argument);
  CHECK(s.turns().empty());

  const auto ex = s.send(m, "i cannot sleep at night", rigged(m, "i cannot sleep at night"));
  CHECK(ex.turn_index == 1);
  CHECK(ex.gate.induced);
  CHECK(ex.response == m.bank.item(Aspect::Sleep).question);
  REQUIRE(s.turns().size() == 2);
  CHECK(s.turns()[0].emotion == Emotion::Negative);
  CHECK(s.turns()[1].speaker == Speaker::System);
  CHECK(s.phq_state().asked[aspect_index(Aspect::Sleep)]);

  const auto report = s.assess(m);
  CHECK(s.turns().size() == 2);  // assessment does not touch the history
  int total = 0;
  for (int v : report.scores.scores) total += v;
  CHECK(report.total == total);

  const auto j = s.to_json();
  CHECK(j["asked"] == json::array({"sleep"}));
  CHECK(j["turns"][1]["gate"]["induced"] == true);
  std::ostringstream t;
  s.write_transcript(t);
  std::istringstream lines(t.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    CHECK(json::parse(line)["turn_index"] == n);
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("session store ids and lifetime") {
  SessionStore store(7);
  const auto a = store.create();
  const auto b = store.create();
  CHECK(a.size() == 16);
  CHECK(a.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(a != b);
  CHECK(store.size() == 2);
  CHECK(store.with(a, [](Session& s) { return s.turns().size(); }) == 0);
  store.close(a);
  CHECK(store.size() == 1);
  CHECK_THROWS_AS(store.with(a, [](Session&) { return 0; }), UnknownSessionError);
  CHECK_THROWS_AS(store.close(a), UnknownSessionError);
}

TEST_CASE("http api contract") {
  const Models m = tiny_models();
  SessionStore store(11);
  ServiceOptions opts;
  opts.transcript_dir = scratch("transcripts");
  opts.hooks = rigged(m, "i have not slept well in weeks");
  httplib::Server server;
  install_routes(server, m, store, opts);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  auto created = client.Post("/api/session", "", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["session_id"];
  const std::string base = "/api/session/" + id;

  auto early = client.Get(base + "/assessment");
  REQUIRE(early);
  CHECK(early->status == 409);
  CHECK(json::parse(early->body).contains("error"));

  auto msg = client.Post(base + "/message", R"({"text": "i have not slept well in weeks"})", "application/json");
  REQUIRE(msg);
  CHECK(msg->status == 200);
  const auto body = json::parse(msg->body);
  CHECK(body["response"] == m.bank.item(Aspect::Sleep).question);
  CHECK(body["turn_index"] == 1);
  CHECK(body["gate"]["predicted_emotion"] == "negative");
  CHECK(body["gate"]["induced"] == true);
  CHECK(body["gate"]["candidates"].size() == 1 + kAspectCount);
  CHECK_NOTHROW(dialogue::GateDecision::from_json(body["gate"]));

  auto report = client.Get(base + "/assessment");
  REQUIRE(report);
  CHECK(report->status == 200);
  const auto r = json::parse(report->body);
  CHECK(r["scores"].size() == kAspectCount);
  CHECK(r["depressed"] == (r["total"].get<int>() >= 10));

  auto view = client.Get(base);
  REQUIRE(view);
  CHECK(json::parse(view->body)["turns"].size() == 2);

  CHECK(client.Post(base + "/message", "not json", "application/json")->status == 400);
  CHECK(client.Post(base + "/message", R"({"txt": "hi"})", "application/json")->status == 400);
  CHECK(client.Post(base + "/message", R"({"text": "   "})", "application/json")->status == 400);
  CHECK(client.Get("/api/session/0123456789abcdef")->status == 404);
  CHECK(client.Post("/api/session/0123456789abcdef/message", R"({"text": "hi"})", "application/json")->status == 404);

  auto closed = client.Delete(base);
  REQUIRE(closed);
  CHECK(closed->status == 204);
  CHECK(client.Get(base)->status == 404);
  CHECK(std::filesystem::exists(*opts.transcript_dir / (id + ".jsonl")));

  server.stop();
  worker.join();
}

TEST_CASE("terminal chat marks induced turns and saves the transcript") {
  const Models m = tiny_models();
  const auto dir = scratch("chat");
  std::istringstream in("/assess\ni cannot sleep\n\n/assess\n/quit\nnever read\n");
  std::ostringstream out;
  CHECK(run_chat(m, rigged(m, "i cannot sleep"), in, out, dir / "t.jsonl") == 0);
  const std::string text = out.str();
  CHECK(text.find("nothing to assess yet") != std::string::npos);
  CHECK(text.find("madsa> " + m.bank.item(Aspect::Sleep).question + " [induced]") != std::string::npos);
  CHECK(text.find("\"depressed\"") != std::string::npos);
  const std::string t = slurp(dir / "t.jsonl");
  CHECK(std::count(t.begin(), t.end(), '\n') == 2);

  // An interrupt ends the loop before reading more input.
  interrupt_flag() = true;
  std::istringstream more("hello\n");
  std::ostringstream out2;
  CHECK(run_chat(m, {}, more, out2, dir / "t2.jsonl") == 0);
  interrupt_flag() = false;
  CHECK(slurp(dir / "t2.jsonl").empty());
  CHECK(out2.str().find("you>") == std::string::npos);
}

TEST_CASE("cli usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"train", "encoder"}).code == 2);
  CHECK(cli({"--seed", "x", "synth"}).code == 2);

  const auto dir = scratch("usage");
  const auto missing_bank = cli({"--data-dir", dir.string(), "synth", "--n", "4"});
  CHECK(missing_bank.code == 2);
  CHECK(missing_bank.err.find("phq bank not found") != std::string::npos);

  const auto no_encoder = cli({"--data-dir", dir.string(), "train", "assessor"});
  CHECK(no_encoder.code == 2);
  CHECK(no_encoder.err.find("frozen encoder required") != std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"dropout": 2})";
  CHECK(cli({"--config", (dir / "bad.json").string(), "--data-dir", dir.string(), "synth"}).code == 2);
  std::ofstream(dir / "garbled.json") << "{";
  CHECK(cli({"--config", (dir / "garbled.json").string(), "synth"}).code == 2);
  CHECK(cli({"--config", (dir / "absent.json").string(), "synth"}).code == 2);

  CHECK(cli({"--data-dir", dir.string(), "eval"}).code == 2);
  CHECK(cli({"--data-dir", dir.string(), "chat"}, "/quit\n").code == 2);
}

TEST_CASE("cli pipeline: synth, train, eval, serve") {
  const auto root = scratch("pipeline");
  const std::vector<std::string> common = {"--data-dir", root.string(), "--bank", kBank.string(), "--seed", "5"};
  auto with = [&](std::vector<std::string> rest) {
    auto a = common;
    a.insert(a.end(), rest.begin(), rest.end());
    return a;
  };

  const auto first = cli(with({"synth", "--n", "30", "--urg-epochs", "3", "--out", (root / "a").string()}));
  REQUIRE(first.code == 0);
  const auto second = cli(with({"synth", "--n", "30", "--urg-epochs", "3", "--out", (root / "b").string()}));
  REQUIRE(second.code == 0);
  for (const char* f : {"train.jsonl", "dev.jsonl", "stats.json", "urg.ckpt"}) {
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }
  CHECK(std::count(std::istreambuf_iterator<char>(std::ifstream(root / "a" / "dev.jsonl").rdbuf()), {}, '\n') == 3);
  const auto stats = json::parse(slurp(root / "a" / "stats.json"));
  CHECK(stats["train"]["dialogues"] == 27);
  CHECK(stats["synthesis"]["seed"] == 5);

  const std::string corpus = (root / "a" / "train.jsonl").string();
  const auto dlg = cli(with({"train", "dialogue", "--corpus", corpus, "--epochs", "2", "--embed", "8", "--hidden", "12"}));
  REQUIRE(dlg.code == 0);
  const auto csv = slurp(root / "checkpoints" / "dialogue.ckpt.loss.csv");
  CHECK(csv.rfind("epoch,loss\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  const auto ass = cli(with({"train", "assessor", "--corpus", corpus, "--epochs", "2", "--filters", "4", "--lstm",
                             "4", "--batch", "8", "--loss-log", (root / "ass.csv").string()}));
  REQUIRE(ass.code == 0);
  CHECK(std::count(std::istreambuf_iterator<char>(std::ifstream(root / "ass.csv").rdbuf()), {}, '\n') == 3);

  const auto blowup = cli(with({"train", "assessor", "--corpus", corpus, "--epochs", "2", "--filters", "4", "--lstm",
                                "4", "--lr", "1e300", "--out", (root / "nan.ckpt").string()}));
  CHECK(blowup.code == 3);
  CHECK_FALSE(std::filesystem::exists(root / "nan.ckpt"));

  const auto ev = cli(with({"eval", "--corpus", (root / "a" / "dev.jsonl").string(), "--json", (root / "e.json").string()}));
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("Average") != std::string::npos);
  const auto e = json::parse(slurp(root / "e.json"));
  CHECK(e["dialogues"] == 3);
  CHECK(e.contains("bleu1"));

  // A taken port is an environment error.
  httplib::Server blocker;
  const int port = blocker.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  const auto taken = cli(with({"serve", "--port", std::to_string(port)}));
  CHECK(taken.code == 4);
  CHECK(cli(with({"serve", "--static", (root / "no_ui").string()})).code == 2);

  // Mismatched encoder width is rejected at load.
  REQUIRE(cli(with({"train", "dialogue", "--corpus", corpus, "--epochs", "1", "--embed", "8", "--hidden", "10",
                    "--out", (root / "narrow.ckpt").string()}))
              .code == 0);
  CHECK(cli(with({"eval", "--dialogue", (root / "narrow.ckpt").string()})).code == 2);
}
