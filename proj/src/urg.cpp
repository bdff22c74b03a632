#include "madsa/synthesis/urg.hpp"

namespace madsa::synthesis {

namespace {

std::string score_token(int s) { return "<score_" + std::to_string(s) + ">"; }
std::string variant_token(std::size_t k) { return "<variant_" + std::to_string(k) + ">"; }

std::size_t count_variants(const text::Vocabulary& vocab) {
  std::size_t n = 0;
  while (vocab.contains(variant_token(n))) ++n;
  return n;
}

}  // namespace

UserResponseGenerator::UserResponseGenerator(model::TextModel m) : model_(std::move(m)) {
  variants_ = count_variants(model_.vocab);
  if (variants_ == 0) throw ConfigError("user response generator vocabulary has no variant tokens");
  for (int s = 0; s <= kMaxItemScore; ++s) {
    if (!model_.vocab.contains(score_token(s))) throw ConfigError("vocabulary lacks " + score_token(s));
  }
}

UserResponseGenerator UserResponseGenerator::untrained(const PhqBank& bank, const UrgConfig& config) {
  std::vector<std::string> texts;
  for (const auto& item : bank.items()) {
    texts.push_back(item.question);
    for (const auto& level : item.answers) texts.insert(texts.end(), level.begin(), level.end());
  }
  for (int s = 0; s <= kMaxItemScore; ++s) texts.push_back(score_token(s));
  for (std::size_t k = 0; k < bank.max_templates(); ++k) texts.push_back(variant_token(k));
  auto vocab = text::Vocabulary::build_from_texts(texts, 1);
  model::Seq2SeqDims dims = config.dims;
  dims.vocab = vocab.size();
  model::Seq2Seq net(kUrgPrefix, dims, config.seed);
  return UserResponseGenerator(model::TextModel{std::move(vocab), std::move(net)});
}

std::vector<int> UserResponseGenerator::source_ids(const PhqItem& item, int score, std::size_t variant) const {
  if (score < 0 || score > kMaxItemScore) {
    throw std::invalid_argument("user response: score " + std::to_string(score) + " outside 0-3");
  }
  std::vector<int> ids = {text::kBos};
  for (int id : text::token_ids(item.question, model_.vocab)) ids.push_back(id);
  ids.push_back(text::kSep);
  ids.push_back(model_.vocab.id(score_token(score)));
  ids.push_back(model_.vocab.id(variant_token(variant % variants_)));
  ids.push_back(text::kEos);
  return ids;
}

std::vector<model::Example> UserResponseGenerator::examples(const PhqBank& bank, const text::Vocabulary& vocab) {
  UserResponseGenerator shape(model::TextModel{vocab, model::Seq2Seq(kUrgPrefix, {vocab.size(), 1, 1}, 0)});
  std::vector<model::Example> out;
  for (const auto& item : bank.items()) {
    for (int s = 0; s <= kMaxItemScore; ++s) {
      const auto& level = item.answers[static_cast<std::size_t>(s)];
      for (std::size_t k = 0; k < level.size(); ++k) {
        auto target = text::token_ids(level[k], vocab);
        target.push_back(text::kEos);
        out.push_back({shape.source_ids(item, s, k), std::move(target)});
      }
    }
  }
  return out;
}

UserResponse UserResponseGenerator::respond_variant(const PhqItem& item, int score, std::size_t variant) const {
  const auto decoded = model_.net.greedy(source_ids(item, score, variant), kMaxAnswerTokens);
  return {text::decode(decoded.ids, model_.vocab), decoded.truncated};
}

UserResponse UserResponseGenerator::respond(const PhqItem& item, int score, Rng& rng) const {
  if (score < 0 || score > kMaxItemScore) {
    throw std::invalid_argument("user response: score " + std::to_string(score) + " outside 0-3");
  }
  const std::size_t n = std::min(variants_, item.answers[static_cast<std::size_t>(score)].size());
  return respond_variant(item, score, static_cast<std::size_t>(rng.below(n)));
}

UserResponseGenerator UserResponseGenerator::load(const std::filesystem::path& checkpoint) {
  return UserResponseGenerator(model::load_text_model(checkpoint, kUrgPrefix));
}

UserResponseGenerator train_urg(const PhqBank& bank, const UrgConfig& config,
                                const std::function<void(int, double)>& on_epoch) {
  auto urg = UserResponseGenerator::untrained(bank, config);
  const auto data = UserResponseGenerator::examples(bank, urg.model().vocab);
  urg.model().net.train(data, {config.epochs, config.batch, config.lr, config.weight_decay, config.seed}, on_epoch);
  return urg;
}

}  // namespace madsa::synthesis
