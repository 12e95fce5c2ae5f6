#include "verse/lm.hpp"

#include "lm_backends.hpp"
#include "verse/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace verse::lm {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "VERSE-LM";
constexpr int kCheckpointVersion = 1;

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown " + std::string(what) + " config key '" + key + "'");
  }
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

json ModelConfig::to_json() const {
  return {{"backend", backend},   {"context", context},     {"d_model", d_model},
          {"layers", layers},     {"heads", heads},         {"ffn_mult", ffn_mult},
          {"precision", precision}, {"init_std", init_std}, {"order", order}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  reject_unknown(j, {"backend", "context", "d_model", "layers", "heads", "ffn_mult", "precision", "init_std", "order"},
                 "model");
  ModelConfig c;
  c.backend = j.value("backend", c.backend);
  c.context = j.value("context", c.context);
  c.d_model = j.value("d_model", c.d_model);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.precision = j.value("precision", c.precision);
  c.init_std = j.value("init_std", c.init_std);
  c.order = j.value("order", c.order);
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (backend != "transformer" && backend != "ngram")
    throw std::invalid_argument("backend must be 'transformer' or 'ngram', got '" + backend + "'");
  if (context < 2) throw std::invalid_argument("context must be at least 2");
  if (backend == "transformer") {
    if (d_model == 0 || layers == 0 || heads == 0 || ffn_mult == 0)
      throw std::invalid_argument("d_model, layers, heads and ffn_mult must be positive");
    if (d_model % heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
    if (precision != "float" && precision != "double")
      throw std::invalid_argument("precision must be 'float' or 'double'");
  } else if (order < 1 || order > 3) {
    throw std::invalid_argument("n-gram order must be in 1..3");
  }
}

json TrainConfig::to_json() const {
  return {{"seed", seed},   {"steps", steps}, {"batch", batch},   {"lr", lr},
          {"warmup", warmup}, {"min_lr_ratio", min_lr_ratio}, {"beta1", beta1}, {"beta2", beta2},
          {"eps", eps},     {"weight_decay", weight_decay}, {"clip", clip}, {"log_every", log_every}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  reject_unknown(j, {"seed", "steps", "batch", "lr", "warmup", "min_lr_ratio", "beta1", "beta2", "eps",
                     "weight_decay", "clip", "log_every"},
                 "train");
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.warmup = j.value("warmup", c.warmup);
  c.min_lr_ratio = j.value("min_lr_ratio", c.min_lr_ratio);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip = j.value("clip", c.clip);
  c.log_every = j.value("log_every", c.log_every);
  if (c.batch == 0) throw std::invalid_argument("batch must be positive");
  return c;
}

json SampleConfig::to_json() const {
  return {{"temperature", temperature}, {"top_k", top_k}, {"max_new", max_new}};
}

SampleConfig SampleConfig::from_json(const json& j) {
  reject_unknown(j, {"temperature", "top_k", "max_new"}, "sample");
  SampleConfig c;
  c.temperature = j.value("temperature", c.temperature);
  c.top_k = j.value("top_k", c.top_k);
  c.max_new = j.value("max_new", c.max_new);
  if (c.temperature < 0) throw std::invalid_argument("temperature must be non-negative");
  return c;
}

void TokenStream::append_record(std::span<const TokenId> record) {
  starts.push_back(tokens.size());
  tokens.insert(tokens.end(), record.begin(), record.end());
}

void LanguageModel::check_ids(std::span<const TokenId> tokens) const {
  for (const TokenId t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size())
      throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(vocab_size()));
}

std::unique_ptr<LanguageModel> create_model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed) {
  config.validate();
  if (vocab_size < 2) throw std::invalid_argument("vocabulary too small");
  if (config.backend == "ngram") return detail::make_ngram(config, vocab_size);
  return detail::make_transformer(config, vocab_size, seed);
}

std::unique_ptr<LanguageModel> train_lm(const TokenStream& train, const TokenStream& heldout,
                                        const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                        std::size_t vocab_size, TrainReport* report) {
  if (train.tokens.size() < model_cfg.context + 1)
    throw std::invalid_argument("training stream has " + std::to_string(train.tokens.size()) +
                                " tokens, fewer than one context window (" + std::to_string(model_cfg.context + 1) +
                                ")");
  auto model = create_model(model_cfg, vocab_size, train_cfg.seed);
  model->check_ids(train.tokens);
  model->check_ids(heldout.tokens);
  auto r = model->fit(train, heldout, train_cfg);
  if (report) *report = std::move(r);
  return model;
}

double LogLikelihood::perplexity() const {
  if (included == 0) throw NoScoredTokens();
  return std::exp(-total / static_cast<double>(included));
}

double LogLikelihood::mean() const {
  if (included == 0) throw NoScoredTokens();
  return total / static_cast<double>(included);
}

LogLikelihood log_likelihood(const LanguageModel& model, std::span<const TokenId> tokens,
                             const std::set<TokenId>& exclude) {
  if (tokens.size() < 2) throw std::invalid_argument("log_likelihood needs at least two tokens");
  model.check_ids(tokens);
  LogLikelihood out;
  out.per_token = model.score(tokens);
  out.excluded.resize(out.per_token.size());
  for (std::size_t i = 0; i < out.per_token.size(); ++i) {
    out.excluded[i] = exclude.contains(tokens[i + 1]);
    if (!out.excluded[i]) {
      out.total += out.per_token[i];
      ++out.included;
    }
  }
  if (out.included == 0) throw NoScoredTokens();
  return out;
}

TokenId draw(std::span<const double> log_probs, const SampleConfig& cfg, Rng& rng) {
  const std::size_t n = log_probs.size();
  if (n == 0) throw std::invalid_argument("empty distribution");
  if (cfg.temperature <= 1e-6) {
    return static_cast<TokenId>(std::max_element(log_probs.begin(), log_probs.end()) - log_probs.begin());
  }
  std::vector<TokenId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t k = n;
  if (cfg.top_k > 0 && cfg.top_k < n) {
    k = cfg.top_k;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](TokenId a, TokenId b) {
                        return log_probs[static_cast<std::size_t>(a)] > log_probs[static_cast<std::size_t>(b)] ||
                               (log_probs[static_cast<std::size_t>(a)] == log_probs[static_cast<std::size_t>(b)] &&
                                a < b);
                      });
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) mx = std::max(mx, log_probs[static_cast<std::size_t>(order[i])]);
  std::vector<double> w(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((log_probs[static_cast<std::size_t>(order[i])] - mx) / cfg.temperature);
    sum += w[i];
  }
  double u = rng.uniform() * sum;
  for (std::size_t i = 0; i < k; ++i) {
    if (u < w[i]) return order[i];
    u -= w[i];
  }
  // Rounding left a sliver of mass: take the last candidate with weight.
  for (std::size_t i = k; i-- > 0;)
    if (w[i] > 0) return order[i];
  return order[0];
}

SampleResult sample(const LanguageModel& model, std::span<const TokenId> prefix, Rng& rng, const SampleConfig& cfg) {
  if (prefix.empty()) throw std::invalid_argument("sampling needs a non-empty prefix");
  if (prefix.size() >= model.context_limit())
    throw std::invalid_argument("prefix of " + std::to_string(prefix.size()) + " tokens does not fit the context of " +
                                std::to_string(model.context_limit()));
  model.check_ids(prefix);
  auto dec = model.decoder();
  for (const TokenId t : prefix) dec->push(t);
  SampleResult out;
  for (std::size_t i = 0; i < cfg.max_new; ++i) {
    const TokenId t = draw(dec->log_probs(), cfg, rng);
    if (cfg.stop.contains(t)) {
      out.reason = StopReason::stop_token;
      out.stop_token = t;
      return out;
    }
    out.tokens.push_back(t);
    if (dec->length() >= model.context_limit()) {
      out.reason = StopReason::context;
      return out;
    }
    dec->push(t);
  }
  out.reason = StopReason::max_new;
  return out;
}

void save_checkpoint(const LanguageModel& model, const std::filesystem::path& path, std::uint64_t vocab_hash,
                     std::uint64_t seed, const json& meta) {
  std::ostringstream payload(std::ios::binary);
  model.write_payload(payload);
  const std::string bytes = payload.str();
  const json header = {{"version", kCheckpointVersion},
                       {"backend", model.config().backend},
                       {"config", model.config().to_json()},
                       {"vocab_size", model.vocab_size()},
                       {"vocab_hash", hex(vocab_hash)},
                       {"seed", seed},
                       {"meta", meta},
                       {"payload_bytes", bytes.size()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMagic << '\n' << header.dump() << '\n';
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error(path.string() + ": not a model checkpoint");
  std::getline(in, header_line);
  const json header = json::parse(header_line);
  const int version = header.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto config = ModelConfig::from_json(header.at("config"));
  ck.seed = header.at("seed").get<std::uint64_t>();
  ck.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
  ck.meta = header.value("meta", json::object());
  ck.model = create_model(config, header.at("vocab_size").get<std::size_t>(), ck.seed);
  ck.model->read_payload(in);
  if (!in) throw std::runtime_error(path.string() + ": truncated checkpoint");
  return ck;
}

}  // namespace verse::lm
