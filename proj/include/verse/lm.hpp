#pragma once

// Autoregressive language models over token ids. Two backends share one
// interface: a small decoder-only transformer (trainable by gradient
// descent) and an interpolated Witten-Bell n-gram model.

#include "verse/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace verse::lm {

struct ModelConfig {
  std::string backend = "transformer";  // "transformer" | "ngram"
  std::size_t context = 512;
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::string precision = "float";  // "float" | "double"
  double init_std = 0.02;
  std::size_t order = 3;  // n-gram only

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 1000;
  std::size_t batch = 16;
  double lr = 3e-3;
  std::size_t warmup = 100;
  double min_lr_ratio = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip = 1.0;
  std::size_t log_every = 100;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct SampleConfig {
  double temperature = 1.0;
  std::size_t top_k = 50;  // 0 = full distribution
  std::size_t max_new = 256;
  std::set<TokenId> stop;

  nlohmann::json to_json() const;
  static SampleConfig from_json(const nlohmann::json& j);
};

// A token stream plus the offsets where records (blocks) begin. Training
// windows start at record boundaries.
struct TokenStream {
  std::vector<TokenId> tokens;
  std::vector<std::size_t> starts;

  void append_record(std::span<const TokenId> record);
};

struct TrainReport {
  std::vector<double> step_loss;
  std::optional<double> initial_heldout_loss;
  std::optional<double> final_heldout_loss;
};

// Incremental decoding state (key/value cache for the transformer).
class Decoder {
 public:
  virtual ~Decoder() = default;
  // Consumes one token; throws std::length_error past the context limit.
  virtual void push(TokenId token) = 0;
  // Log-probabilities of the next token given everything pushed so far.
  virtual std::vector<double> log_probs() const = 0;
  virtual std::size_t length() const = 0;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const ModelConfig& config() const = 0;
  virtual std::size_t vocab_size() const = 0;
  std::size_t context_limit() const { return config().context; }

  // Fits the model in place. `heldout` may be empty.
  virtual TrainReport fit(const TokenStream& train, const TokenStream& heldout, const TrainConfig& cfg) = 0;

  // log p(tokens[i] | tokens[..i]) for i = 1..n-1. Sequences longer than the
  // context are scored with overlapping windows.
  virtual std::vector<double> score(std::span<const TokenId> tokens) const = 0;

  // Log-probabilities of the next token; only the last context_limit()
  // tokens are used.
  virtual std::vector<double> next_log_probs(std::span<const TokenId> context) const = 0;

  virtual std::unique_ptr<Decoder> decoder() const = 0;

  virtual void write_payload(std::ostream& out) const = 0;
  virtual void read_payload(std::istream& in) = 0;

  void check_ids(std::span<const TokenId> tokens) const;
};

// Parameter-level access for the gradient check.
class Differentiable {
 public:
  virtual ~Differentiable() = default;
  virtual std::size_t parameter_count() const = 0;
  virtual double parameter(std::size_t i) const = 0;
  virtual void set_parameter(std::size_t i, double value) = 0;
  // Mean next-token cross-entropy over `tokens` and its gradient.
  virtual double loss_and_gradient(std::span<const TokenId> tokens, std::vector<double>& grad) const = 0;
};

// Freshly initialized (untrained) model.
std::unique_ptr<LanguageModel> create_model(const ModelConfig& config, std::size_t vocab_size,
                                            std::uint64_t seed);

// Errors if the stream is shorter than one context window.
std::unique_ptr<LanguageModel> train_lm(const TokenStream& train, const TokenStream& heldout,
                                        const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                        std::size_t vocab_size, TrainReport* report = nullptr);

class NoScoredTokens : public std::domain_error {
 public:
  NoScoredTokens() : std::domain_error("every position is excluded; perplexity is undefined") {}
};

struct LogLikelihood {
  double total = 0.0;
  std::vector<double> per_token;  // position i+1 given its prefix
  std::vector<bool> excluded;
  std::size_t included = 0;

  double perplexity() const;
  double mean() const;
};

// Throws NoScoredTokens when every target is excluded, std::invalid_argument
// for fewer than two tokens, std::out_of_range for ids outside the vocabulary.
LogLikelihood log_likelihood(const LanguageModel& model, std::span<const TokenId> tokens,
                             const std::set<TokenId>& exclude = {});

enum class StopReason { stop_token, max_new, context };

struct SampleResult {
  std::vector<TokenId> tokens;  // generated tokens, stop token excluded
  StopReason reason = StopReason::max_new;
  std::optional<TokenId> stop_token;
};

// Draws one token from log-probabilities. Temperature at or below 1e-6
// selects the argmax (lowest id on ties).
TokenId draw(std::span<const double> log_probs, const SampleConfig& cfg, Rng& rng);

SampleResult sample(const LanguageModel& model, std::span<const TokenId> prefix, Rng& rng,
                    const SampleConfig& cfg);

struct Checkpoint {
  std::unique_ptr<LanguageModel> model;
  std::uint64_t vocab_hash = 0;
  std::uint64_t seed = 0;
  nlohmann::json meta;
};

void save_checkpoint(const LanguageModel& model, const std::filesystem::path& path, std::uint64_t vocab_hash,
                     std::uint64_t seed, const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace verse::lm
