#include "lm_backends.hpp"

#include "verse/log.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

namespace verse::lm::detail {
namespace {

// Interpolated Witten-Bell smoothing down to a uniform distribution.
class NGram final : public LanguageModel {
 public:
  NGram(const ModelConfig& config, std::size_t vocab) : config_(config), vocab_(vocab), tables_(config.order) {}

  const ModelConfig& config() const override { return config_; }
  std::size_t vocab_size() const override { return vocab_; }

  TrainReport fit(const TokenStream& train, const TokenStream& heldout, const TrainConfig&) override {
    TrainReport report;
    if (!heldout.tokens.empty()) report.initial_heldout_loss = heldout_loss(heldout);
    for (auto& t : tables_) t.clear();
    const auto& toks = train.tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      for (std::size_t n = 0; n < config_.order && n <= i; ++n) {
        auto& ctx = tables_[n][key(toks.data() + i - n, n)];
        if (ctx.next[toks[i]]++ == 0) ++ctx.types;
        ++ctx.total;
      }
    }
    if (!heldout.tokens.empty()) {
      report.final_heldout_loss = heldout_loss(heldout);
      report.step_loss.push_back(*report.final_heldout_loss);
      log::info("n-gram order ", config_.order, " held-out loss ", *report.final_heldout_loss);
    }
    return report;
  }

  std::vector<double> score(std::span<const TokenId> tokens) const override {
    std::vector<double> out;
    out.reserve(tokens.size() - 1);
    for (std::size_t i = 1; i < tokens.size(); ++i) out.push_back(std::log(prob(tokens.subspan(0, i), tokens[i])));
    return out;
  }

  std::vector<double> next_log_probs(std::span<const TokenId> context) const override {
    std::vector<double> p(vocab_, 1.0 / static_cast<double>(vocab_));
    for (std::size_t n = 0; n < config_.order && n <= context.size(); ++n) {
      const auto it = tables_[n].find(key(context.data() + context.size() - n, n));
      if (it == tables_[n].end()) break;
      const auto& ctx = it->second;
      const double denom = static_cast<double>(ctx.total + ctx.types);
      const double lambda = static_cast<double>(ctx.types) / denom;
      for (auto& v : p) v *= lambda;
      for (const auto& [w, c] : ctx.next) p[static_cast<std::size_t>(w)] += static_cast<double>(c) / denom;
    }
    for (auto& v : p) v = std::log(v);
    return p;
  }

  std::unique_ptr<Decoder> decoder() const override { return std::make_unique<NGramDecoder>(*this); }

  void write_payload(std::ostream& out) const override {
    for (const auto& table : tables_) {
      // Ordered for byte-identical checkpoints.
      std::map<std::uint64_t, const Context*> ordered;
      for (const auto& [k, ctx] : table) ordered.emplace(k, &ctx);
      write_u64(out, ordered.size());
      for (const auto& [k, ctx] : ordered) {
        write_u64(out, k);
        std::map<TokenId, std::uint64_t> next(ctx->next.begin(), ctx->next.end());
        write_u64(out, next.size());
        for (const auto& [w, c] : next) {
          write_u64(out, static_cast<std::uint64_t>(w));
          write_u64(out, c);
        }
      }
    }
  }

  void read_payload(std::istream& in) override {
    for (auto& table : tables_) {
      table.clear();
      const auto contexts = read_u64(in);
      for (std::uint64_t i = 0; i < contexts && in; ++i) {
        auto& ctx = table[read_u64(in)];
        const auto entries = read_u64(in);
        for (std::uint64_t e = 0; e < entries && in; ++e) {
          const auto w = static_cast<TokenId>(read_u64(in));
          const auto c = read_u64(in);
          ctx.next[w] = c;
          ctx.total += c;
          ++ctx.types;
        }
      }
    }
  }

 private:
  struct Context {
    std::unordered_map<TokenId, std::uint64_t> next;
    std::uint64_t total = 0;
    std::uint64_t types = 0;
  };

  class NGramDecoder final : public Decoder {
   public:
    explicit NGramDecoder(const NGram& m) : m_(m) {}
    void push(TokenId t) override {
      if (history_.size() >= m_.context_limit()) throw std::length_error("decoder context is full");
      history_.push_back(t);
    }
    std::vector<double> log_probs() const override { return m_.next_log_probs(history_); }
    std::size_t length() const override { return history_.size(); }

   private:
    const NGram& m_;
    std::vector<TokenId> history_;
  };

  static std::uint64_t key(const TokenId* ctx, std::size_t n) {
    std::uint64_t k = n;
    for (std::size_t i = 0; i < n; ++i) k = (k << 21) | static_cast<std::uint64_t>(ctx[i]);
    return k;
  }

  double prob(std::span<const TokenId> context, TokenId w) const {
    double p = 1.0 / static_cast<double>(vocab_);
    for (std::size_t n = 0; n < config_.order && n <= context.size(); ++n) {
      const auto it = tables_[n].find(key(context.data() + context.size() - n, n));
      if (it == tables_[n].end()) break;
      const auto& ctx = it->second;
      const auto c = ctx.next.find(w);
      const double count = c == ctx.next.end() ? 0.0 : static_cast<double>(c->second);
      p = (count + static_cast<double>(ctx.types) * p) / static_cast<double>(ctx.total + ctx.types);
    }
    return p;
  }

  double heldout_loss(const TokenStream& s) const {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < s.tokens.size(); ++i) {
      const std::size_t from = i >= config_.order ? i - config_.order + 1 : 0;
      total -= std::log(prob(std::span(s.tokens).subspan(from, i - from), s.tokens[i]));
      ++n;
    }
    return n ? total / static_cast<double>(n) : 0.0;
  }

  static void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
  static std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  }

  ModelConfig config_;
  std::size_t vocab_;
  std::vector<std::unordered_map<std::uint64_t, Context>> tables_;
};

}  // namespace

std::unique_ptr<LanguageModel> make_ngram(const ModelConfig& config, std::size_t vocab_size) {
  if (vocab_size >= (1u << 21)) throw std::invalid_argument("n-gram backend supports at most 2^21 token ids");
  return std::make_unique<NGram>(config, vocab_size);
}

}  // namespace verse::lm::detail
