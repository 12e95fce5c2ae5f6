#pragma once

#include "verse/lm.hpp"

namespace verse::lm::detail {

std::unique_ptr<LanguageModel> make_transformer(const ModelConfig& config, std::size_t vocab_size,
                                                std::uint64_t seed);
std::unique_ptr<LanguageModel> make_ngram(const ModelConfig& config, std::size_t vocab_size);

// Numerically stable log-softmax of `logits` into `out`.
template <class In>
void log_softmax(const In& logits, std::size_t n, std::vector<double>& out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(static_cast<double>(logits[i]) - mx);
  const double lse = mx + std::log(sum);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(logits[i]) - lse;
}

}  // namespace verse::lm::detail
