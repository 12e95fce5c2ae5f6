#pragma once

// Automatic evaluations: filtering rates, perplexity with and without the
// structure prefix, and the per-position log-probability advantage curve.

#include "verse/pipeline.hpp"
#include "verse/segmentation.hpp"
#include "verse/synth.hpp"

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace verse::evalkit {

struct Prompt {
  std::string first_line;
  descriptor::RhymeScheme scheme;
};

// Prompts taken from a poem set: each poem's scheme and first line.
std::vector<Prompt> prompts_from_poems(const std::vector<synth::Poem>& poems);

struct FilteringRow {
  std::string model;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::array<std::size_t, constraints::kAllReasons.size()> rejections{};
  std::size_t prompts_failed = 0;  // prompts whose scheme could not be bound

  // Correct followed by the five rejection reasons, in hundredths of a
  // percent. Rounded by largest remainder so the six always sum to 10000.
  std::array<long, constraints::kAllReasons.size() + 1> basis_points() const;
};

struct FilteringReport {
  std::vector<FilteringRow> rows;
  std::vector<pipeline::GenerationRun> runs;  // per model, per prompt
};

// Both generators run every prompt with the same RunConfig; prompt p uses
// seed derive_seed(cfg.seed, p).
FilteringReport filtering_rate_report(const pipeline::Generator& poelm, const pipeline::Generator& baseline,
                                      const std::vector<Prompt>& prompts, const pipeline::RunConfig& cfg);

void write_filtering_csv(std::ostream& out, const FilteringReport& report);
void write_filtering_summary(std::ostream& out, const FilteringReport& report);

// A scored evaluation unit: one block as a list of verses.
using EvalBlock = std::vector<std::string>;

std::vector<EvalBlock> blocks_from_poems(const std::vector<synth::Poem>& poems);
// Prose is segmented exactly like training text.
std::vector<EvalBlock> blocks_from_documents(const std::vector<std::string>& documents, std::uint64_t seed);

struct PerplexityCell {
  double log_prob = 0.0;
  std::size_t tokens = 0;
  double perplexity() const;
};

struct PerplexityReport {
  static constexpr std::array<const char*, 3> kRows = {"baseline", "poelm_structure", "poelm_no_structure"};
  static constexpr std::array<const char*, 2> kColumns = {"poetic", "prose"};
  std::array<std::array<PerplexityCell, 2>, 3> cells{};
};

// All three rows score the same tokens: the text tokens of each block except
// its first, which the baseline sees without context. The descriptor and
// <BRK> are context only.
PerplexityReport perplexity_report(const lm::LanguageModel& poelm, const lm::LanguageModel& baseline,
                                   const tokenizer::Vocab& vocab, const std::vector<EvalBlock>& poetic,
                                   const std::vector<EvalBlock>& prose, Language lang, std::size_t jobs = 1);

void write_perplexity_csv(std::ostream& out, const PerplexityReport& report);
void write_perplexity_summary(std::ostream& out, const PerplexityReport& report);

class EmptyCurve : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurveConfig {
  std::size_t min_tokens = 15;
  std::size_t max_tokens = 25;
  std::size_t grid = 101;
};

struct Curve {
  std::vector<double> x;
  std::vector<double> advantage;  // mean log p_poelm - log p_baseline
  std::size_t lines = 0;

  // Mean advantage over grid points with lo <= x <= hi.
  double mean_over(double lo, double hi) const;
};

// Per line (after the first of each block), token positions run from 0 at
// the first token to 1 at the line-final token.
Curve rhyme_proximity_curve(const lm::LanguageModel& poelm, const lm::LanguageModel& baseline,
                            const tokenizer::Vocab& vocab, const std::vector<EvalBlock>& blocks, Language lang,
                            const CurveConfig& cfg = {}, std::size_t jobs = 1);

void write_curve_csv(std::ostream& out, const Curve& curve);
void write_curve_summary(std::ostream& out, const Curve& curve);

}  // namespace verse::evalkit
