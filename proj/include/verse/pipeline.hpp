#pragma once

// Poem generation: bind a scheme to a descriptor, sample k candidates,
// filter them, and rerank the survivors by unconditioned fluency.

#include "verse/constraints.hpp"
#include "verse/descriptor.hpp"
#include "verse/lm.hpp"
#include "verse/tokenizer.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace verse::pipeline {

// PoeLM samples after a descriptor prefix and breaks lines with <BRK>; the
// baseline writes running text that is split by syllable counts.
enum class ModelKind { poelm, baseline };

std::string_view kind_name(ModelKind kind);
std::optional<ModelKind> parse_kind(std::string_view name);

struct Generator {
  const lm::LanguageModel& model;
  const tokenizer::Vocab& vocab;
  Language lang = Language::spanish;
  ModelKind kind = ModelKind::poelm;
  lm::SampleConfig sampling;
};

struct RunConfig {
  std::size_t k = 200;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::size_t pool_size = 5;
  bool force = false;
};

// Sampling prefix for PoeLM: descriptor, then the first line and <BRK>.
std::vector<TokenId> poelm_prefix(const Generator& gen, const descriptor::StructureDescriptor& desc,
                                  std::optional<std::string_view> first_line);

// Candidate i is sampled with seed derive_seed(seed, i). Baseline samples
// whose text cannot be split by the descriptor's syllable counts come back
// as a single unsplit line.
std::vector<constraints::Candidate> generate_candidates(const Generator& gen,
                                                        const descriptor::StructureDescriptor& desc,
                                                        std::optional<std::string_view> first_line,
                                                        std::size_t k, std::uint64_t seed, std::size_t jobs = 1);

// Filter verdict. For the baseline an unsplit candidate is a SYLLABLES
// rejection and the repeated-word and BLEU checks are skipped.
constraints::Verdict evaluate(ModelKind kind, const constraints::Candidate& cand,
                              const descriptor::StructureDescriptor& desc, bool with_bleu = true);

// Mean per-token log-likelihood of the candidate's plain text, without any
// descriptor. -infinity when the text has fewer than two tokens.
double fluency(const Generator& gen, const constraints::Candidate& cand);

struct Ranked {
  const constraints::Candidate* candidate;
  double score;
};

// Descending fluency; ties go to the earlier generation index.
std::vector<Ranked> rerank(const Generator& gen, std::span<const constraints::Candidate* const> survivors,
                           std::size_t jobs = 1);

struct CandidateResult {
  constraints::Candidate candidate;
  constraints::Verdict verdict;             // all five checks
  constraints::Verdict structural_verdict;  // BLEU skipped
  std::optional<double> fluency;            // scored when it passes either filter
};

struct GenerationRun {
  descriptor::RhymeScheme scheme;
  descriptor::StructureDescriptor desc;
  std::optional<std::string> first_line;
  ModelKind kind = ModelKind::poelm;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<CandidateResult> candidates;
  std::vector<std::size_t> ranked;           // full-filter survivors, best first
  std::vector<std::size_t> ranked_no_bleu;   // checks 1-4 survivors, best first
  std::array<std::size_t, 5> rejections{};   // by Reason
  double seconds = 0.0;                      // wall time, not written to artifacts

  std::size_t survivors() const { return ranked.size(); }
  const CandidateResult* best() const { return ranked.empty() ? nullptr : &candidates[ranked.front()]; }
};

GenerationRun run_generation(const Generator& gen, const descriptor::RhymeScheme& scheme,
                             std::optional<std::string_view> first_line, const RunConfig& cfg);

// Same as run_generation with an explicit descriptor.
GenerationRun run_with_descriptor(const Generator& gen, const descriptor::StructureDescriptor& desc,
                                  std::optional<std::string_view> first_line, const RunConfig& cfg);

// Top n/2 by rerank among full-filter survivors, then top n/2 among
// structural survivors, deduplicated in order. Returns candidate indices.
std::vector<std::size_t> top_n_listing(const GenerationRun& run, std::size_t n = 6);

struct NoValidPoem {
  std::array<std::size_t, 5> rejections{};
  std::size_t k = 0;
};

std::variant<constraints::Candidate, NoValidPoem> generate_poem(const Generator& gen,
                                                                const descriptor::RhymeScheme& scheme,
                                                                std::optional<std::string_view> first_line,
                                                                const RunConfig& cfg);

// Class pool for descriptor binding: the vocabulary's most frequent classes.
std::vector<std::string> class_pool(const tokenizer::Vocab& vocab, std::size_t size);

nlohmann::json candidate_record(const GenerationRun& run, std::size_t index);
nlohmann::json run_summary(const GenerationRun& run, const tokenizer::Vocab& vocab);
// Writes <stem>.candidates.jsonl and <stem>.summary.json.
void write_run_artifacts(const GenerationRun& run, const tokenizer::Vocab& vocab,
                         const std::filesystem::path& stem);

}  // namespace verse::pipeline
