#pragma once

// The candidate filter cascade: line count, syllables per line, rhyme,
// repeated rhyme words and line-to-line BLEU.

#include "verse/common.hpp"
#include "verse/descriptor.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace verse::constraints {

// Priority order: the reported reason is the first failing one.
enum class Reason { line_count = 0, syllables = 1, rhyme = 2, repeated_word = 3, bleu = 4 };
inline constexpr std::array<Reason, 5> kAllReasons = {Reason::line_count, Reason::syllables,
                                                      Reason::rhyme, Reason::repeated_word,
                                                      Reason::bleu};

std::string_view reason_name(Reason r);

struct Rejection {
  Reason reason;
  std::vector<std::size_t> lines;  // offending line indices
  std::string detail;

  bool operator==(const Rejection&) const = default;
};

using Verdict = std::optional<Rejection>;  // nullopt = pass

struct LineAnalysis {
  std::size_t syllables = 0;
  std::optional<std::string> rhyme;  // nullopt when the line has no rhyme class
  std::optional<std::string> final_word;
};

struct Candidate {
  std::vector<std::string> lines;
  std::vector<TokenId> raw_tokens;
  std::vector<LineAnalysis> analysis;
  std::size_t index = 0;  // generation order

  std::string text(std::string_view separator = "\n") const;
};

Candidate make_candidate(std::vector<std::string> lines, Language lang,
                         std::vector<TokenId> raw_tokens = {}, std::size_t index = 0);

inline constexpr double kMaxPairBleu = 35.0;
inline constexpr double kMeanPairBleu = 20.0;

struct CheckOptions {
  std::array<bool, 5> enabled = {true, true, true, true, true};
  double max_bleu = kMaxPairBleu;
  double mean_bleu = kMeanPairBleu;

  CheckOptions& disable(Reason r) {
    enabled[static_cast<std::size_t>(r)] = false;
    return *this;
  }
};

// `evaluation_order` only changes the order checks run in; the reported
// reason is always the highest-priority failure.
Verdict check_candidate(const Candidate& cand, const descriptor::StructureDescriptor& desc,
                        const CheckOptions& options = {},
                        std::span<const Reason> evaluation_order = kAllReasons);

// BLEU-4 of `hypothesis` against `reference` on 0..100: uniform weights,
// add-one smoothing for n >= 2, brevity penalty, case-folded whitespace
// tokens.
double directional_bleu(std::string_view hypothesis, std::string_view reference);
// max(bleu(a, b), bleu(b, a)); 0 when either line is empty.
double sentence_bleu(std::string_view a, std::string_view b);

struct PairwiseBleu {
  double max = 0.0;
  double mean = 0.0;  // over unordered pairs
};
PairwiseBleu pairwise_bleu(std::span<const std::string> lines);

// Splits unbroken text into lines of the given syllable counts at word
// boundaries. Words left after the last line are dropped. nullopt when a
// boundary falls inside a word or the text runs out.
std::optional<std::vector<std::string>> split_by_syllables(std::string_view text,
                                                           std::span<const std::size_t> counts,
                                                           Language lang);

nlohmann::json verdict_record(const Candidate& cand, const Verdict& verdict);

}  // namespace verse::constraints
