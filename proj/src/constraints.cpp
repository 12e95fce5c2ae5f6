#include "verse/constraints.hpp"

#include "verse/phonology.hpp"
#include "verse/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace verse::constraints {

std::string_view reason_name(Reason r) {
  switch (r) {
    case Reason::line_count: return "LINE_COUNT";
    case Reason::syllables: return "SYLLABLES";
    case Reason::rhyme: return "RHYME";
    case Reason::repeated_word: return "REPEATED_WORD";
    case Reason::bleu: return "BLEU";
  }
  return "?";
}

std::string Candidate::text(std::string_view separator) const {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += separator;
    out += lines[i];
  }
  return out;
}

Candidate make_candidate(std::vector<std::string> lines, Language lang,
                         std::vector<TokenId> raw_tokens, std::size_t index) {
  Candidate c;
  c.lines = std::move(lines);
  c.raw_tokens = std::move(raw_tokens);
  c.index = index;
  c.analysis.reserve(c.lines.size());
  for (const auto& line : c.lines) {
    LineAnalysis a;
    a.syllables = phonology::count_line_syllables(line, lang);
    const auto rc = phonology::rhyme_class(line, lang);
    if (!rc.is_none()) a.rhyme = rc.key();
    a.final_word = phonology::final_word(line);
    c.analysis.push_back(std::move(a));
  }
  return c;
}

namespace {

using descriptor::StructureDescriptor;

Verdict check_line_count(const Candidate& c, const StructureDescriptor& d) {
  if (c.lines.size() == d.lines.size()) return std::nullopt;
  return Rejection{Reason::line_count, {},
                   "observed " + std::to_string(c.lines.size()) + " lines, expected " +
                       std::to_string(d.lines.size())};
}

Verdict check_syllables(const Candidate& c, const StructureDescriptor& d) {
  const std::size_t n = std::min(c.lines.size(), d.lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (c.analysis[i].syllables != d.lines[i].syllables)
      return Rejection{Reason::syllables, {i},
                       "line " + std::to_string(i) + ": observed " +
                           std::to_string(c.analysis[i].syllables) + " syllables, expected " +
                           std::to_string(d.lines[i].syllables)};
  }
  return std::nullopt;
}

Verdict check_rhyme(const Candidate& c, const StructureDescriptor& d) {
  const std::size_t n = std::min(c.lines.size(), d.lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& want = d.lines[i].rhyme;
    if (!want) continue;
    const auto& got = c.analysis[i].rhyme;
    if (!got || *got != *want)
      return Rejection{Reason::rhyme, {i},
                       "line " + std::to_string(i) + ": observed rhyme '" + got.value_or("<none>") +
                           "', expected '" + *want + "'"};
  }
  return std::nullopt;
}

Verdict check_repeated_word(const Candidate& c, const StructureDescriptor& d) {
  const std::size_t n = std::min(c.lines.size(), d.lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!d.lines[i].rhyme) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d.lines[j].rhyme != d.lines[i].rhyme) continue;
      const auto& a = c.analysis[i].final_word;
      const auto& b = c.analysis[j].final_word;
      if (a && b && *a == *b)
        return Rejection{Reason::repeated_word, {i, j},
                         "lines " + std::to_string(i) + " and " + std::to_string(j) +
                             " both end in '" + *a + "'"};
    }
  }
  return std::nullopt;
}

Verdict check_bleu(const Candidate& c, const CheckOptions& o) {
  const auto stats = pairwise_bleu(c.lines);
  if (stats.max <= o.max_bleu && stats.mean <= o.mean_bleu) return std::nullopt;
  char buf[96];
  std::snprintf(buf, sizeof buf, "max pairwise BLEU %.4f, mean %.4f", stats.max, stats.mean);
  return Rejection{Reason::bleu, {}, buf};
}

}  // namespace

Verdict check_candidate(const Candidate& cand, const StructureDescriptor& desc,
                        const CheckOptions& options, std::span<const Reason> evaluation_order) {
  Verdict best;
  for (Reason r : evaluation_order) {
    if (!options.enabled[static_cast<std::size_t>(r)]) continue;
    if (best && static_cast<int>(best->reason) < static_cast<int>(r)) continue;
    Verdict v;
    switch (r) {
      case Reason::line_count: v = check_line_count(cand, desc); break;
      case Reason::syllables: v = check_syllables(cand, desc); break;
      case Reason::rhyme: v = check_rhyme(cand, desc); break;
      case Reason::repeated_word: v = check_repeated_word(cand, desc); break;
      case Reason::bleu: v = check_bleu(cand, options); break;
    }
    if (v && (!best || static_cast<int>(v->reason) < static_cast<int>(best->reason))) best = std::move(v);
  }
  return best;
}

namespace {

std::vector<std::string> bleu_tokens(std::string_view s) { return text::split_ws(text::fold(s)); }

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks,
                                                             std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

double bleu_tokens_score(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    std::size_t match = 0;
    for (const auto& [gram, count] : h) {
      const auto it = r.find(gram);
      if (it != r.end()) match += std::min(count, it->second);
    }
    const std::size_t total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    if (n == 1) {
      if (match == 0) return 0.0;
      log_sum += std::log(double(match) / double(total));
    } else {
      log_sum += std::log(double(match + 1) / double(total + 1));
    }
  }
  const double c = double(hyp.size());
  const double r = double(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

}  // namespace

double directional_bleu(std::string_view hypothesis, std::string_view reference) {
  return bleu_tokens_score(bleu_tokens(hypothesis), bleu_tokens(reference));
}

double sentence_bleu(std::string_view a, std::string_view b) {
  const auto ta = bleu_tokens(a);
  const auto tb = bleu_tokens(b);
  return std::max(bleu_tokens_score(ta, tb), bleu_tokens_score(tb, ta));
}

PairwiseBleu pairwise_bleu(std::span<const std::string> lines) {
  PairwiseBleu out;
  std::size_t pairs = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const double b = sentence_bleu(lines[i], lines[j]);
      out.max = std::max(out.max, b);
      sum += b;
      ++pairs;
    }
  }
  if (pairs) out.mean = sum / double(pairs);
  return out;
}

std::optional<std::vector<std::string>> split_by_syllables(std::string_view input,
                                                           std::span<const std::size_t> counts,
                                                           Language lang) {
  const auto words = text::split_ws(input);
  std::vector<std::string> lines;
  std::size_t w = 0;
  for (const std::size_t target : counts) {
    std::string line;
    std::size_t have = 0;
    while (have < target) {
      if (w >= words.size()) return std::nullopt;
      have += phonology::token_syllables(words[w], lang);
      if (!line.empty()) line += ' ';
      line += words[w++];
    }
    if (have != target) return std::nullopt;
    lines.push_back(std::move(line));
  }
  return lines;
}

nlohmann::json verdict_record(const Candidate& cand, const Verdict& verdict) {
  nlohmann::json lines = nlohmann::json::array();
  for (std::size_t i = 0; i < cand.lines.size(); ++i) {
    const auto& a = cand.analysis[i];
    lines.push_back({{"text", cand.lines[i]},
                     {"syllables", a.syllables},
                     {"rhyme", a.rhyme ? nlohmann::json(*a.rhyme) : nlohmann::json(nullptr)}});
  }
  nlohmann::json rec{{"index", cand.index},
                     {"text", cand.text()},
                     {"lines", lines},
                     {"verdict", verdict ? "reject" : "pass"}};
  if (verdict) {
    rec["reason"] = reason_name(verdict->reason);
    rec["detail"] = verdict->detail;
    rec["offending_lines"] = verdict->lines;
  } else {
    rec["reason"] = nullptr;
    rec["detail"] = nullptr;
  }
  return rec;
}

}  // namespace verse::constraints
