#pragma once

// Naive second implementation of the candidate filters, used only for
// differential testing. Phonology comes from the gold lists, BLEU is
// recomputed from scratch; nothing is shared with verse::constraints.

#include "gold.hpp"

#include "verse/common.hpp"
#include "verse/descriptor.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace verse::testing {

struct OracleWord {
  std::vector<std::string> syllables;
  std::optional<std::size_t> stress;
};

struct OracleVerdict {
  bool pass = true;
  int reason = -1;  // same numbering as constraints::Reason
};

class ConstraintOracle {
 public:
  explicit ConstraintOracle(Language lang) : lang_(lang) {
    for (auto& g : load_gold_words(lang == Language::spanish ? "gold_es.tsv" : "gold_eu.tsv")) {
      words_.push_back(g.word);
      table_[lower(g.word)] = OracleWord{g.syllables, g.stress};
    }
  }

  const std::vector<std::string>& vocabulary() const { return words_; }
  Language language() const { return lang_; }

  static std::string lower(std::string s) {
    static const std::pair<const char*, const char*> upper[] = {
        {"Ñ", "ñ"}, {"Á", "á"}, {"É", "é"}, {"Í", "í"}, {"Ó", "ó"}, {"Ú", "ú"}};
    for (const auto& [u, l] : upper) {
      for (std::size_t p = s.find(u); p != std::string::npos; p = s.find(u, p)) s.replace(p, 2, l);
    }
    for (char& c : s)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
  }

  static std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ' ') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  std::size_t word_syllables(const std::string& w) const {
    const auto it = table_.find(lower(w));
    return it == table_.end() ? 1 : it->second.syllables.size();
  }

  std::size_t line_syllables(const std::string& line) const {
    std::size_t n = 0;
    for (const auto& w : tokens(line)) n += word_syllables(w);
    return n;
  }

  // Rhyme key of the line's last word, or nullopt (no rhyme).
  std::optional<std::string> line_rhyme(const std::string& line) const {
    const auto toks = tokens(line);
    if (toks.empty()) return std::nullopt;
    const auto it = table_.find(lower(toks.back()));
    if (it == table_.end()) return std::nullopt;
    const auto& syl = it->second.syllables;
    std::vector<std::string> lowered;
    for (const auto& s : syl) lowered.push_back(lower(s));

    std::size_t si = 0;
    std::size_t offset = 0;
    if (lang_ == Language::spanish) {
      si = *it->second.stress;
      offset = stressed_offset(lowered[si]);
    } else {
      si = syl.size() >= 2 ? syl.size() - 2 : 0;
      offset = first_vowel_offset(lowered[si]);
    }
    std::string suffix = lowered[si].substr(offset);
    for (std::size_t k = si + 1; k < lowered.size(); ++k) suffix += lowered[k];
    std::string key = strip_accents(suffix);
    if (lang_ == Language::basque) {
      for (char& c : key) {
        if (c == 't' || c == 'k') c = 'p';
        else if (c == 'm') c = 'n';
        else if (c == 'z' || c == 'x') c = 's';
        else if (c == 'd' || c == 'g' || c == 'r') c = 'b';
      }
    }
    return key;
  }

  static double bleu_one_way(const std::vector<std::string>& h, const std::vector<std::string>& r) {
    if (h.empty() || r.empty()) return 0.0;
    double logs = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::string, int> hc, rc;
      for (std::size_t i = 0; i + n <= h.size(); ++i) hc[join(h, i, n)]++;
      for (std::size_t i = 0; i + n <= r.size(); ++i) rc[join(r, i, n)]++;
      int match = 0, total = 0;
      for (auto& [g, c] : hc) {
        total += c;
        match += std::min(c, rc.count(g) ? rc[g] : 0);
      }
      if (n == 1 && match == 0) return 0.0;
      logs += n == 1 ? std::log(double(match) / total) : std::log((match + 1.0) / (total + 1.0));
    }
    const double bp = h.size() > r.size() ? 1.0 : std::exp(1.0 - double(r.size()) / double(h.size()));
    return 100.0 * bp * std::exp(logs / 4.0);
  }

  static double bleu(const std::string& a, const std::string& b) {
    const auto ta = tokens(lower(a));
    const auto tb = tokens(lower(b));
    return std::max(bleu_one_way(ta, tb), bleu_one_way(tb, ta));
  }

  OracleVerdict check(const std::vector<std::string>& lines,
                      const descriptor::StructureDescriptor& desc) const {
    if (lines.size() != desc.lines.size()) return {false, 0};
    for (std::size_t i = 0; i < lines.size(); ++i)
      if (line_syllables(lines[i]) != desc.lines[i].syllables) return {false, 1};
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!desc.lines[i].rhyme) continue;
      const auto got = line_rhyme(lines[i]);
      if (!got || *got != *desc.lines[i].rhyme) return {false, 2};
    }
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (std::size_t j = i + 1; j < lines.size(); ++j)
        if (desc.lines[i].rhyme && desc.lines[i].rhyme == desc.lines[j].rhyme &&
            lower(tokens(lines[i]).back()) == lower(tokens(lines[j]).back()))
          return {false, 3};
    double mx = 0.0, sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        const double b = bleu(lines[i], lines[j]);
        mx = std::max(mx, b);
        sum += b;
        ++pairs;
      }
    const double mean = pairs ? sum / pairs : 0.0;
    if (mx > 35.0 || mean > 20.0) return {false, 4};
    return {};
  }

 private:
  static std::string join(const std::vector<std::string>& t, std::size_t i, std::size_t n) {
    std::string s;
    for (std::size_t k = 0; k < n; ++k) s += t[i + k] + '\x1f';
    return s;
  }

  static bool starts_with_any(const std::string& s, std::size_t pos,
                              std::initializer_list<const char*> options) {
    for (const char* o : options)
      if (s.compare(pos, std::char_traits<char>::length(o), o) == 0) return true;
    return false;
  }

  // Byte offset of the stressed vowel inside a stressed syllable.
  static std::size_t stressed_offset(const std::string& s) {
    for (std::size_t p = 0; p < s.size(); ++p)
      if (starts_with_any(s, p, {"á", "é", "í", "ó", "ú"})) return p;
    for (std::size_t p = 0; p < s.size(); ++p)
      if (s[p] == 'a' || s[p] == 'e' || s[p] == 'o') return p;
    std::size_t last = std::string::npos;
    for (std::size_t p = 0; p < s.size(); ++p)
      if (s[p] == 'i' || s[p] == 'u' || starts_with_any(s, p, {"ü"})) last = p;
    return last == std::string::npos ? 0 : last;
  }

  static std::size_t first_vowel_offset(const std::string& s) {
    for (std::size_t p = 0; p < s.size(); ++p)
      if (std::string("aeiou").find(s[p]) != std::string::npos) return p;
    return 0;
  }

  static std::string strip_accents(std::string s) {
    static const std::pair<const char*, const char*> map[] = {
        {"á", "a"}, {"é", "e"}, {"í", "i"}, {"ó", "o"}, {"ú", "u"}, {"ü", "u"}};
    for (const auto& [from, to] : map)
      for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p)) s.replace(p, 2, to);
    return s;
  }

  Language lang_;
  std::vector<std::string> words_;
  std::map<std::string, OracleWord> table_;
};

struct RandomCase {
  std::vector<std::string> lines;
  descriptor::StructureDescriptor desc;
};

// Random candidates over gold-list words with descriptors that pass, or
// fail at a random stage.
inline RandomCase random_case(const ConstraintOracle& oracle, Rng& rng) {
  const auto& vocab = oracle.vocabulary();
  auto pick = [&] { return vocab[static_cast<std::size_t>(rng.uniform_int(0, vocab.size() - 1))]; };
  RandomCase rc;
  const auto n = rng.uniform_int(1, 6);
  for (int i = 0; i < n; ++i) {
    std::string line;
    if (i > 0 && rng.uniform() < 0.08) {
      line = rc.lines[static_cast<std::size_t>(rng.uniform_int(0, i - 1))];
    } else {
      const auto w = rng.uniform_int(1, 5);
      for (int k = 0; k < w; ++k) line += (k ? " " : "") + (rng.uniform() < 0.03 ? std::string("1984") : pick());
      if (i > 0 && rng.uniform() < 0.25) {
        const auto& other = rc.lines[static_cast<std::size_t>(rng.uniform_int(0, i - 1))];
        line += " " + ConstraintOracle::tokens(other).back();
      }
    }
    rc.lines.push_back(line);
  }
  for (const auto& line : rc.lines) {
    descriptor::LineSpec spec{oracle.line_syllables(line), oracle.line_rhyme(line)};
    if (rng.uniform() < 0.06) spec.syllables += 1;
    const double u = rng.uniform();
    if (u < 0.15) spec.rhyme.reset();
    else if (u < 0.20) spec.rhyme = oracle.line_rhyme(pick());
    rc.desc.lines.push_back(spec);
  }
  if (rng.uniform() < 0.05) rc.desc.lines.push_back({3, std::nullopt});
  if (rng.uniform() < 0.05 && rc.desc.lines.size() > 1) rc.desc.lines.pop_back();
  return rc;
}

}  // namespace verse::testing
