#pragma once

// Rule-based syllabification, stress and rhyme classes for Spanish and
// Basque. Synalephas are never applied: a line's syllable count is the sum
// of its words' counts.

#include "verse/common.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace verse::phonology {

struct SyllabifiedWord {
  std::string surface;                      // NFC form of the input
  std::vector<std::string> syllables;       // concatenate to `surface`
  std::optional<std::size_t> stress_index;  // Spanish only
};

// Normalized end-sound of a phrase. Two phrases rhyme when their keys are
// equal; the distinguished "no rhyme" class (final word without vowels)
// never matches anything, itself included.
class RhymeClass {
 public:
  RhymeClass(Language lang, std::string key) : lang_(lang), key_(std::move(key)) {}
  static RhymeClass none(Language lang) { return RhymeClass(lang); }

  Language language() const { return lang_; }
  bool is_none() const { return none_; }
  const std::string& key() const { return key_; }

 private:
  explicit RhymeClass(Language lang) : lang_(lang), none_(true) {}

  Language lang_;
  std::string key_;
  bool none_ = false;
};

bool same_rhyme(const RhymeClass& a, const RhymeClass& b);

SyllabifiedWord syllabify(std::string_view word, Language lang);

// Syllables in one whitespace-separated token; 0 for punctuation-only.
std::size_t token_syllables(std::string_view token, Language lang);

std::size_t count_line_syllables(std::string_view line, Language lang);

// Last token of the phrase carrying a letter or digit, case-folded and
// stripped of surrounding punctuation.
std::optional<std::string> final_word(std::string_view phrase);

RhymeClass rhyme_class(std::string_view phrase, Language lang);

bool rhymes(std::string_view a, std::string_view b, Language lang);

// Maps each consonant of a Basque rhyme key to its equivalence group
// representative: {p,t,k}->p, {n,m}->n, {s,z,x}->s, {b,d,g,r}->b.
std::string canonicalize_basque(std::string_view key);

}  // namespace verse::phonology
