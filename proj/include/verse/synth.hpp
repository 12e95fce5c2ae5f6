#pragma once

// Synthetic Spanish-like prose and poems for desk-scale experiments.
//
// Words are built from consonant-vowel syllables (optionally a
// consonant-cluster onset and a final n/s/r/l), so the rule engine syllabifies
// them unambiguously. Content words follow a Zipf law, and their endings
// come from a small inventory, which concentrates rhyme classes the way
// natural text does. Phrases come from part-of-speech
// templates that always end in a content word; nouns carry a few preferred
// adjectives and verbs, giving the text learnable local structure.

#include "verse/common.hpp"
#include "verse/descriptor.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace verse::synth {

struct Word {
  std::string text;
  std::size_t syllables;
  std::string rhyme;
};

struct Poem {
  descriptor::RhymeScheme scheme;
  std::vector<std::string> lines;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t nouns = 700;
  std::size_t verbs = 450;
  std::size_t adjectives = 350;
  double zipf = 1.0;
  // Relative weights of 1-, 2- and 3-syllable content words.
  std::array<double, 3> syllable_weights = {0.15, 0.50, 0.35};
  // Polysyllabic content words take their rhyme class from this many
  // endings, Zipf-weighted, as suffixes do in natural lexicons. 0 leaves
  // endings free.
  std::size_t rhyme_endings = 24;
};

class Generator {
 public:
  explicit Generator(const GeneratorConfig& config = {});

  std::string phrase(Rng& rng) const;
  std::string sentence(Rng& rng) const;
  // Paragraphs separated by blank lines; roughly `words` words.
  std::string document(Rng& rng, std::size_t words) const;
  // Documents totalling at least `target_words` whitespace tokens.
  std::vector<std::string> corpus(std::size_t target_words, std::size_t words_per_doc, std::uint64_t seed) const;

  // A phrase of exactly `syllables` syllables ending in a word of class
  // `rhyme` (any class when nullopt). Words in `avoid` are not used as the
  // final word. nullopt when no such phrase was found.
  std::optional<std::string> line(Rng& rng, std::size_t syllables, const std::optional<std::string>& rhyme,
                                  const std::vector<std::string>& avoid = {}) const;

  // Lines satisfying the scheme, each letter bound to a distinct class from
  // `pool`. nullopt when the pool cannot supply the letters.
  std::optional<Poem> poem(Rng& rng, const descriptor::RhymeScheme& scheme,
                           const std::vector<std::string>& pool) const;

  const std::vector<Word>& words() const { return content_; }
  // Rhyme classes with the most content words, ties by key.
  std::vector<std::string> common_rhymes(std::size_t n) const;

 private:
  enum Pos { noun, verb, adj, det, prep, conj, neg, refl };
  std::size_t pick(Rng& rng, Pos pos) const;
  std::string render(Rng& rng, const std::vector<Pos>& tmpl, std::vector<std::size_t>* chosen) const;

  std::vector<Word> content_;
  std::map<Pos, std::vector<std::size_t>> by_pos_;        // indices into content_
  std::map<Pos, std::vector<double>> cumulative_;         // Zipf CDF per POS
  std::map<Pos, std::vector<std::string>> function_words_;
  std::map<std::size_t, std::vector<std::size_t>> companions_;  // noun -> preferred adj/verb
  std::map<std::string, std::map<Pos, std::vector<std::size_t>>> by_rhyme_;
  std::vector<std::vector<Pos>> templates_;
};

// Poem set file: records separated by blank lines, each starting with
// "# scheme: <DSL>" followed by one verse per line.
void write_poems(const std::filesystem::path& path, const std::vector<Poem>& poems);
std::vector<Poem> read_poems(const std::filesystem::path& path);

// One file per document, named doc_000000.txt, ...
void write_corpus(const std::filesystem::path& dir, const std::vector<std::string>& documents);

}  // namespace verse::synth
