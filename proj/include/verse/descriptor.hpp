#pragma once

// Structure descriptors: per-line syllable counts and rhyme classes written
// as control tokens ahead of each text block.

#include "verse/common.hpp"
#include "verse/segmentation.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace verse::descriptor {

inline constexpr std::size_t kLenMax = 100;
inline constexpr double kMaskProb = 0.15;

namespace token {
inline constexpr std::string_view kPref = "<PREF>";
inline constexpr std::string_view kPrefEnd = "</PREF>";
inline constexpr std::string_view kSep = "<SEP>";
inline constexpr std::string_view kBrk = "<BRK>";
inline constexpr std::string_view kClsUnk = "<CLS_UNK>";

std::string len(std::size_t syllables);
std::string cls(std::string_view key);
std::optional<std::size_t> parse_len(std::string_view tok);
// nullopt for tokens that are not class tokens; an empty optional key inside
// for <CLS_UNK>.
std::optional<std::optional<std::string>> parse_cls(std::string_view tok);
bool is_control(std::string_view tok);
}  // namespace token

struct LineSpec {
  std::size_t syllables = 1;
  std::optional<std::string> rhyme;  // nullopt = UNK (unconstrained)

  bool operator==(const LineSpec&) const = default;
};

struct StructureDescriptor {
  std::vector<LineSpec> lines;
  std::set<std::size_t> sep_after;

  bool operator==(const StructureDescriptor&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

StructureDescriptor extract_descriptor(const segmentation::Block& block, Language lang);

StructureDescriptor mask_rhymes(StructureDescriptor desc, Rng& rng, double p = kMaskProb);

// Classes rejected by `known_class` are written as <CLS_UNK>. Counts above
// kLenMax are clamped.
std::vector<std::string> serialize_descriptor(
    const StructureDescriptor& desc,
    const std::function<bool(std::string_view)>& known_class = {});
std::string serialize_descriptor_text(
    const StructureDescriptor& desc,
    const std::function<bool(std::string_view)>& known_class = {});

StructureDescriptor parse_descriptor(std::span<const std::string> tokens);
StructureDescriptor parse_descriptor_text(std::string_view text);

// "a <BRK> b <BRK> c"
std::string block_text(const segmentation::Block& block);

// Removes every control token; <BRK> becomes a plain space.
std::string strip_control(std::string_view augmented);

class ClassFrequencyTable {
 public:
  void add(const std::string& key, std::uint64_t count = 1) { counts_[key] += count; }
  void merge(const ClassFrequencyTable& other);

  // Descending by count, ties by key.
  std::vector<std::pair<std::string, std::uint64_t>> ranked() const;
  std::vector<std::string> top(std::size_t n) const;
  std::size_t size() const { return counts_.size(); }

  void write(const std::filesystem::path& path) const;
  static ClassFrequencyTable read(const std::filesystem::path& path);

 private:
  std::map<std::string, std::uint64_t> counts_;
};

struct AugmentedCorpus {
  std::vector<std::string> lines;  // one "<PREF> ... </PREF> text" record per block
  ClassFrequencyTable class_freqs;  // unmasked rhyme classes
  std::size_t documents = 0;
  std::size_t blocks = 0;
  std::size_t line_specs = 0;
  std::size_t masked = 0;
};

// Documents are processed independently with seeds derived from
// (seed, document index); blocks never span documents.
AugmentedCorpus augment_corpus(std::span<const std::string> documents, Language lang,
                               std::uint64_t seed, double mask_p = kMaskProb,
                               std::size_t jobs = 1);

struct RhymeScheme {
  struct Item {
    std::size_t syllables;
    char letter;  // 'A'..'Z' or '-'
    bool operator==(const Item&) const = default;
  };
  std::vector<Item> items;

  bool operator==(const RhymeScheme&) const = default;
};

class SchemeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "11A 11B 11B 11A", "10- 8A 10- 8A"
RhymeScheme parse_scheme(std::string_view dsl);
std::string to_string(const RhymeScheme& scheme);

// Binds every distinct letter to a distinct class drawn from `class_pool`;
// a first line, when given, pins its letter to the line's own class.
StructureDescriptor build_descriptor_from_scheme(const RhymeScheme& scheme,
                                                 std::span<const std::string> class_pool,
                                                 Rng& rng, Language lang,
                                                 std::optional<std::string_view> first_line = {},
                                                 bool force = false);

}  // namespace verse::descriptor
