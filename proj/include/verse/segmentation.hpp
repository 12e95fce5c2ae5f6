#pragma once

// Phrase splitting, random phrase merging and block grouping used to turn
// plain prose into training blocks.

#include "verse/common.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace verse::segmentation {

inline constexpr double kMergeTwoProb = 0.05;
inline constexpr double kMergeOneProb = 0.15;
inline constexpr std::size_t kMinBlock = 3;
inline constexpr std::size_t kMaxBlock = 10;

struct Phrase {
  std::string text;             // trimmed, whitespace-collapsed, non-empty
  bool ends_paragraph = false;  // a newline followed in the source
  std::string delimiter;        // delimiter characters that followed the text

  bool operator==(const Phrase&) const = default;
};

struct Block {
  std::vector<Phrase> phrases;

  std::size_t size() const { return phrases.size(); }
};

bool is_delimiter(char32_t c);

std::vector<Phrase> split_phrases(std::string_view text);

struct MergeStats {
  std::size_t draws = 0;
  std::size_t merge_one = 0;
  std::size_t merge_two = 0;
};

// `uniform` returns draws in [0, 1). One draw per unconsumed phrase:
// u < 0.05 merges the next two phrases, u < 0.20 the next one.
std::vector<Phrase> merge_phrases(std::vector<Phrase> phrases,
                                  const std::function<double()>& uniform,
                                  MergeStats* stats = nullptr);
std::vector<Phrase> merge_phrases(std::vector<Phrase> phrases, Rng& rng,
                                  MergeStats* stats = nullptr);

// `draw_size` returns the requested size of the next block; the trailing
// remainder forms a shorter final block.
std::vector<Block> group_blocks(std::vector<Phrase> phrases,
                                const std::function<std::size_t()>& draw_size);
std::vector<Block> group_blocks(std::vector<Phrase> phrases, Rng& rng);

// split -> merge -> group for one document.
std::vector<Block> segment_document(std::string_view text, Rng& rng);

enum class CorpusLayout {
  file_per_document,  // every file is one document
  blank_line_separated,
};

// A directory yields its regular files in name order; a single file is read
// according to `layout`. Unreadable files are skipped with a warning.
std::vector<std::string> load_documents(const std::filesystem::path& path, CorpusLayout layout);

std::vector<std::string> split_on_blank_lines(std::string_view text);

}  // namespace verse::segmentation
