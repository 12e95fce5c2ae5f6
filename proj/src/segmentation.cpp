#include "verse/segmentation.hpp"

#include "verse/log.hpp"
#include "verse/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace verse::segmentation {

bool is_delimiter(char32_t c) {
  static constexpr std::u32string_view kDelims = U"_-?\"!,:’‘()[].{}`;»«><'";
  return c == U'\n' || kDelims.find(c) != std::u32string_view::npos;
}

std::vector<Phrase> split_phrases(std::string_view input) {
  std::vector<Phrase> phrases;
  std::u32string current;
  auto flush = [&] {
    std::string t = text::normalize_ws(text::to_utf8(current));
    current.clear();
    if (!t.empty()) phrases.push_back(Phrase{std::move(t), false, {}});
  };
  for (char32_t c : text::to_u32(input)) {
    if (!is_delimiter(c)) {
      current.push_back(c);
      continue;
    }
    flush();
    if (phrases.empty()) continue;
    if (c == U'\n')
      phrases.back().ends_paragraph = true;
    else
      phrases.back().delimiter += text::to_utf8(c);
  }
  flush();
  return phrases;
}

std::vector<Phrase> merge_phrases(std::vector<Phrase> phrases,
                                  const std::function<double()>& uniform, MergeStats* stats) {
  std::vector<Phrase> out;
  out.reserve(phrases.size());
  std::size_t i = 0;
  while (i < phrases.size()) {
    const double u = uniform();
    std::size_t want = 0;
    if (u < kMergeTwoProb)
      want = 2;
    else if (u < kMergeTwoProb + kMergeOneProb)
      want = 1;
    if (stats) {
      ++stats->draws;
      if (want == 1) ++stats->merge_one;
      if (want == 2) ++stats->merge_two;
    }
    const std::size_t take = std::min(want, phrases.size() - 1 - i);
    Phrase merged = std::move(phrases[i]);
    for (std::size_t j = 1; j <= take; ++j) {
      Phrase& next = phrases[i + j];
      merged.text += merged.delimiter;
      merged.text += ' ';
      merged.text += next.text;
      merged.delimiter = std::move(next.delimiter);
      merged.ends_paragraph = next.ends_paragraph;
    }
    out.push_back(std::move(merged));
    i += 1 + take;
  }
  return out;
}

std::vector<Phrase> merge_phrases(std::vector<Phrase> phrases, Rng& rng, MergeStats* stats) {
  return merge_phrases(std::move(phrases), [&rng] { return rng.uniform(); }, stats);
}

std::vector<Block> group_blocks(std::vector<Phrase> phrases,
                                const std::function<std::size_t()>& draw_size) {
  std::vector<Block> blocks;
  std::size_t i = 0;
  while (i < phrases.size()) {
    const std::size_t take = std::min(std::max<std::size_t>(1, draw_size()), phrases.size() - i);
    Block b;
    b.phrases.assign(std::make_move_iterator(phrases.begin() + static_cast<std::ptrdiff_t>(i)),
                     std::make_move_iterator(phrases.begin() + static_cast<std::ptrdiff_t>(i + take)));
    blocks.push_back(std::move(b));
    i += take;
  }
  return blocks;
}

std::vector<Block> group_blocks(std::vector<Phrase> phrases, Rng& rng) {
  return group_blocks(std::move(phrases), [&rng] {
    return static_cast<std::size_t>(rng.uniform_int(kMinBlock, kMaxBlock));
  });
}

std::vector<Block> segment_document(std::string_view text, Rng& rng) {
  auto phrases = merge_phrases(split_phrases(text), rng);
  return group_blocks(std::move(phrases), rng);
}

std::vector<std::string> split_on_blank_lines(std::string_view text) {
  std::vector<std::string> docs;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string line;
  auto flush = [&] {
    if (!text::normalize_ws(current).empty()) docs.push_back(current);
    current.clear();
  };
  while (std::getline(in, line)) {
    if (text::normalize_ws(line).empty()) {
      flush();
      continue;
    }
    current += line;
    current += '\n';
  }
  flush();
  return docs;
}

namespace {
std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return ss.str();
}
}  // namespace

std::vector<std::string> load_documents(const std::filesystem::path& path, CorpusLayout layout) {
  namespace fs = std::filesystem;
  std::vector<std::string> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto content = read_file(f);
      if (!content) {
        log::warn("skipping unreadable document ", f.string());
        continue;
      }
      if (layout == CorpusLayout::blank_line_separated) {
        for (auto& d : split_on_blank_lines(*content)) docs.push_back(std::move(d));
      } else {
        docs.push_back(std::move(*content));
      }
    }
    return docs;
  }
  auto content = read_file(path);
  if (!content) {
    log::warn("skipping unreadable document ", path.string());
    return docs;
  }
  if (layout == CorpusLayout::blank_line_separated) return split_on_blank_lines(*content);
  docs.push_back(std::move(*content));
  return docs;
}

}  // namespace verse::segmentation
