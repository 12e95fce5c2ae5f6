#pragma once

// Loaders for the hand-verified phonology gold lists under tests/data.

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace verse::testing {

struct GoldWord {
  std::string word;
  std::vector<std::string> syllables;
  std::optional<std::size_t> stress;
};

struct GoldRhyme {
  std::string a;
  std::string b;
  bool rhymes;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

inline std::string data_path(const std::string& name) { return std::string(VERSE_TEST_DATA) + "/" + name; }

inline std::vector<GoldWord> load_gold_words(const std::string& name) {
  std::ifstream in(data_path(name));
  if (!in) throw std::runtime_error("missing gold list " + name);
  std::vector<GoldWord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3) throw std::runtime_error("bad gold line: " + line);
    GoldWord g{cols[0], split(cols[1], '-'), std::nullopt};
    if (cols[2] != "-") g.stress = std::stoul(cols[2]);
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<GoldRhyme> load_gold_rhymes(const std::string& name) {
  std::ifstream in(data_path(name));
  if (!in) throw std::runtime_error("missing gold list " + name);
  std::vector<GoldRhyme> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3) throw std::runtime_error("bad rhyme line: " + line);
    out.push_back({cols[0], cols[1], cols[2] == "1"});
  }
  return out;
}

}  // namespace verse::testing
