#include "verse/descriptor.hpp"

#include "verse/log.hpp"
#include "verse/parallel.hpp"
#include "verse/phonology.hpp"
#include "verse/text.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace verse::descriptor {

namespace token {

std::string len(std::size_t syllables) { return "<LEN_" + std::to_string(syllables) + ">"; }

std::string cls(std::string_view key) { return "<CLS_" + std::string(key) + ">"; }

std::optional<std::size_t> parse_len(std::string_view tok) {
  constexpr std::string_view prefix = "<LEN_";
  if (!tok.starts_with(prefix) || !tok.ends_with(">")) return std::nullopt;
  const auto digits = tok.substr(prefix.size(), tok.size() - prefix.size() - 1);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
  return value;
}

std::optional<std::optional<std::string>> parse_cls(std::string_view tok) {
  constexpr std::string_view prefix = "<CLS_";
  if (!tok.starts_with(prefix) || !tok.ends_with(">") || tok.size() <= prefix.size() + 1)
    return std::nullopt;
  if (tok == kClsUnk) return std::optional<std::string>{};
  return std::optional<std::string>{std::string(tok.substr(prefix.size(), tok.size() - prefix.size() - 1))};
}

bool is_control(std::string_view tok) {
  return tok == kPref || tok == kPrefEnd || tok == kSep || tok == kBrk || parse_len(tok) ||
         parse_cls(tok);
}

}  // namespace token

StructureDescriptor extract_descriptor(const segmentation::Block& block, Language lang) {
  StructureDescriptor desc;
  desc.lines.reserve(block.size());
  for (std::size_t i = 0; i < block.phrases.size(); ++i) {
    const auto& phrase = block.phrases[i];
    LineSpec spec;
    spec.syllables = phonology::count_line_syllables(phrase.text, lang);
    if (spec.syllables == 0) {
      spec.syllables = 1;
    } else {
      const auto rc = phonology::rhyme_class(phrase.text, lang);
      if (!rc.is_none()) spec.rhyme = rc.key();
    }
    desc.lines.push_back(std::move(spec));
    if (phrase.ends_paragraph) desc.sep_after.insert(i);
  }
  return desc;
}

StructureDescriptor mask_rhymes(StructureDescriptor desc, Rng& rng, double p) {
  for (auto& line : desc.lines)
    if (rng.uniform() < p) line.rhyme.reset();
  return desc;
}

std::vector<std::string> serialize_descriptor(
    const StructureDescriptor& desc, const std::function<bool(std::string_view)>& known_class) {
  std::vector<std::string> out;
  out.reserve(2 * desc.lines.size() + desc.sep_after.size() + 2);
  out.emplace_back(token::kPref);
  for (std::size_t i = 0; i < desc.lines.size(); ++i) {
    const auto& line = desc.lines[i];
    std::size_t n = line.syllables;
    if (n > kLenMax) {
      log::warn("clamping syllable count ", n, " to ", kLenMax);
      n = kLenMax;
    }
    out.push_back(token::len(std::max<std::size_t>(1, n)));
    if (line.rhyme && (!known_class || known_class(*line.rhyme)))
      out.push_back(token::cls(*line.rhyme));
    else
      out.emplace_back(token::kClsUnk);
    if (desc.sep_after.contains(i)) out.emplace_back(token::kSep);
  }
  out.emplace_back(token::kPrefEnd);
  return out;
}

std::string serialize_descriptor_text(const StructureDescriptor& desc,
                                      const std::function<bool(std::string_view)>& known_class) {
  std::string out;
  for (const auto& t : serialize_descriptor(desc, known_class)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

StructureDescriptor parse_descriptor(std::span<const std::string> tokens) {
  if (tokens.empty() || tokens[0] != token::kPref)
    throw ParseError("expected <PREF> at position 0", 0);
  StructureDescriptor desc;
  std::size_t i = 1;
  while (true) {
    if (i >= tokens.size()) throw ParseError("missing </PREF> at position " + std::to_string(i), i);
    const std::string& tok = tokens[i];
    if (tok == token::kPrefEnd) {
      if (desc.lines.empty()) throw ParseError("empty descriptor", i);
      if (i + 1 != tokens.size())
        throw ParseError("unexpected token after </PREF> at position " + std::to_string(i + 1), i + 1);
      return desc;
    }
    if (tok == token::kSep) {
      if (desc.lines.empty()) throw ParseError("<SEP> before first line at position " + std::to_string(i), i);
      if (!desc.sep_after.insert(desc.lines.size() - 1).second)
        throw ParseError("duplicate <SEP> at position " + std::to_string(i), i);
      ++i;
      continue;
    }
    if (const auto n = token::parse_len(tok)) {
      if (*n < 1 || *n > kLenMax)
        throw ParseError("syllable count out of range at position " + std::to_string(i), i);
      if (i + 1 >= tokens.size())
        throw ParseError("missing CLS at position " + std::to_string(i + 1), i + 1);
      const auto cls = token::parse_cls(tokens[i + 1]);
      if (!cls) throw ParseError("missing CLS at position " + std::to_string(i + 1), i + 1);
      desc.lines.push_back(LineSpec{*n, *cls});
      i += 2;
      continue;
    }
    throw ParseError("unknown token '" + tok + "' at position " + std::to_string(i), i);
  }
}

StructureDescriptor parse_descriptor_text(std::string_view text) {
  const auto tokens = text::split_ws(text);
  return parse_descriptor(tokens);
}

std::string block_text(const segmentation::Block& block) {
  std::string out;
  for (const auto& p : block.phrases) {
    if (!out.empty()) {
      out += ' ';
      out += token::kBrk;
      out += ' ';
    }
    out += p.text;
  }
  return out;
}

std::string strip_control(std::string_view augmented) {
  std::string out;
  for (const auto& tok : text::split_ws(augmented)) {
    if (token::is_control(tok)) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

void ClassFrequencyTable::merge(const ClassFrequencyTable& other) {
  for (const auto& [k, v] : other.counts_) counts_[k] += v;
}

std::vector<std::pair<std::string, std::uint64_t>> ClassFrequencyTable::ranked() const {
  std::vector<std::pair<std::string, std::uint64_t>> out(counts_.begin(), counts_.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<std::string> ClassFrequencyTable::top(std::size_t n) const {
  std::vector<std::string> out;
  for (auto& [k, v] : ranked()) {
    if (out.size() >= n) break;
    out.push_back(k);
  }
  return out;
}

void ClassFrequencyTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : ranked()) out << k << '\t' << v << '\n';
}

ClassFrequencyTable ClassFrequencyTable::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  ClassFrequencyTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key<TAB>count");
    table.add(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
  }
  return table;
}

AugmentedCorpus augment_corpus(std::span<const std::string> documents, Language lang,
                               std::uint64_t seed, double mask_p, std::size_t jobs) {
  struct DocResult {
    std::vector<std::string> lines;
    ClassFrequencyTable freqs;
    std::size_t specs = 0;
    std::size_t masked = 0;
  };
  std::vector<DocResult> results(documents.size());
  parallel_for(documents.size(), jobs, [&](std::size_t d) {
    Rng rng(derive_seed(seed, d));
    DocResult& r = results[d];
    for (const auto& block : segmentation::segment_document(documents[d], rng)) {
      const auto desc = extract_descriptor(block, lang);
      for (const auto& line : desc.lines)
        if (line.rhyme) r.freqs.add(*line.rhyme);
      const auto masked = mask_rhymes(desc, rng, mask_p);
      r.specs += masked.lines.size();
      for (const auto& line : masked.lines)
        if (!line.rhyme) ++r.masked;
      r.lines.push_back(serialize_descriptor_text(masked) + " " + block_text(block));
    }
  });
  AugmentedCorpus out;
  out.documents = documents.size();
  for (auto& r : results) {
    out.blocks += r.lines.size();
    out.line_specs += r.specs;
    out.masked += r.masked;
    out.class_freqs.merge(r.freqs);
    for (auto& l : r.lines) out.lines.push_back(std::move(l));
  }
  return out;
}

RhymeScheme parse_scheme(std::string_view dsl) {
  RhymeScheme scheme;
  std::map<char, std::size_t> uses;
  for (const auto& item : text::split_ws(dsl)) {
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
    const std::size_t digits = static_cast<std::size_t>(ptr - item.data());
    if (ec != std::errc{} || digits == 0 || digits + 1 != item.size())
      throw SchemeError("invalid scheme item '" + item + "' (expected <count><letter>)");
    const char letter = item.back();
    if (!(letter == '-' || (letter >= 'A' && letter <= 'Z')))
      throw SchemeError("invalid rhyme letter in '" + item + "'");
    if (n < 1 || n > kLenMax)
      throw SchemeError("syllable count out of range in '" + item + "'");
    scheme.items.push_back({n, letter});
    if (letter != '-') ++uses[letter];
  }
  if (scheme.items.empty()) throw SchemeError("empty scheme");
  for (const auto& [letter, count] : uses)
    if (count < 2)
      throw SchemeError(std::string("rhyme letter '") + letter + "' binds only one line");
  return scheme;
}

std::string to_string(const RhymeScheme& scheme) {
  std::string out;
  for (const auto& item : scheme.items) {
    if (!out.empty()) out += ' ';
    out += std::to_string(item.syllables);
    out += item.letter;
  }
  return out;
}

StructureDescriptor build_descriptor_from_scheme(const RhymeScheme& scheme,
                                                 std::span<const std::string> class_pool,
                                                 Rng& rng, Language lang,
                                                 std::optional<std::string_view> first_line,
                                                 bool force) {
  if (scheme.items.empty()) throw SchemeError("empty scheme");
  std::vector<char> letters;
  for (const auto& item : scheme.items)
    if (item.letter != '-' && std::find(letters.begin(), letters.end(), item.letter) == letters.end())
      letters.push_back(item.letter);
  if (class_pool.size() < letters.size())
    throw SchemeError("class pool has " + std::to_string(class_pool.size()) +
                      " classes but the scheme needs " + std::to_string(letters.size()));

  std::map<char, std::optional<std::string>> binding;
  std::vector<std::string> available(class_pool.begin(), class_pool.end());
  if (first_line) {
    const auto& head = scheme.items.front();
    const std::size_t measured = phonology::count_line_syllables(*first_line, lang);
    if (measured != head.syllables) {
      const std::string msg = "first line has " + std::to_string(measured) +
                              " syllables but the scheme expects " + std::to_string(head.syllables);
      if (!force) throw SchemeError(msg);
      log::warn(msg);
    }
    if (head.letter != '-') {
      const auto rc = phonology::rhyme_class(*first_line, lang);
      if (rc.is_none()) {
        if (!force) throw SchemeError("first line has no rhyme class");
        log::warn("first line has no rhyme class; leaving its rhyme unconstrained");
        binding[head.letter] = std::nullopt;
      } else {
        binding[head.letter] = rc.key();
        std::erase(available, rc.key());
      }
    }
  }
  for (char letter : letters) {
    if (binding.contains(letter)) continue;
    if (available.empty()) throw SchemeError("class pool exhausted");
    const auto pick = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(available.size()) - 1));
    binding[letter] = available[pick];
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(pick));
  }

  StructureDescriptor desc;
  for (const auto& item : scheme.items) {
    LineSpec spec{item.syllables, std::nullopt};
    if (item.letter != '-') spec.rhyme = binding.at(item.letter);
    desc.lines.push_back(std::move(spec));
  }
  return desc;
}

}  // namespace verse::descriptor
