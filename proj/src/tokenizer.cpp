#include "verse/tokenizer.hpp"

#include "verse/log.hpp"
#include "verse/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace verse::tokenizer {
namespace {

namespace tok = descriptor::token;

// Characters always present as base pieces, whatever the training corpus.
std::u32string seed_alphabet() {
  std::u32string out;
  for (char32_t c = 0x21; c <= 0x7e; ++c) out.push_back(c);
  for (char32_t c = 0xa1; c <= 0xff; ++c) out.push_back(c);
  out += U"’‘“”…—–";
  return out;
}

using Symbols = std::vector<std::string>;

// Pieces of text split at control strings. Control tokens come back with
// `control` set; text chunks are whitespace-free.
struct Chunk {
  std::string text;
  bool control;
};

std::vector<Chunk> pretokenize(std::string_view input,
                               const std::function<bool(std::string_view)>& is_control) {
  std::vector<Chunk> out;
  for (const auto& word : text::split_ws(input)) {
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < word.size()) {
      if (word[i] == '<') {
        const auto close = word.find('>', i);
        if (close != std::string::npos) {
          const std::string_view cand(word.data() + i, close - i + 1);
          if (is_control(cand)) {
            if (i > start) out.push_back({word.substr(start, i - start), false});
            out.push_back({std::string(cand), true});
            i = close + 1;
            start = i;
            continue;
          }
        }
      }
      ++i;
    }
    if (start < word.size()) out.push_back({word.substr(start), false});
  }
  return out;
}

Symbols initial_symbols(const std::string& word) {
  Symbols s{std::string(kWordMarker)};
  for (char32_t c : text::to_u32(word)) s.push_back(text::to_utf8(c));
  return s;
}

}  // namespace

void Vocab::add(std::string piece) {
  pieces_.push_back(std::move(piece));
}

void Vocab::index() {
  ids_.clear();
  max_piece_bytes_ = 0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!ids_.emplace(pieces_[i], static_cast<TokenId>(i)).second)
      throw std::runtime_error("duplicate vocabulary piece '" + pieces_[i] + "'");
    if (i >= control_budget_) max_piece_bytes_ = std::max(max_piece_bytes_, pieces_[i].size());
  }
}

Vocab Vocab::train(std::span<const std::string> lines, const VocabConfig& config,
                   const descriptor::ClassFrequencyTable& class_freqs) {
  const std::size_t fixed = kFixedControls + config.len_max;
  if (config.control_budget < fixed + 1)
    throw std::invalid_argument("control budget " + std::to_string(config.control_budget) +
                                " leaves no class slots (need at least " + std::to_string(fixed + 1) + ")");
  if (config.size <= config.control_budget + 1)
    throw std::invalid_argument("vocabulary size must exceed the control budget");

  Vocab v;
  v.control_budget_ = config.control_budget;
  v.len_max_ = config.len_max;
  v.add(std::string(tok::kPref));
  v.add(std::string(tok::kPrefEnd));
  v.add(std::string(tok::kSep));
  v.add(std::string(tok::kBrk));
  v.add(std::string(tok::kClsUnk));
  for (std::size_t n = 1; n <= config.len_max; ++n) v.add(tok::len(n));
  for (const auto& key : class_freqs.top(config.control_budget - fixed)) v.add(tok::cls(key));
  for (std::size_t k = 0; v.pieces_.size() < config.control_budget; ++k)
    v.add("<RESERVED_" + std::to_string(k) + ">");

  // Word frequencies, control strings excluded.
  std::map<std::string, std::uint64_t> word_freq;
  const auto any_control = [](std::string_view s) { return tok::is_control(s); };
  for (const auto& line : lines)
    for (auto& chunk : pretokenize(line, any_control))
      if (!chunk.control) ++word_freq[chunk.text];

  std::set<std::u32string::value_type> alphabet;
  for (char32_t c : seed_alphabet()) alphabet.insert(c);
  for (const auto& [w, f] : word_freq)
    for (char32_t c : text::to_u32(w)) alphabet.insert(c);

  v.add(std::string(kUnknownPiece));
  v.add(std::string(kWordMarker));
  for (char32_t c : alphabet) v.add(text::to_utf8(c));

  std::vector<Symbols> words;
  std::vector<std::uint64_t> freqs;
  for (const auto& [w, f] : word_freq) {
    words.push_back(initial_symbols(w));
    freqs.push_back(f);
  }

  std::set<std::string> known(v.pieces_.begin(), v.pieces_.end());
  while (v.pieces_.size() < config.size) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> pairs;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i) pairs[{words[w][i], words[w][i + 1]}] += freqs[w];
    const std::pair<std::string, std::string>* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& [p, c] : pairs) {
      if (c > best_count && !known.contains(p.first + p.second)) {
        best = &p;
        best_count = c;
      }
    }
    if (!best || best_count < config.min_pair_count) {
      log::warn("corpus supports only ", v.pieces_.size(), " pieces; requested ", config.size);
      break;
    }
    const auto [left, right] = *best;
    const std::string merged = left + right;
    for (auto& symbols : words) {
      Symbols next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    known.insert(merged);
    v.add(merged);
  }
  v.index();
  return v;
}

const std::string& Vocab::piece(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(pieces_.size()));
  return pieces_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocab::find(std::string_view piece) const {
  const auto it = ids_.find(std::string(piece));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::len(std::size_t syllables) const {
  const std::size_t n = std::clamp<std::size_t>(syllables, 1, len_max_);
  return static_cast<TokenId>(kFixedControls + n - 1);
}

std::optional<TokenId> Vocab::cls(std::string_view key) const {
  const auto id = find(tok::cls(key));
  if (!id || !is_control(*id)) return std::nullopt;
  return id;
}

std::vector<std::string> Vocab::classes() const {
  std::vector<std::string> out;
  for (std::size_t id = kFixedControls + len_max_; id < control_budget_; ++id) {
    const auto parsed = tok::parse_cls(pieces_[id]);
    if (parsed && *parsed) out.push_back(**parsed);
  }
  return out;
}

std::optional<TokenId> Vocab::match_control(std::string_view cand) const {
  if (const auto id = find(cand); id && is_control(*id)) return id;
  if (const auto n = tok::parse_len(cand)) return len(*n);
  if (tok::parse_cls(cand)) return cls_unk();
  return std::nullopt;
}

void Vocab::encode_word(std::string_view word, std::vector<TokenId>& out) const {
  const std::string marked = std::string(kWordMarker) + std::string(word);
  std::size_t pos = 0;
  while (pos < marked.size()) {
    std::size_t len = std::min(max_piece_bytes_, marked.size() - pos);
    for (; len > 0; --len) {
      const auto it = ids_.find(marked.substr(pos, len));
      if (it != ids_.end() && !is_control(it->second)) {
        out.push_back(it->second);
        break;
      }
    }
    if (len == 0) {
      // Unseen character: one <unk> for the whole code point.
      std::size_t step = 1;
      while (pos + step < marked.size() && (static_cast<unsigned char>(marked[pos + step]) & 0xC0) == 0x80) ++step;
      out.push_back(unknown());
      len = step;
    }
    pos += len;
  }
}

std::vector<TokenId> Vocab::encode(std::string_view input) const {
  std::vector<TokenId> out;
  const auto is_ctrl = [this](std::string_view s) { return match_control(s).has_value(); };
  for (const auto& chunk : pretokenize(input, is_ctrl)) {
    if (chunk.control)
      out.push_back(*match_control(chunk.text));
    else
      encode_word(chunk.text, out);
  }
  return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  bool after_control = false;
  for (const TokenId id : ids) {
    const std::string& p = piece(id);
    if (is_control(id)) {
      if (!out.empty()) out += ' ';
      out += p;
      after_control = true;
      continue;
    }
    if (static_cast<std::size_t>(id) == control_budget_) {
      out += "\xEF\xBF\xBD";
      after_control = false;
      continue;
    }
    if (p.starts_with(kWordMarker)) {
      if (!out.empty()) out += ' ';
      out += p.substr(kWordMarker.size());
    } else {
      if (after_control) out += ' ';
      out += p;
    }
    after_control = false;
  }
  return out;
}

std::string Vocab::serialize() const {
  std::ostringstream os;
  os << "#verse-vocab\tcontrol_budget=" << control_budget_ << "\tlen_max=" << len_max_ << '\n';
  for (std::size_t i = 0; i < pieces_.size(); ++i)
    os << i << '\t' << pieces_[i] << '\t' << (i < control_budget_ ? "control" : "subword") << '\n';
  return os.str();
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize();
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str(), path.string());
}

Vocab Vocab::deserialize(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  const std::filesystem::path path(source);
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  std::size_t controls = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.starts_with("#verse-vocab")) {
      header = true;
      const auto lm = line.find("len_max=");
      if (lm != std::string::npos) v.len_max_ = std::stoul(line.substr(lm + 8));
      continue;
    }
    const auto t1 = line.find('\t');
    const auto t2 = line.rfind('\t');
    if (t1 == std::string::npos || t1 == t2)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected id<TAB>piece<TAB>kind");
    const std::size_t id = std::stoul(line.substr(0, t1));
    if (id != v.pieces_.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": ids must be contiguous");
    const std::string kind = line.substr(t2 + 1);
    if (kind == "control") {
      if (controls != id) throw std::runtime_error(path.string() + ": control block must be contiguous from id 0");
      ++controls;
    } else if (kind != "subword") {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
    v.add(line.substr(t1 + 1, t2 - t1 - 1));
  }
  if (!header || controls < kFixedControls + 1)
    throw std::runtime_error(path.string() + ": not a vocabulary file");
  v.control_budget_ = controls;
  if (v.len_max_ == 0) v.len_max_ = descriptor::kLenMax;
  v.index();
  return v;
}

}  // namespace verse::tokenizer
