#pragma once

// Subword vocabulary with a contiguous block of control tokens at the low
// ids. Subword pieces are learned by byte-pair merging over characters;
// word-initial pieces carry the "▁" marker so decoding is exact.

#include "verse/common.hpp"
#include "verse/descriptor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace verse::tokenizer {

inline constexpr std::string_view kWordMarker = "▁";
inline constexpr std::string_view kUnknownPiece = "<unk>";
inline constexpr std::size_t kFixedControls = 5;  // PREF, /PREF, SEP, BRK, CLS_UNK

enum class PieceKind { control, subword };

struct VocabConfig {
  std::size_t size = 8000;
  std::size_t control_budget = 512;
  std::size_t len_max = descriptor::kLenMax;
  std::size_t min_pair_count = 2;
};

class Vocab {
 public:
  // `lines` may contain control strings; they are excluded from merge
  // statistics. Class slots are filled from `class_freqs` in rank order.
  static Vocab train(std::span<const std::string> lines, const VocabConfig& config,
                     const descriptor::ClassFrequencyTable& class_freqs);

  std::size_t size() const { return pieces_.size(); }
  std::size_t control_budget() const { return control_budget_; }
  std::size_t len_max() const { return len_max_; }
  std::size_t class_slots() const { return control_budget_ - kFixedControls - len_max_; }

  const std::string& piece(TokenId id) const;
  PieceKind kind(TokenId id) const {
    return static_cast<std::size_t>(id) < control_budget_ ? PieceKind::control : PieceKind::subword;
  }
  bool is_control(TokenId id) const { return kind(id) == PieceKind::control; }
  std::optional<TokenId> find(std::string_view piece) const;

  TokenId pref() const { return 0; }
  TokenId pref_end() const { return 1; }
  TokenId sep() const { return 2; }
  TokenId brk() const { return 3; }
  TokenId cls_unk() const { return 4; }
  TokenId unknown() const { return static_cast<TokenId>(control_budget_); }
  // Clamped to [1, len_max].
  TokenId len(std::size_t syllables) const;
  std::optional<TokenId> cls(std::string_view key) const;
  bool has_class(std::string_view key) const { return cls(key).has_value(); }
  // Rhyme classes held in the control block, most frequent first.
  std::vector<std::string> classes() const;

  std::vector<TokenId> encode(std::string_view text) const;
  // Throws std::out_of_range on ids outside the vocabulary.
  std::string decode(std::span<const TokenId> ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  // `source` names the text in error messages.
  static Vocab deserialize(const std::string& text, const std::string& source = "<vocab>");
  std::string serialize() const;
  std::uint64_t fingerprint() const { return fnv1a64(serialize()); }

 private:
  Vocab() = default;
  void add(std::string piece);
  void index();
  void encode_word(std::string_view word, std::vector<TokenId>& out) const;
  std::optional<TokenId> match_control(std::string_view candidate) const;

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> ids_;
  std::size_t control_budget_ = 0;
  std::size_t len_max_ = 0;
  std::size_t max_piece_bytes_ = 0;
};

}  // namespace verse::tokenizer
