#include "verse/descriptor.hpp"
#include "verse/segmentation.hpp"
#include "verse/text.hpp"
#include "verse/tokenizer.hpp"

#include "doctest.h"

#include <filesystem>

using namespace verse;
using tokenizer::Vocab;
using tokenizer::VocabConfig;

namespace {

std::vector<std::string> sample_lines() {
  return {
      "<PREF> <LEN_5> <CLS_ar> </PREF> no debo luchar <BRK> quiero cantar",
      "la casa roja está en la montaña",
      "el niño canta y la niña baila, mientras la lluvia cae",
      "zein ahula den bestea, semea etxera dator",
      "¿quién sabe? ¡nadie lo sabe! (nunca) «jamás»",
      "los pájaros cantan; las flores se abren al amanecer",
  };
}

descriptor::ClassFrequencyTable class_table() {
  descriptor::ClassFrequencyTable t;
  t.add("ar", 10);
  t.add("ena", 7);
  t.add("on", 7);
  t.add("ia", 3);
  return t;
}

Vocab small_vocab(std::size_t size = 400) {
  VocabConfig cfg;
  cfg.size = size;
  cfg.control_budget = 120;
  return Vocab::train(sample_lines(), cfg, class_table());
}

}  // namespace

TEST_CASE("default layout leaves 407 class slots") {
  VocabConfig cfg;
  cfg.size = 700;
  const auto v = Vocab::train(sample_lines(), cfg, class_table());
  CHECK(v.control_budget() == 512);
  CHECK(v.class_slots() == 407);
  CHECK(v.piece(v.pref()) == "<PREF>");
  CHECK(v.piece(v.pref_end()) == "</PREF>");
  CHECK(v.piece(v.sep()) == "<SEP>");
  CHECK(v.piece(v.brk()) == "<BRK>");
  CHECK(v.piece(v.cls_unk()) == "<CLS_UNK>");
  CHECK(v.piece(v.len(1)) == "<LEN_1>");
  CHECK(v.piece(v.len(100)) == "<LEN_100>");
  CHECK(v.len(250) == v.len(100));
  CHECK(v.piece(105) == "<CLS_ar>");
  // Ties rank by key.
  CHECK(v.piece(106) == "<CLS_ena>");
  CHECK(v.piece(107) == "<CLS_on>");
  CHECK(v.piece(108) == "<CLS_ia>");
  CHECK(v.classes() == std::vector<std::string>{"ar", "ena", "on", "ia"});
  CHECK(v.piece(109) == "<RESERVED_0>");
  for (TokenId id = 0; id < 512; ++id) CHECK(v.is_control(id));
  CHECK_FALSE(v.is_control(512));
}

TEST_CASE("control budget must leave a class slot") {
  VocabConfig cfg;
  cfg.control_budget = 105;
  CHECK_THROWS_AS(Vocab::train(sample_lines(), cfg, class_table()), std::invalid_argument);
  cfg.control_budget = 106;
  CHECK_NOTHROW(Vocab::train(sample_lines(), cfg, class_table()));
}

TEST_CASE("control strings encode atomically") {
  const auto v = small_vocab();
  CHECK(v.encode("<BRK>") == std::vector<TokenId>{v.brk()});
  CHECK(v.encode("<PREF>") == std::vector<TokenId>{v.pref()});
  CHECK(v.encode("<CLS_ar>") == std::vector<TokenId>{*v.cls("ar")});
  CHECK(v.encode("<CLS_zzz>") == std::vector<TokenId>{v.cls_unk()});
  CHECK(v.encode("<LEN_300>") == std::vector<TokenId>{v.len(100)});
  const auto ids = v.encode("hola<BRK>adiós");
  CHECK(std::count(ids.begin(), ids.end(), v.brk()) == 1);
  CHECK(v.decode(ids) == "hola <BRK> adiós");
}

TEST_CASE("no subword piece contains a control string") {
  const auto v = small_vocab(600);
  for (std::size_t id = v.control_budget(); id < v.size(); ++id) {
    const auto& p = v.piece(static_cast<TokenId>(id));
    for (std::size_t c = 0; c < v.control_budget(); ++c)
      CHECK(p.find(v.piece(static_cast<TokenId>(c))) == std::string::npos);
  }
}

TEST_CASE("one repeated word becomes a single piece") {
  std::vector<std::string> lines(50, "murciélago murciélago murciélago");
  VocabConfig cfg;
  cfg.size = 1000;
  cfg.control_budget = 110;
  const auto v = Vocab::train(lines, cfg, {});
  CHECK(v.size() < cfg.size);
  REQUIRE(v.find("▁murciélago"));
  CHECK(v.encode("murciélago").size() == 1);
}

TEST_CASE("round trips") {
  const auto v = small_vocab();
  const std::string plain = "la niña canta, y el pájaro baila";
  CHECK(v.decode(v.encode(plain)) == plain);
  const std::string with_ctrl = "<PREF> <LEN_5> <CLS_ar> <SEP> </PREF> no debo luchar <BRK> quiero cantar";
  CHECK(v.decode(v.encode(with_ctrl)) == with_ctrl);
  CHECK(v.encode("").empty());
  CHECK(v.decode(v.encode("")).empty());
  CHECK(v.decode(v.encode("  a \n b\t c ")) == "a b c");
}

TEST_CASE("round trip over segmented text") {
  const auto v = small_vocab(800);
  Rng rng(7);
  const std::string alphabet = "abcdeilmnorstuyzñáéíóú";
  const auto chars = text::to_u32(alphabet);
  for (int i = 0; i < 300; ++i) {
    std::string line;
    const auto words = rng.uniform_int(1, 8);
    for (std::int64_t w = 0; w < words; ++w) {
      if (w) line += ' ';
      const auto len = rng.uniform_int(1, 9);
      std::u32string word;
      for (std::int64_t k = 0; k < len; ++k)
        word.push_back(chars[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(chars.size()) - 1))]);
      line += text::to_utf8(word);
      if (rng.uniform() < 0.2) line += ",";
    }
    CHECK(v.decode(v.encode(line)) == line);
  }
}

TEST_CASE("unseen characters map to the unknown piece") {
  const auto v = small_vocab();
  const auto ids = v.encode("犬");
  REQUIRE(ids.size() == 2);
  CHECK(v.piece(ids[0]) == "▁");
  CHECK(ids[1] == v.unknown());
  CHECK(v.decode(ids) == "\uFFFD");
}

TEST_CASE("decode rejects unknown ids") {
  const auto v = small_vocab();
  const std::vector<TokenId> bad{static_cast<TokenId>(v.size())};
  CHECK_THROWS_AS(v.decode(bad), std::out_of_range);
  const std::vector<TokenId> neg{-1};
  CHECK_THROWS_AS(v.decode(neg), std::out_of_range);
}

TEST_CASE("training is deterministic and the file round-trips") {
  const auto a = small_vocab();
  const auto b = small_vocab();
  CHECK(a.serialize() == b.serialize());
  CHECK(a.fingerprint() == b.fingerprint());
  const auto path = std::filesystem::temp_directory_path() / "verse_vocab_test.tsv";
  a.save(path);
  const auto c = Vocab::load(path);
  CHECK(c.serialize() == a.serialize());
  CHECK(c.control_budget() == a.control_budget());
  const std::string s = "<PREF> <LEN_7> <CLS_on> </PREF> canción";
  CHECK(c.encode(s) == a.encode(s));
  std::filesystem::remove(path);
}
