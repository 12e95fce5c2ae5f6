#include "verse/descriptor.hpp"
#include "verse/phonology.hpp"
#include "verse/text.hpp"

#include <doctest.h>

using namespace verse;
using namespace verse::descriptor;
using verse::segmentation::Block;
using verse::segmentation::Phrase;

namespace {

Block make_block(std::initializer_list<const char*> phrases) {
  Block b;
  for (const char* p : phrases) b.phrases.push_back(Phrase{p, false, ","});
  return b;
}

StructureDescriptor random_descriptor(Rng& rng) {
  StructureDescriptor d;
  const auto n = rng.uniform_int(1, 12);
  static const std::vector<std::string> keys = {"ar", "eña", "on", "ea", "ibe", "apso"};
  for (int i = 0; i < n; ++i) {
    LineSpec s{static_cast<std::size_t>(rng.uniform_int(1, kLenMax)), std::nullopt};
    if (rng.uniform() < 0.7) s.rhyme = keys[static_cast<std::size_t>(rng.uniform_int(0, keys.size() - 1))];
    d.lines.push_back(s);
    if (rng.uniform() < 0.2) d.sep_after.insert(static_cast<std::size_t>(i));
  }
  return d;
}

std::string parse_error(std::string_view text) {
  try {
    parse_descriptor_text(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("extract_descriptor") {
  const auto d = extract_descriptor(make_block({"no debo luchar"}), Language::spanish);
  REQUIRE(d.lines.size() == 1);
  CHECK(d.lines[0].syllables == 5);
  CHECK(d.lines[0].rhyme == "ar");

  const auto u = extract_descriptor(make_block({"en 1984", "la BBC", "---"}), Language::spanish);
  REQUIRE(u.lines.size() == 3);
  for (const auto& l : u.lines) CHECK_FALSE(l.rhyme.has_value());
  CHECK(u.lines[2].syllables == 1);

  Block para = make_block({"uno", "dos", "tres"});
  para.phrases[1].ends_paragraph = true;
  CHECK(extract_descriptor(para, Language::spanish).sep_after == std::set<std::size_t>{1});
}

TEST_CASE("mask_rhymes") {
  Rng rng(3);
  const auto d = random_descriptor(rng);
  CHECK(mask_rhymes(d, rng, 0.0) == d);
  for (const auto& l : mask_rhymes(d, rng, 1.0).lines) CHECK_FALSE(l.rhyme.has_value());

  StructureDescriptor big;
  big.lines.assign(100000, LineSpec{5, std::string("ar")});
  Rng mrng(99);
  const auto masked = mask_rhymes(big, mrng);
  std::size_t unk = 0;
  for (std::size_t i = 0; i < masked.lines.size(); ++i) {
    CHECK(masked.lines[i].syllables == 5);
    if (!masked.lines[i].rhyme) ++unk;
  }
  const double rate = double(unk) / masked.lines.size();
  CHECK(rate >= 0.14);
  CHECK(rate <= 0.16);
}

TEST_CASE("serialize the four-line ABBA example") {
  StructureDescriptor d;
  d.lines = {{11, "A'"}, {11, "B'"}, {11, "B'"}, {11, "A'"}};
  CHECK(serialize_descriptor_text(d) ==
        "<PREF> <LEN_11> <CLS_A'> <LEN_11> <CLS_B'> <LEN_11> <CLS_B'> <LEN_11> <CLS_A'> </PREF>");
}

TEST_CASE("serialize clamps, maps unknown classes and places SEP") {
  StructureDescriptor d;
  d.lines = {{250, "ar"}, {3, "xyz"}};
  d.sep_after = {0};
  const auto text = serialize_descriptor_text(d, [](std::string_view k) { return k == "ar"; });
  CHECK(text == "<PREF> <LEN_100> <CLS_ar> <SEP> <LEN_3> <CLS_UNK> </PREF>");
  d.sep_after.clear();
  CHECK(serialize_descriptor_text(d).find("<SEP>") == std::string::npos);
}

TEST_CASE("parse inverts serialize") {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    auto d = random_descriptor(rng);
    for (auto& l : d.lines) l.syllables = std::min(l.syllables, kLenMax);
    CHECK(parse_descriptor(serialize_descriptor(d)) == d);
  }
}

TEST_CASE("parse errors name the position") {
  CHECK(parse_error("<PREF> <LEN_3>") == "missing CLS at position 2");
  CHECK(parse_error("<PREF> </PREF>") == "empty descriptor");
  CHECK(parse_error("<PREF> <LEN_3> <CLS_ar>") == "missing </PREF> at position 3");
  CHECK(parse_error("<PREF> <LEN_3> <CLS_ar> hola </PREF>") == "unknown token 'hola' at position 3");
  CHECK(parse_error("<LEN_3> <CLS_ar> </PREF>") == "expected <PREF> at position 0");
  CHECK(parse_error("<PREF> <SEP> <LEN_3> <CLS_ar> </PREF>") == "<SEP> before first line at position 1");
  CHECK(parse_error("<PREF> <LEN_3> <LEN_4> </PREF>") == "missing CLS at position 2");
}

TEST_CASE("scheme DSL") {
  const auto s = parse_scheme("11A 11B 11B 11A");
  REQUIRE(s.items.size() == 4);
  CHECK(s.items[1] == RhymeScheme::Item{11, 'B'});
  CHECK(to_string(parse_scheme("10- 8A 10- 8A")) == "10- 8A 10- 8A");
  CHECK_THROWS_AS(parse_scheme("11A 11B 11A"), SchemeError);
  CHECK_THROWS_AS(parse_scheme("11a 11a"), SchemeError);
  CHECK_THROWS_AS(parse_scheme("A11 A11"), SchemeError);
  CHECK_THROWS_AS(parse_scheme(""), SchemeError);
  CHECK_THROWS_AS(parse_scheme("0A 0A"), SchemeError);
}

TEST_CASE("build_descriptor_from_scheme binds letters injectively") {
  const std::vector<std::string> pool = {"ar", "ena", "on", "ia", "ado"};
  const auto scheme = parse_scheme("11A 11B 11B 11A");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto d = build_descriptor_from_scheme(scheme, pool, rng, Language::spanish);
    REQUIRE(d.lines.size() == 4);
    REQUIRE(d.lines[0].rhyme);
    REQUIRE(d.lines[1].rhyme);
    CHECK(d.lines[0].rhyme == d.lines[3].rhyme);
    CHECK(d.lines[1].rhyme == d.lines[2].rhyme);
    CHECK(d.lines[0].rhyme != d.lines[1].rhyme);
  }
  const auto many = parse_scheme("4A 4B 4C 4D 4E 4A 4B 4C 4D 4E");
  Rng rng(1);
  const auto d = build_descriptor_from_scheme(many, pool, rng, Language::spanish);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < 5; ++i) distinct.insert(*d.lines[i].rhyme);
  CHECK(distinct.size() == 5);

  Rng r2(2);
  const auto free = build_descriptor_from_scheme(parse_scheme("10- 8- 10-"), pool, r2, Language::spanish);
  for (const auto& l : free.lines) CHECK_FALSE(l.rhyme.has_value());

  Rng r3(3);
  const std::vector<std::string> small = {"ar"};
  CHECK_THROWS_AS(build_descriptor_from_scheme(scheme, small, r3, Language::spanish), SchemeError);
}

TEST_CASE("first line pins its letter") {
  const std::vector<std::string> pool = {"ar", "ena", "on", "ia", "ado"};
  const std::string first = "Siento otro Yo que contra mí se empeña";
  // Without synalephas the line measures 13 syllables.
  REQUIRE(phonology::count_line_syllables(first, Language::spanish) == 13);
  Rng rng(5);
  const auto d = build_descriptor_from_scheme(parse_scheme("13A 11B 11B 13A"), pool, rng,
                                              Language::spanish, first);
  CHECK(d.lines[0].rhyme == "eña");
  CHECK(d.lines[3].rhyme == "eña");
  CHECK(d.lines[1].rhyme != d.lines[0].rhyme);

  Rng r2(5);
  CHECK_THROWS_AS(build_descriptor_from_scheme(parse_scheme("11A 11B 11B 11A"), pool, r2,
                                               Language::spanish, first),
                  SchemeError);
  Rng r3(5);
  const auto forced = build_descriptor_from_scheme(parse_scheme("11A 11B 11B 11A"), pool, r3,
                                                   Language::spanish, first, true);
  CHECK(forced.lines.size() == 4);
  CHECK(forced.lines[0].syllables == 11);
  CHECK(forced.lines[0].rhyme == "eña");
}

TEST_CASE("augment_corpus block structure") {
  const std::vector<std::string> one = {"uno dos, tres cuatro; cinco seis"};
  const auto out = augment_corpus(one, Language::spanish, 1, 0.0);
  for (const auto& line : out.lines) {
    const auto toks = text::split_ws(line);
    std::size_t pref = 0, end = 0, brk = 0;
    for (const auto& t : toks) {
      pref += t == token::kPref;
      end += t == token::kPrefEnd;
      brk += t == token::kBrk;
    }
    CHECK(pref == 1);
    CHECK(end == 1);
    const auto desc = parse_descriptor_text(line.substr(0, line.find("</PREF>") + 7));
    CHECK(brk == desc.lines.size() - 1);
  }
}

TEST_CASE("augment_corpus strips back to the phrase text") {
  Rng gen(123);
  static const std::vector<std::string> words = {"la", "casa", "roja", "canción", "mar", "luchar",
                                                 "corazón", "amor", "noche", "vida", "cielo"};
  static const std::vector<std::string> punct = {", ", ". ", "; ", ": ", "\n", " (", ") ", " «", "» "};
  std::vector<std::string> docs;
  for (int d = 0; d < 1000; ++d) {
    std::string doc;
    const auto n = gen.uniform_int(5, 60);
    for (int i = 0; i < n; ++i) {
      doc += words[static_cast<std::size_t>(gen.uniform_int(0, words.size() - 1))];
      doc += gen.uniform() < 0.25 ? punct[static_cast<std::size_t>(gen.uniform_int(0, punct.size() - 1))] : " ";
    }
    docs.push_back(doc);
  }
  const auto out = augment_corpus(docs, Language::spanish, 42, kMaskProb, 2);
  std::string stripped;
  for (const auto& l : out.lines) {
    if (!stripped.empty()) stripped += ' ';
    stripped += strip_control(l);
  }
  // Merging reinserts delimiters; compare on word content only.
  auto words_only = [](std::string_view s) {
    std::string w;
    for (char32_t c : text::to_u32(s))
      if (!segmentation::is_delimiter(c) && !text::is_space(c)) w += text::to_utf8(c);
    return w;
  };
  std::string source;
  for (const auto& d : docs) source += words_only(d);
  CHECK(words_only(stripped) == source);

  const double rate = double(out.masked) / out.line_specs;
  CHECK(rate > 0.12);
  CHECK(rate < 0.18);

  const auto again = augment_corpus(docs, Language::spanish, 42, kMaskProb, 1);
  CHECK(again.lines == out.lines);
}

TEST_CASE("class frequency table round-trips through its file") {
  ClassFrequencyTable t;
  t.add("ar", 5);
  t.add("on", 9);
  t.add("ena", 5);
  CHECK(t.top(2) == std::vector<std::string>{"on", "ar"});
  const auto path = std::filesystem::temp_directory_path() / "verse_classes_test.tsv";
  t.write(path);
  CHECK(ClassFrequencyTable::read(path).ranked() == t.ranked());
  std::filesystem::remove(path);
}
