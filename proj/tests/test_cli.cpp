#include "cli.hpp"

#include "verse/descriptor.hpp"
#include "verse/lm.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace verse;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "verse");
  args.insert(args.begin() + 1, "-q");
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Per-binary scratch directory, cleared on first use.
fs::path scratch() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "verse_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (scratch() / name).string(); }

// Synthetic corpus, vocabulary and n-gram models built once through the CLI.
void ensure_toy_models() {
  static bool built = false;
  if (built) return;
  REQUIRE(call({"synth-corpus", "--out", at("corpus"), "--words", "40000", "--nouns", "120", "--verbs", "80",
                "--adjectives", "60", "--poems", at("poems.txt"), "--poem-count", "4"})
              .code == 0);
  REQUIRE(call({"augment", "--corpus", at("corpus"), "--out", at("aug.txt"), "--seed", "3"}).code == 0);
  REQUIRE(call({"train-vocab", "--in", at("aug.txt"), "--size", "1000", "--out", at("vocab.tsv")}).code == 0);
  REQUIRE(call({"train-lm", "--in", at("aug.txt"), "--vocab", at("vocab.tsv"), "--backend", "ngram", "--context", "128",
                "--out", at("poelm.ckpt")})
              .code == 0);
  REQUIRE(call({"train-baseline", "--in", at("aug.txt"), "--vocab", at("vocab.tsv"), "--backend", "ngram",
                "--context", "128", "--out", at("base.ckpt")})
              .code == 0);
  built = true;
}

// An n-gram model that has memorized a single quatrain.
void ensure_memorized_model() {
  static bool built = false;
  if (built) return;
  descriptor::StructureDescriptor d;
  d.lines = {{4, "ar"}, {4, "on"}, {4, "on"}, {4, "ar"}};
  const std::string record =
      descriptor::serialize_descriptor_text(d) + " debo luchar <BRK> mi corazón <BRK> para canción <BRK> no sé llorar";
  std::string stream;
  for (int i = 0; i < 300; ++i) stream += record + "\n";
  spill(at("memo.txt"), stream);
  spill(at("memo.txt.classes"), "ar\t600\non\t600\n");
  REQUIRE(call({"train-vocab", "--in", at("memo.txt"), "--size", "900", "--out", at("memo.vocab")}).code == 0);
  REQUIRE(call({"train-lm", "--in", at("memo.txt"), "--vocab", at("memo.vocab"), "--backend", "ngram", "--context",
                "64", "--out", at("memo.ckpt")})
              .code == 0);
  built = true;
}

}  // namespace

TEST_CASE("help output is stable") {
  const auto main_help = call({"--help"});
  CHECK(main_help.code == 0);
  CHECK(main_help.out == slurp(fs::path(VERSE_TEST_DATA) / "help_main.txt"));
  const auto gen_help = call({"generate", "--help"});
  CHECK(gen_help.code == 0);
  CHECK(gen_help.out == slurp(fs::path(VERSE_TEST_DATA) / "help_generate.txt"));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(call({}).code == 2);
  CHECK(call({"generate", "--model", "x.ckpt", "--scheme", "7A 7A", "--bogus"}).code == 2);
  CHECK(call({"augment", "--corpus", "somewhere"}).code == 2);
  CHECK(call({"validate", "--lang", "xx", "--scheme", "7A 7A", "missing.txt"}).code == 2);
  const auto missing = call({"generate", "--model", at("none.ckpt"), "--scheme", "7A 7A"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("none.ckpt") != std::string::npos);
}

TEST_CASE("toy workflow") {
  ensure_toy_models();
  SUBCASE("invalid scheme") {
    const auto r = call({"generate", "--model", at("poelm.ckpt"), "--scheme", "7A 7Q?"});
    CHECK(r.code == 2);
    CHECK(r.err.find("scheme") != std::string::npos);
  }
  SUBCASE("k = 0 is a NoValidPoem") {
    const auto r = call({"generate", "--model", at("poelm.ckpt"), "--scheme", "7A 7B 7B 7A", "--k", "0", "--out",
                         at("k0")});
    CHECK(r.code == 1);
    CHECK(r.out.empty());
    CHECK(slurp(at("k0.summary.json")).find("no_valid_poem") != std::string::npos);
  }
  SUBCASE("artifacts are reproducible") {
    for (const auto* stem : {"a", "b"})
      CHECK(call({"generate", "--model", at("poelm.ckpt"), "--scheme", "7A 7B 7B 7A", "--k", "30", "--seed", "9",
                  "--out", at(stem)})
                .code <= 1);
    CHECK(slurp(at("a.candidates.jsonl")) == slurp(at("b.candidates.jsonl")));
    CHECK(slurp(at("a.summary.json")) == slurp(at("b.summary.json")));
    CHECK(slurp(at("a.summary.json")).find("\"seed\": 9") != std::string::npos);
  }
  SUBCASE("baseline generation needs a first line") {
    CHECK(call({"generate", "--model", at("base.ckpt"), "--scheme", "7A 7B 7B 7A", "--k", "5", "--no-artifacts"}).code ==
          2);
  }
  SUBCASE("corpus blocks validate against their own descriptors") {
    std::ifstream in(at("aug.txt"));
    std::string record;
    int checked = 0;
    while (checked < 25 && std::getline(in, record)) {
      const auto end = record.find("</PREF>");
      REQUIRE(end != std::string::npos);
      const auto desc = record.substr(0, end + 7);
      std::string body = record.substr(end + 8), poem;
      for (std::size_t pos; (pos = body.find(" <BRK> ")) != std::string::npos; body.erase(0, pos + 7))
        poem += body.substr(0, pos) + "\n";
      poem += body + "\n";
      spill(at("block.txt"), poem);
      const auto r = call({"validate", "--structure-only", "--descriptor", desc, at("block.txt")});
      CHECK_MESSAGE(r.code == 0, record << "\n" << r.out);
      ++checked;
    }
    CHECK(checked == 25);
  }
  SUBCASE("evaluations write csv files") {
    const std::vector<std::string> common = {"--poelm", at("poelm.ckpt"), "--baseline", at("base.ckpt"), "--poems",
                                             at("poems.txt")};
    auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
      head.insert(head.end(), common.begin(), common.end());
      head.insert(head.end(), tail.begin(), tail.end());
      return call(head);
    };
    CHECK(with({"eval", "filtering"}, {"--k", "10", "--out", at("filt")}).code == 0);
    CHECK(slurp(at("filt.csv")).starts_with("model,candidates,correct,"));
    CHECK(with({"eval", "perplexity"}, {"--prose", at("corpus"), "--out", at("ppl")}).code == 0);
    CHECK(slurp(at("ppl.csv")).starts_with("model,poetic"));
    CHECK(with({"eval", "curve"}, {"--min-tokens", "2", "--max-tokens", "40", "--out", at("curve")}).code == 0);
    CHECK(slurp(at("curve.csv")).starts_with("x,advantage"));
    CHECK(with({"eval", "curve"}, {"--min-tokens", "300", "--max-tokens", "400", "--out", at("none")}).code == 2);
    const auto swapped = call({"eval", "curve", "--poelm", at("base.ckpt"), "--baseline", at("poelm.ckpt"), "--poems",
                               at("poems.txt")});
    CHECK(swapped.code == 2);
  }
  SUBCASE("config files") {
    spill(at("bad.json"), R"({"model": {"backend": "ngram", "colour": 3}})");
    CHECK(call({"train-lm", "--in", at("aug.txt"), "--vocab", at("vocab.tsv"), "--config", at("bad.json"), "--out",
                at("bad.ckpt")})
              .code == 2);
    spill(at("good.json"), R"({"model": {"backend": "ngram", "context": 96, "order": 2}, "sample": {"top_k": 5}})");
    CHECK(call({"train-lm", "--in", at("aug.txt"), "--vocab", at("vocab.tsv"), "--config", at("good.json"), "--out",
                at("good.ckpt")})
              .code == 0);
    const auto ck = lm::load_checkpoint(at("good.ckpt"));
    CHECK(ck.model->config().order == 2);
    CHECK(ck.model->config().context == 96);
    CHECK(ck.meta.at("sample").at("top_k") == 5);
  }
}

TEST_CASE("memorized quatrain") {
  ensure_memorized_model();
  const std::vector<std::string> base = {"generate",     "--model", at("memo.ckpt"), "--scheme", "4A 4B 4B 4A",
                                         "--first-line", "debo luchar", "--k", "20", "--no-artifacts"};
  SUBCASE("best poem") {
    const auto r = call(base);
    CHECK(r.code == 0);
    CHECK(r.out == "debo luchar\nmi corazón\npara canción\nno sé llorar\n");
  }
  SUBCASE("interactive choice") {
    auto args = base;
    args.push_back("--interactive");
    const auto r = call(args, "1\n");
    CHECK(r.code == 0);
    CHECK(r.out.find("[1]") != std::string::npos);
    CHECK(r.out.find("choose 1-") != std::string::npos);
    CHECK(r.out.ends_with("\ndebo luchar\nmi corazón\npara canción\nno sé llorar\n"));
    CHECK(call(args, "seven\n").code == 2);
    CHECK(call(args, "99\n").code == 2);
  }
  SUBCASE("validate") {
    spill(at("quatrain.txt"), "debo luchar\nmi corazón\npara canción\nno sé llorar\n");
    CHECK(call({"validate", "--scheme", "4A 4B 4B 4A", at("quatrain.txt")}).code == 0);
    const auto bad = call({"validate", "--scheme", "4A 4A 4B 4B", at("quatrain.txt")});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL RHYME") != std::string::npos);
    CHECK(call({"validate", "--scheme", "4A 4B 4B 4A 4A", at("quatrain.txt")}).code == 1);
  }
}
