#include "oracle.hpp"
#include "toy_world.hpp"

#include "verse/pipeline.hpp"
#include "verse/synth.hpp"
#include "verse/text.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace verse;
using namespace verse::pipeline;
using descriptor::LineSpec;
using descriptor::StructureDescriptor;

namespace {

// Emits fixed continuations after whatever prompt it is given. At each step
// the probability mass is split evenly over the scripts that agree with the
// tokens generated so far.
class ScriptedModel final : public lm::LanguageModel {
 public:
  ScriptedModel(std::size_t vocab, std::vector<std::vector<TokenId>> scripts)
      : vocab_(vocab), scripts_(std::move(scripts)) {
    config_.backend = "ngram";
    config_.context = 256;
  }
  void set_prompt_length(std::size_t n) { prompt_ = n; }

  const lm::ModelConfig& config() const override { return config_; }
  std::size_t vocab_size() const override { return vocab_; }
  lm::TrainReport fit(const lm::TokenStream&, const lm::TokenStream&, const lm::TrainConfig&) override { return {}; }
  std::vector<double> score(std::span<const TokenId> tokens) const override {
    return std::vector<double>(tokens.size() - 1, -1.0);
  }
  std::vector<double> next_log_probs(std::span<const TokenId> context) const override {
    std::vector<double> p(vocab_, 0.0);
    const std::span<const TokenId> generated =
        context.size() > prompt_ ? context.subspan(prompt_) : std::span<const TokenId>();
    std::size_t live = 0;
    for (const auto& s : scripts_) {
      if (s.size() <= generated.size() || !std::equal(generated.begin(), generated.end(), s.begin())) continue;
      p[static_cast<std::size_t>(s[generated.size()])] += 1.0;
      ++live;
    }
    for (auto& v : p) v = live ? std::log(v / static_cast<double>(live)) : std::log(1.0 / static_cast<double>(vocab_));
    return p;
  }
  std::unique_ptr<lm::Decoder> decoder() const override { return std::make_unique<Dec>(*this); }
  void write_payload(std::ostream&) const override {}
  void read_payload(std::istream&) override {}

 private:
  struct Dec final : lm::Decoder {
    explicit Dec(const ScriptedModel& m) : m(m) {}
    void push(TokenId t) override { history.push_back(t); }
    std::vector<double> log_probs() const override { return m.next_log_probs(history); }
    std::size_t length() const override { return history.size(); }
    const ScriptedModel& m;
    std::vector<TokenId> history;
  };

  lm::ModelConfig config_;
  std::size_t vocab_;
  std::vector<std::vector<TokenId>> scripts_;
  std::size_t prompt_ = 0;
};

StructureDescriptor abba() {
  StructureDescriptor d;
  d.lines = {LineSpec{4, "ar"}, LineSpec{4, "on"}, LineSpec{4, "on"}, LineSpec{4, "ar"}};
  return d;
}

std::vector<TokenId> concat(std::initializer_list<std::vector<TokenId>> parts) {
  std::vector<TokenId> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST_CASE("prefix layout") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  const auto prefix = poelm_prefix(gen, abba(), std::string_view("debo luchar"));
  REQUIRE(prefix.size() > 4);
  CHECK(prefix.front() == w.vocab.pref());
  CHECK(prefix.back() == w.vocab.brk());
  CHECK(std::count(prefix.begin(), prefix.end(), w.vocab.pref_end()) == 1);
  const auto no_line = poelm_prefix(gen, abba(), std::nullopt);
  CHECK(no_line.back() == w.vocab.pref_end());
}

TEST_CASE("k = 0 yields nothing") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  CHECK(generate_candidates(gen, abba(), std::string_view("debo luchar"), 0, 1).empty());
  const auto scheme = descriptor::parse_scheme("4A 4B 4B 4A");
  RunConfig cfg;
  cfg.k = 0;
  const auto result = generate_poem(gen, scheme, std::string_view("debo luchar"), cfg);
  REQUIRE(std::holds_alternative<NoValidPoem>(result));
  CHECK(std::get<NoValidPoem>(result).k == 0);
}

TEST_CASE("scripted samples are cut, split and filtered") {
  const auto& w = world();
  const auto& v = w.vocab;
  const std::vector<TokenId> brk{v.brk()}, pref{v.pref()};
  const auto good = concat({v.encode("mi corazón"), brk, v.encode("para canción"), brk, v.encode("no sé llorar"), pref,
                            v.encode("<LEN_3>")});
  const auto short_one = concat({v.encode("mi corazón"), brk, v.encode("para canción"), pref});
  const auto bad_count = concat({v.encode("mi corazón"), brk, v.encode("el perro"), brk, v.encode("no sé llorar"), pref});
  const auto repeated = concat({v.encode("mi corazón"), brk, v.encode("el corazón"), brk, v.encode("no sé llorar"), pref});
  ScriptedModel model(v.size(), {good, short_one, bad_count, repeated});
  Generator gen{model, v};
  const auto desc = abba();
  const std::string first = "debo luchar";
  model.set_prompt_length(poelm_prefix(gen, desc, std::string_view(first)).size());

  RunConfig cfg;
  cfg.k = 40;
  cfg.seed = 3;
  const auto run = run_with_descriptor(gen, desc, std::string_view(first), cfg);
  REQUIRE(run.candidates.size() == 40);
  std::size_t rejected = 0;
  for (const auto n : run.rejections) rejected += n;
  CHECK(run.k == run.survivors() + rejected);
  CHECK(run.survivors() > 0);
  CHECK(run.rejections[static_cast<std::size_t>(constraints::Reason::line_count)] > 0);
  CHECK(run.rejections[static_cast<std::size_t>(constraints::Reason::syllables)] > 0);
  CHECK(run.rejections[static_cast<std::size_t>(constraints::Reason::repeated_word)] > 0);

  const verse::testing::ConstraintOracle oracle(Language::spanish);
  for (const auto i : run.ranked) {
    const auto& c = run.candidates[i].candidate;
    CHECK(c.lines == std::vector<std::string>{"debo luchar", "mi corazón", "para canción", "no sé llorar"});
    CHECK(oracle.check(c.lines, desc).pass);
  }
  // Equal fluency everywhere: ranking falls back to generation order.
  CHECK(std::is_sorted(run.ranked.begin(), run.ranked.end()));
  const auto best = run.best();
  REQUIRE(best);
  CHECK(best->candidate.index == run.ranked.front());
}

TEST_CASE("generation is deterministic and independent of worker count") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  const auto scheme = descriptor::parse_scheme("7A 7B 7B 7A");
  RunConfig cfg;
  cfg.k = 24;
  cfg.seed = 11;
  const std::string first = "la casa de mi perro";
  const auto a = run_generation(gen, scheme, std::string_view(first), cfg);
  cfg.jobs = 3;
  const auto b = run_generation(gen, scheme, std::string_view(first), cfg);
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].candidate.lines == b.candidates[i].candidate.lines);
    CHECK(a.candidates[i].candidate.raw_tokens == b.candidates[i].candidate.raw_tokens);
  }
  CHECK(a.ranked == b.ranked);
  CHECK(a.desc == b.desc);
  CHECK(run_summary(a, w.vocab) == run_summary(b, w.vocab));

  std::size_t rejected = 0;
  for (const auto n : a.rejections) rejected += n;
  CHECK(a.k == a.survivors() + rejected);

  cfg.seed = 12;
  const auto c = run_generation(gen, scheme, std::string_view(first), cfg);
  bool differs = false;
  for (std::size_t i = 0; i < c.candidates.size(); ++i)
    differs |= c.candidates[i].candidate.raw_tokens != a.candidates[i].candidate.raw_tokens;
  CHECK(differs);
}

TEST_CASE("run artifacts are byte-identical across runs") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  const auto scheme = descriptor::parse_scheme("7A 7B 7B 7A");
  RunConfig cfg;
  cfg.k = 16;
  cfg.seed = 5;
  const auto dir = std::filesystem::temp_directory_path();
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string first_jsonl, first_summary;
  for (int round = 0; round < 2; ++round) {
    const auto run = run_generation(gen, scheme, std::string_view("la casa de mi perro"), cfg);
    const auto stem = dir / ("verse_run_" + std::to_string(round));
    write_run_artifacts(run, w.vocab, stem);
    const auto jsonl = slurp(stem.string() + ".candidates.jsonl");
    const auto summary = slurp(stem.string() + ".summary.json");
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 16);
    CHECK(summary.find("\"seed\": 5") != std::string::npos);
    if (round == 0) {
      first_jsonl = jsonl;
      first_summary = summary;
    } else {
      CHECK(jsonl == first_jsonl);
      CHECK(summary == first_summary);
    }
    std::filesystem::remove(stem.string() + ".candidates.jsonl");
    std::filesystem::remove(stem.string() + ".summary.json");
  }
}

TEST_CASE("scheme binding pins the first line") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  const auto scheme = descriptor::parse_scheme("11A 11B 11B 11A");
  const std::string first = "un Yo para el que no debo luchar";
  RunConfig cfg;
  cfg.k = 4;
  const auto run = run_generation(gen, scheme, std::string_view(first), cfg);
  REQUIRE(run.desc.lines.size() == 4);
  CHECK(run.desc.lines[0].rhyme == std::optional<std::string>("ar"));
  CHECK(run.desc.lines[3].rhyme == run.desc.lines[0].rhyme);
  CHECK(run.desc.lines[1].rhyme == run.desc.lines[2].rhyme);
  CHECK(run.desc.lines[1].rhyme != run.desc.lines[0].rhyme);
  for (const auto& c : run.candidates) CHECK(c.candidate.lines.front() == first);
}

TEST_CASE("baseline candidates are split by syllables") {
  const auto& w = world();
  Generator gen{*w.baseline, w.vocab, Language::spanish, ModelKind::baseline, {}};
  const auto scheme = descriptor::parse_scheme("7A 7B 7B 7A");
  RunConfig cfg;
  cfg.k = 150;
  cfg.seed = 2;
  const auto run = run_generation(gen, scheme, std::string_view("la casa de mi perro"), cfg);
  CHECK(run.rejections[static_cast<std::size_t>(constraints::Reason::line_count)] == 0);
  CHECK(run.rejections[static_cast<std::size_t>(constraints::Reason::repeated_word)] == 0);
  CHECK(run.rejections[static_cast<std::size_t>(constraints::Reason::bleu)] == 0);
  std::size_t split = 0;
  for (const auto& c : run.candidates) {
    CHECK(c.candidate.lines.front().starts_with("la casa de mi perro"));
    if (c.candidate.lines.size() == 4) {
      ++split;
      for (std::size_t i = 0; i < 4; ++i) CHECK(c.candidate.analysis[i].syllables == 7);
    } else {
      REQUIRE(c.verdict);
      CHECK(c.verdict->reason == constraints::Reason::syllables);
    }
  }
  CHECK(split > 0);
  CHECK_THROWS_AS(generate_candidates(gen, run.desc, std::nullopt, 2, 1), std::invalid_argument);
}

TEST_CASE("rerank contracts") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  const auto a = constraints::make_candidate({"la casa roja"}, Language::spanish, {}, 0);
  const auto b = constraints::make_candidate({"la casa roja"}, Language::spanish, {}, 1);
  SUBCASE("single survivor") {
    const std::vector<const constraints::Candidate*> one{&a};
    const auto r = rerank(gen, one);
    REQUIRE(r.size() == 1);
    CHECK(r[0].candidate == &a);
  }
  SUBCASE("identical texts order by index") {
    const std::vector<const constraints::Candidate*> two{&b, &a};
    const auto r = rerank(gen, two);
    REQUIRE(r.size() == 2);
    CHECK(r[0].candidate->index == 0);
    CHECK(r[1].candidate->index == 1);
    CHECK(r[0].score == r[1].score);
  }
  SUBCASE("empty input") { CHECK(rerank(gen, std::vector<const constraints::Candidate*>{}).empty()); }
}

TEST_CASE("fluent text outranks its shuffled tokens") {
  const auto& w = world();
  Generator gen{*w.poelm, w.vocab};
  Rng rng(4);
  int wins = 0;
  for (const auto& s : w.heldout_phrases) {
    auto words = text::split_ws(s);
    for (std::size_t i = words.size(); i > 1; --i)
      std::swap(words[i - 1], words[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    std::string shuffled;
    for (const auto& t : words) shuffled += (shuffled.empty() ? "" : " ") + t;
    const auto fluent = constraints::make_candidate({s}, Language::spanish, {}, 0);
    const auto mixed = constraints::make_candidate({shuffled}, Language::spanish, {}, 1);
    if (fluency(gen, fluent) > fluency(gen, mixed)) ++wins;
  }
  MESSAGE("fluent wins " << wins << "/20");
  CHECK(wins >= 18);
}

TEST_CASE("top-n listing merges the two rankings") {
  GenerationRun run;
  run.ranked = {0, 1, 2, 3};
  run.ranked_no_bleu = {4, 5, 6, 0};
  CHECK(top_n_listing(run) == std::vector<std::size_t>{0, 1, 2, 4, 5, 6});
  run.ranked_no_bleu = {0, 1, 2, 3};
  CHECK(top_n_listing(run) == std::vector<std::size_t>{0, 1, 2});
  run.ranked = {};
  run.ranked_no_bleu = {7};
  CHECK(top_n_listing(run) == std::vector<std::size_t>{7});
}
