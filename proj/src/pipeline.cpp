#include "verse/pipeline.hpp"

#include "verse/log.hpp"
#include "verse/parallel.hpp"
#include "verse/phonology.hpp"
#include "verse/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace verse::pipeline {
namespace {

using constraints::Candidate;
using constraints::Reason;
using descriptor::StructureDescriptor;

std::set<TokenId> stop_tokens(const tokenizer::Vocab& vocab) {
  std::set<TokenId> stop;
  for (std::size_t id = 0; id < vocab.control_budget(); ++id)
    if (static_cast<TokenId>(id) != vocab.brk()) stop.insert(static_cast<TokenId>(id));
  return stop;
}

std::vector<std::string> split_at_breaks(const tokenizer::Vocab& vocab, std::span<const TokenId> tokens) {
  std::vector<std::string> lines;
  std::vector<TokenId> current;
  for (const TokenId t : tokens) {
    if (t == vocab.brk()) {
      lines.push_back(vocab.decode(current));
      current.clear();
    } else {
      current.push_back(t);
    }
  }
  if (!current.empty()) lines.push_back(vocab.decode(current));
  return lines;
}

Candidate sample_poelm(const Generator& gen, const std::vector<TokenId>& prefix,
                       std::optional<std::string_view> first_line, std::uint64_t seed, std::size_t index) {
  Rng rng(seed);
  lm::SampleConfig sc = gen.sampling;
  sc.stop = stop_tokens(gen.vocab);
  const auto result = lm::sample(gen.model, prefix, rng, sc);
  std::vector<std::string> lines;
  if (first_line) lines.push_back(text::normalize_ws(*first_line));
  for (auto& l : split_at_breaks(gen.vocab, result.tokens)) lines.push_back(std::move(l));
  if (lines.empty()) lines.emplace_back();
  return constraints::make_candidate(std::move(lines), gen.lang, result.tokens, index);
}

Candidate sample_baseline(const Generator& gen, const StructureDescriptor& desc, const std::vector<TokenId>& prefix,
                          std::uint64_t seed, std::size_t index) {
  Rng rng(seed);
  std::size_t target = 0;
  std::vector<std::size_t> counts;
  for (const auto& spec : desc.lines) {
    target += spec.syllables;
    counts.push_back(spec.syllables);
  }
  auto dec = gen.model.decoder();
  for (const TokenId t : prefix) dec->push(t);
  std::vector<TokenId> all = prefix;
  std::vector<TokenId> generated;
  for (std::size_t i = 0; i < gen.sampling.max_new && dec->length() < gen.model.context_limit(); ++i) {
    const TokenId t = lm::draw(dec->log_probs(), gen.sampling, rng);
    if (gen.vocab.is_control(t)) break;
    // Stop at the first word boundary once the syllable budget is reached.
    if (gen.vocab.piece(t).starts_with(tokenizer::kWordMarker) &&
        phonology::count_line_syllables(gen.vocab.decode(all), gen.lang) >= target)
      break;
    generated.push_back(t);
    all.push_back(t);
    dec->push(t);
  }
  const std::string text = gen.vocab.decode(all);
  auto lines = constraints::split_by_syllables(text, counts, gen.lang);
  return constraints::make_candidate(lines ? std::move(*lines) : std::vector<std::string>{text}, gen.lang,
                                     std::move(generated), index);
}

descriptor::RhymeScheme scheme_of(const StructureDescriptor& desc) {
  descriptor::RhymeScheme s;
  std::map<std::string, char> letters;
  for (const auto& line : desc.lines) {
    char letter = '-';
    if (line.rhyme) {
      auto [it, fresh] = letters.emplace(*line.rhyme, static_cast<char>('A' + letters.size()));
      letter = it->second;
    }
    s.items.push_back({line.syllables, letter});
  }
  return s;
}

nlohmann::json reason_or_null(const constraints::Verdict& v) {
  return v ? nlohmann::json(constraints::reason_name(v->reason)) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view kind_name(ModelKind kind) { return kind == ModelKind::poelm ? "poelm" : "baseline"; }

std::optional<ModelKind> parse_kind(std::string_view name) {
  if (name == "poelm") return ModelKind::poelm;
  if (name == "baseline") return ModelKind::baseline;
  return std::nullopt;
}

std::vector<std::string> class_pool(const tokenizer::Vocab& vocab, std::size_t size) {
  auto classes = vocab.classes();
  if (classes.size() > size) classes.resize(size);
  return classes;
}

std::vector<TokenId> poelm_prefix(const Generator& gen, const StructureDescriptor& desc,
                                  std::optional<std::string_view> first_line) {
  const auto known = [&](std::string_view key) { return gen.vocab.has_class(key); };
  auto prefix = gen.vocab.encode(descriptor::serialize_descriptor_text(desc, known));
  if (first_line) {
    const auto line = gen.vocab.encode(*first_line);
    prefix.insert(prefix.end(), line.begin(), line.end());
    prefix.push_back(gen.vocab.brk());
  }
  return prefix;
}

std::vector<Candidate> generate_candidates(const Generator& gen, const StructureDescriptor& desc,
                                           std::optional<std::string_view> first_line, std::size_t k,
                                           std::uint64_t seed, std::size_t jobs) {
  std::vector<Candidate> out(k);
  if (k == 0) return out;
  std::vector<TokenId> prefix;
  if (gen.kind == ModelKind::poelm) {
    prefix = poelm_prefix(gen, desc, first_line);
  } else {
    if (!first_line || text::normalize_ws(*first_line).empty())
      throw std::invalid_argument("baseline generation needs a first line to condition on");
    prefix = gen.vocab.encode(*first_line);
  }
  if (prefix.size() >= gen.model.context_limit())
    throw std::invalid_argument("prompt of " + std::to_string(prefix.size()) + " tokens exceeds the model context");
  parallel_for(k, jobs, [&](std::size_t i) {
    const auto s = derive_seed(seed, i);
    out[i] = gen.kind == ModelKind::poelm ? sample_poelm(gen, prefix, first_line, s, i)
                                          : sample_baseline(gen, desc, prefix, s, i);
  });
  return out;
}

constraints::Verdict evaluate(ModelKind kind, const Candidate& cand, const StructureDescriptor& desc, bool with_bleu) {
  constraints::CheckOptions opts;
  if (!with_bleu) opts.disable(Reason::bleu);
  if (kind == ModelKind::baseline) {
    if (cand.lines.size() != desc.lines.size()) {
      std::string expected;
      for (const auto& l : desc.lines) expected += (expected.empty() ? "" : "/") + std::to_string(l.syllables);
      return constraints::Rejection{Reason::syllables, {}, "text does not split into lines of " + expected + " syllables"};
    }
    opts.disable(Reason::repeated_word).disable(Reason::bleu);
  }
  return constraints::check_candidate(cand, desc, opts);
}

double fluency(const Generator& gen, const Candidate& cand) {
  std::string joined;
  for (const auto& l : cand.lines) {
    if (!joined.empty()) joined += ' ';
    joined += l;
  }
  std::vector<TokenId> ids;
  for (const TokenId t : gen.vocab.encode(joined))
    if (!gen.vocab.is_control(t)) ids.push_back(t);
  if (ids.size() < 2) return -std::numeric_limits<double>::infinity();
  return lm::log_likelihood(gen.model, ids).mean();
}

std::vector<Ranked> rerank(const Generator& gen, std::span<const Candidate* const> survivors, std::size_t jobs) {
  std::vector<Ranked> out(survivors.size());
  parallel_for(survivors.size(), jobs, [&](std::size_t i) { out[i] = {survivors[i], fluency(gen, *survivors[i])}; });
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate->index < b.candidate->index;
  });
  return out;
}

GenerationRun run_with_descriptor(const Generator& gen, const StructureDescriptor& desc,
                                  std::optional<std::string_view> first_line, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  GenerationRun run;
  run.scheme = scheme_of(desc);
  run.desc = desc;
  if (first_line) run.first_line = text::normalize_ws(*first_line);
  run.kind = gen.kind;
  run.k = cfg.k;
  run.seed = cfg.seed;
  auto cands = generate_candidates(gen, desc, first_line, cfg.k, derive_seed(cfg.seed, 1), cfg.jobs);
  run.candidates.resize(cands.size());
  parallel_for(cands.size(), cfg.jobs, [&](std::size_t i) {
    auto& r = run.candidates[i];
    r.candidate = std::move(cands[i]);
    r.verdict = evaluate(gen.kind, r.candidate, desc, true);
    r.structural_verdict = evaluate(gen.kind, r.candidate, desc, false);
    if (!r.structural_verdict) r.fluency = fluency(gen, r.candidate);
  });
  for (const auto& r : run.candidates)
    if (r.verdict) ++run.rejections[static_cast<std::size_t>(r.verdict->reason)];
  auto order = [&](bool full) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < run.candidates.size(); ++i) {
      const auto& r = run.candidates[i];
      if (full ? !r.verdict : !r.structural_verdict) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double fa = *run.candidates[a].fluency, fb = *run.candidates[b].fluency;
      if (fa != fb) return fa > fb;
      return a < b;
    });
    return idx;
  };
  run.ranked = order(true);
  run.ranked_no_bleu = order(false);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log::info(kind_name(gen.kind), ": ", run.survivors(), "/", run.k, " candidates pass (", run.seconds, " s)");
  return run;
}

GenerationRun run_generation(const Generator& gen, const descriptor::RhymeScheme& scheme,
                             std::optional<std::string_view> first_line, const RunConfig& cfg) {
  const auto pool = class_pool(gen.vocab, cfg.pool_size);
  Rng bind_rng(derive_seed(cfg.seed, 0));
  const auto desc = descriptor::build_descriptor_from_scheme(scheme, pool, bind_rng, gen.lang, first_line, cfg.force);
  auto run = run_with_descriptor(gen, desc, first_line, cfg);
  run.scheme = scheme;
  return run;
}

std::vector<std::size_t> top_n_listing(const GenerationRun& run, std::size_t n) {
  std::vector<std::size_t> out;
  const std::size_t half = (n + 1) / 2;
  auto take = [&](const std::vector<std::size_t>& from) {
    for (std::size_t i = 0; i < std::min(half, from.size()); ++i)
      if (std::find(out.begin(), out.end(), from[i]) == out.end()) out.push_back(from[i]);
  };
  take(run.ranked);
  take(run.ranked_no_bleu);
  if (out.size() > n) out.resize(n);
  return out;
}

std::variant<Candidate, NoValidPoem> generate_poem(const Generator& gen, const descriptor::RhymeScheme& scheme,
                                                   std::optional<std::string_view> first_line, const RunConfig& cfg) {
  const auto run = run_generation(gen, scheme, first_line, cfg);
  if (const auto* best = run.best()) return best->candidate;
  return NoValidPoem{run.rejections, run.k};
}

nlohmann::json candidate_record(const GenerationRun& run, std::size_t index) {
  const auto& r = run.candidates.at(index);
  auto rec = constraints::verdict_record(r.candidate, r.verdict);
  rec["structural_reason"] = reason_or_null(r.structural_verdict);
  rec["fluency"] = r.fluency ? nlohmann::json(*r.fluency) : nlohmann::json(nullptr);
  const auto pos = std::find(run.ranked.begin(), run.ranked.end(), index);
  rec["rank"] = pos == run.ranked.end() ? nlohmann::json(nullptr) : nlohmann::json(pos - run.ranked.begin() + 1);
  rec["tokens"] = r.candidate.raw_tokens;
  return rec;
}

nlohmann::json run_summary(const GenerationRun& run, const tokenizer::Vocab& vocab) {
  nlohmann::json rejections = nlohmann::json::object();
  for (const auto r : constraints::kAllReasons)
    rejections[std::string(constraints::reason_name(r))] = run.rejections[static_cast<std::size_t>(r)];
  const auto known = [&](std::string_view key) { return vocab.has_class(key); };
  nlohmann::json summary{
      {"seed", run.seed},
      {"k", run.k},
      {"model_kind", kind_name(run.kind)},
      {"scheme", descriptor::to_string(run.scheme)},
      {"descriptor", descriptor::serialize_descriptor_text(run.desc, known)},
      {"first_line", run.first_line ? nlohmann::json(*run.first_line) : nlohmann::json(nullptr)},
      {"survivors", run.survivors()},
      {"structural_survivors", run.ranked_no_bleu.size()},
      {"rejections", rejections},
      {"ranked", run.ranked},
      {"top_listing", top_n_listing(run)},
      {"status", run.best() ? "pass" : "no_valid_poem"},
  };
  summary["poem"] = run.best() ? nlohmann::json(run.best()->candidate.lines) : nlohmann::json(nullptr);
  return summary;
}

void write_run_artifacts(const GenerationRun& run, const tokenizer::Vocab& vocab, const std::filesystem::path& stem) {
  const auto base = stem.string();
  {
    std::ofstream out(base + ".candidates.jsonl");
    if (!out) throw std::runtime_error("cannot write " + base + ".candidates.jsonl");
    for (std::size_t i = 0; i < run.candidates.size(); ++i) out << candidate_record(run, i).dump() << '\n';
  }
  std::ofstream out(base + ".summary.json");
  if (!out) throw std::runtime_error("cannot write " + base + ".summary.json");
  out << run_summary(run, vocab).dump(2) << '\n';
}

}  // namespace verse::pipeline
