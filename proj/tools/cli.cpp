#include "cli.hpp"

#include "verse/constraints.hpp"
#include "verse/descriptor.hpp"
#include "verse/evalkit.hpp"
#include "verse/lm.hpp"
#include "verse/log.hpp"
#include "verse/parallel.hpp"
#include "verse/pipeline.hpp"
#include "verse/segmentation.hpp"
#include "verse/synth.hpp"
#include "verse/text.hpp"
#include "verse/tokenizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace verse::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Language language_arg(const std::string& code) {
  const auto lang = parse_language(code);
  if (!lang) throw UsageError("unknown language '" + code + "' (expected es or eu)");
  return *lang;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError(path + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "model" && key != "train" && key != "sample") throw UsageError(path + ": unknown section '" + key + "'");
  return j;
}

// Options shared by train-lm and train-baseline.
struct TrainArgs {
  std::string in, vocab, config, out, lang = "es";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps, batch, context, d_model, layers, heads, log_every;
  std::optional<double> lr;
  std::optional<std::string> backend;
  std::size_t heldout_every = 100;
};

struct SampleArgs {
  std::optional<double> temperature;
  std::optional<std::size_t> top_k, max_new;
};

void add_sample_options(CLI::App* cmd, SampleArgs& s) {
  cmd->add_option("--temperature", s.temperature, "Sampling temperature (0 = greedy)");
  cmd->add_option("--top-k", s.top_k, "Sample from the k most likely tokens (0 = all)");
  cmd->add_option("--max-new", s.max_new, "Maximum tokens sampled per candidate");
}

lm::SampleConfig apply_sample(lm::SampleConfig cfg, const SampleArgs& s) {
  if (s.temperature) cfg.temperature = *s.temperature;
  if (s.top_k) cfg.top_k = *s.top_k;
  if (s.max_new) cfg.max_new = *s.max_new;
  return cfg;
}

struct LoadedModel {
  lm::Checkpoint checkpoint;
  std::optional<tokenizer::Vocab> vocab_slot;
  const tokenizer::Vocab& vocab() const { return *vocab_slot; }
  Language lang = Language::spanish;
  pipeline::ModelKind kind = pipeline::ModelKind::poelm;
  lm::SampleConfig sample;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  m.checkpoint = lm::load_checkpoint(path);
  const auto& meta = m.checkpoint.meta;
  if (!meta.contains("vocab") || !meta.contains("kind") || !meta.contains("lang"))
    throw std::runtime_error(path + ": checkpoint was not written by train-lm or train-baseline");
  m.vocab_slot = tokenizer::Vocab::deserialize(meta.at("vocab").get<std::string>(), path);
  if (m.vocab().fingerprint() != m.checkpoint.vocab_hash)
    throw std::runtime_error(path + ": embedded vocabulary does not match the checkpoint hash");
  m.lang = language_arg(meta.at("lang").get<std::string>());
  const auto kind = pipeline::parse_kind(meta.at("kind").get<std::string>());
  if (!kind) throw std::runtime_error(path + ": unknown model kind");
  m.kind = *kind;
  if (meta.contains("sample")) m.sample = lm::SampleConfig::from_json(meta.at("sample"));
  return m;
}

pipeline::Generator generator_for(const LoadedModel& m, const lm::SampleConfig& sample) {
  return pipeline::Generator{*m.checkpoint.model, m.vocab(), m.lang, m.kind, sample};
}

void print_poem(std::ostream& out, const constraints::Candidate& c) {
  for (const auto& l : c.lines) out << l << '\n';
}

int cmd_synth_corpus(const std::string& out_dir, std::size_t words, std::size_t doc_words, std::uint64_t seed,
                     const synth::GeneratorConfig& gc, const std::string& poems_path, std::size_t poem_count,
                     const std::vector<std::string>& schemes, std::size_t pool_size, std::ostream& out) {
  synth::Generator gen(gc);
  if (!out_dir.empty()) {
    const auto docs = gen.corpus(words, doc_words, seed);
    synth::write_corpus(out_dir, docs);
    std::size_t total = 0;
    for (const auto& d : docs) total += text::split_ws(d).size();
    out << "wrote " << docs.size() << " documents, " << total << " words to " << out_dir << " (seed " << seed << ")\n";
  }
  if (!poems_path.empty()) {
    std::vector<descriptor::RhymeScheme> parsed;
    for (const auto& s : schemes) parsed.push_back(descriptor::parse_scheme(s));
    const auto pool = gen.common_rhymes(pool_size);
    Rng rng(derive_seed(seed, 0x706f656d));
    std::vector<synth::Poem> poems;
    std::size_t attempts = 0;
    while (poems.size() < poem_count) {
      if (++attempts > 100 * poem_count + 100) throw std::runtime_error("cannot build poems for the given schemes");
      if (auto p = gen.poem(rng, parsed[poems.size() % parsed.size()], pool)) poems.push_back(std::move(*p));
    }
    synth::write_poems(poems_path, poems);
    out << "wrote " << poems.size() << " poems to " << poems_path << '\n';
  }
  return kOk;
}

int cmd_augment(const std::string& corpus, const std::string& lang_code, std::uint64_t seed, const std::string& out_path,
                std::size_t jobs, std::ostream& out) {
  const auto lang = language_arg(lang_code);
  const auto layout = fs::is_directory(corpus) ? segmentation::CorpusLayout::file_per_document
                                               : segmentation::CorpusLayout::blank_line_separated;
  const auto docs = segmentation::load_documents(corpus, layout);
  if (docs.empty()) throw std::runtime_error("no documents in " + corpus);
  const auto aug = descriptor::augment_corpus(docs, lang, seed, descriptor::kMaskProb, jobs);
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out_path);
  for (const auto& l : aug.lines) f << l << '\n';
  aug.class_freqs.write(out_path + ".classes");
  json meta = {{"seed", seed},
               {"lang", std::string(language_code(lang))},
               {"documents", aug.documents},
               {"blocks", aug.blocks},
               {"line_specs", aug.line_specs},
               {"masked", aug.masked},
               {"classes", aug.class_freqs.size()}};
  write_text(out_path + ".meta.json", meta.dump(2) + "\n");
  out << "augmented " << aug.documents << " documents into " << aug.blocks << " blocks (" << aug.class_freqs.size()
      << " rhyme classes, seed " << seed << ")\n";
  return kOk;
}

int cmd_train_vocab(const std::string& in, std::size_t size, std::size_t control, std::string classes,
                    std::size_t max_lines, const std::string& out_path, std::ostream& out) {
  if (classes.empty()) classes = in + ".classes";
  auto lines = read_lines(in);
  if (max_lines > 0 && lines.size() > max_lines) lines.resize(max_lines);
  const auto freqs = descriptor::ClassFrequencyTable::read(classes);
  tokenizer::VocabConfig vc;
  vc.size = size;
  vc.control_budget = control;
  const auto vocab = tokenizer::Vocab::train(lines, vc, freqs);
  vocab.save(out_path);
  out << "vocabulary of " << vocab.size() << " entries (" << vocab.control_budget() << " control) written to "
      << out_path << '\n';
  return kOk;
}

int cmd_train(const TrainArgs& a, const SampleArgs& sa, pipeline::ModelKind kind, std::ostream& out) {
  const auto lang = language_arg(a.lang);
  const auto vocab = tokenizer::Vocab::load(a.vocab);
  const auto config = read_config(a.config);
  auto mc = lm::ModelConfig::from_json(config.value("model", json::object()));
  auto tc = lm::TrainConfig::from_json(config.value("train", json::object()));
  const auto sc = apply_sample(lm::SampleConfig::from_json(config.value("sample", json::object())), sa);
  if (a.backend) mc.backend = *a.backend;
  if (a.context) mc.context = *a.context;
  if (a.d_model) mc.d_model = *a.d_model;
  if (a.layers) mc.layers = *a.layers;
  if (a.heads) mc.heads = *a.heads;
  if (a.seed) tc.seed = *a.seed;
  if (a.steps) tc.steps = *a.steps;
  if (a.batch) tc.batch = *a.batch;
  if (a.lr) tc.lr = *a.lr;
  if (a.log_every) tc.log_every = *a.log_every;
  mc.validate();

  const auto records = read_lines(a.in);
  lm::TokenStream train, heldout;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string text =
        kind == pipeline::ModelKind::baseline ? descriptor::strip_control(records[i]) : records[i];
    const auto ids = vocab.encode(text);
    if (a.heldout_every > 0 && i % a.heldout_every == a.heldout_every - 1)
      heldout.append_record(ids);
    else
      train.append_record(ids);
  }
  log::info("training ", pipeline::kind_name(kind), " on ", train.tokens.size(), " tokens, ", heldout.tokens.size(),
            " held out");
  auto model = lm::create_model(mc, vocab.size(), tc.seed);
  const auto report = model->fit(train, heldout, tc);
  json meta = {{"kind", std::string(pipeline::kind_name(kind))},
               {"lang", std::string(language_code(lang))},
               {"train", tc.to_json()},
               {"sample", sc.to_json()},
               {"train_tokens", train.tokens.size()},
               {"heldout_tokens", heldout.tokens.size()},
               {"vocab", vocab.serialize()}};
  if (report.initial_heldout_loss) meta["initial_heldout_loss"] = *report.initial_heldout_loss;
  if (report.final_heldout_loss) meta["final_heldout_loss"] = *report.final_heldout_loss;
  lm::save_checkpoint(*model, a.out, vocab.fingerprint(), tc.seed, meta);
  out << pipeline::kind_name(kind) << " model written to " << a.out << " (seed " << tc.seed << ")";
  if (report.final_heldout_loss) out << ", held-out loss " << *report.final_heldout_loss;
  out << '\n';
  return kOk;
}

struct GenerateArgs {
  std::string model, scheme, first_line, out = "verse_run";
  bool has_first_line = false;
  pipeline::RunConfig run;
  bool interactive = false;
  bool no_artifacts = false;
};

int cmd_generate(const GenerateArgs& g, const SampleArgs& sa, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto m = load_model(g.model);
  const auto gen = generator_for(m, apply_sample(m.sample, sa));
  const auto scheme = descriptor::parse_scheme(g.scheme);
  std::optional<std::string_view> first;
  if (g.has_first_line) first = g.first_line;
  const auto run = pipeline::run_generation(gen, scheme, first, g.run);
  if (!g.no_artifacts) {
    pipeline::write_run_artifacts(run, m.vocab(), g.out);
    log::info("artifacts written to ", g.out, ".candidates.jsonl and ", g.out, ".summary.json");
  }

  auto report_failure = [&] {
    err << "no valid poem among " << run.k << " candidates:";
    for (const auto r : constraints::kAllReasons)
      err << ' ' << constraints::reason_name(r) << '=' << run.rejections[static_cast<std::size_t>(r)];
    err << '\n';
    return kNegative;
  };

  if (!g.interactive) {
    const auto* best = run.best();
    if (!best) return report_failure();
    print_poem(out, best->candidate);
    return kOk;
  }

  const auto listing = pipeline::top_n_listing(run);
  if (listing.empty()) return report_failure();
  for (std::size_t i = 0; i < listing.size(); ++i) {
    const auto& c = run.candidates[listing[i]];
    out << '[' << i + 1 << ']';
    if (c.verdict) out << " (" << constraints::reason_name(c.verdict->reason) << ')';
    out << '\n';
    for (const auto& l : c.candidate.lines) out << "    " << l << '\n';
  }
  out << "choose 1-" << listing.size() << ": " << std::flush;
  std::string answer;
  std::getline(in, answer);
  std::size_t choice = 0;
  try {
    std::size_t used = 0;
    choice = std::stoul(text::normalize_ws(answer), &used);
    if (used != text::normalize_ws(answer).size()) choice = 0;
  } catch (const std::exception&) {
    choice = 0;
  }
  if (choice < 1 || choice > listing.size())
    throw UsageError("expected a number between 1 and " + std::to_string(listing.size()));
  out << '\n';
  print_poem(out, run.candidates[listing[choice - 1]].candidate);
  return kOk;
}

// Letters are bound to the rhyme class of their first line.
descriptor::StructureDescriptor descriptor_for_scheme(const descriptor::RhymeScheme& scheme,
                                                     const constraints::Candidate& cand) {
  descriptor::StructureDescriptor desc;
  std::map<char, std::optional<std::string>> bound;
  for (std::size_t i = 0; i < scheme.items.size(); ++i) {
    const auto& item = scheme.items[i];
    descriptor::LineSpec spec{item.syllables, std::nullopt};
    if (item.letter != '-') {
      auto it = bound.find(item.letter);
      if (it == bound.end() && i < cand.analysis.size())
        it = bound.emplace(item.letter, cand.analysis[i].rhyme).first;
      if (it != bound.end()) spec.rhyme = it->second;
    }
    desc.lines.push_back(spec);
  }
  return desc;
}

int cmd_validate(const std::string& scheme_text, const std::string& descriptor_text, const std::string& lang_code,
                 const std::string& file, bool no_bleu, bool structure_only, std::ostream& out) {
  const auto lang = language_arg(lang_code);
  std::vector<std::string> lines;
  for (auto& l : read_lines(file))
    if (!l.starts_with("#")) lines.push_back(text::normalize_ws(l));
  const auto cand = constraints::make_candidate(lines, lang);
  descriptor::StructureDescriptor desc;
  if (!descriptor_text.empty())
    desc = descriptor::parse_descriptor_text(descriptor_text);
  else if (!scheme_text.empty())
    desc = descriptor_for_scheme(descriptor::parse_scheme(scheme_text), cand);
  else
    throw UsageError("validate needs --scheme or --descriptor");
  constraints::CheckOptions opts;
  if (no_bleu || structure_only) opts.disable(constraints::Reason::bleu);
  if (structure_only) opts.disable(constraints::Reason::repeated_word);
  const auto verdict = constraints::check_candidate(cand, desc, opts);
  for (std::size_t i = 0; i < cand.lines.size(); ++i) {
    const auto& a = cand.analysis[i];
    out << i + 1 << ": " << a.syllables << " syllables, rhyme " << a.rhyme.value_or("-");
    if (i < desc.lines.size()) out << " (want " << desc.lines[i].syllables << ", " << desc.lines[i].rhyme.value_or("-") << ')';
    out << '\n';
  }
  if (!verdict) {
    out << "PASS\n";
    return kOk;
  }
  out << "FAIL " << constraints::reason_name(verdict->reason) << ": " << verdict->detail << '\n';
  return kNegative;
}

struct EvalArgs {
  std::string poelm, baseline, poems, prose, out = "eval";
  std::size_t prompts = 10;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::size_t k = 200;
  evalkit::CurveConfig curve;
};

std::pair<LoadedModel, LoadedModel> load_pair(const EvalArgs& a) {
  auto p = load_model(a.poelm);
  auto b = load_model(a.baseline);
  if (p.kind != pipeline::ModelKind::poelm) throw UsageError(a.poelm + " is not a PoeLM checkpoint");
  if (b.kind != pipeline::ModelKind::baseline) throw UsageError(a.baseline + " is not a baseline checkpoint");
  if (p.vocab().fingerprint() != b.vocab().fingerprint()) throw UsageError("the two checkpoints use different vocabularies");
  return {std::move(p), std::move(b)};
}

void write_outputs(const std::string& prefix, const std::string& csv, const std::string& summary, std::ostream& out) {
  write_text(prefix + ".csv", csv);
  write_text(prefix + ".txt", summary);
  out << summary;
}

int cmd_eval_filtering(const EvalArgs& a, const SampleArgs& sa, std::ostream& out) {
  const auto [p, b] = load_pair(a);
  auto poems = synth::read_poems(a.poems);
  if (poems.size() > a.prompts) poems.resize(a.prompts);
  const auto prompts = evalkit::prompts_from_poems(poems);
  pipeline::RunConfig cfg;
  cfg.k = a.k;
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  const auto report = evalkit::filtering_rate_report(generator_for(p, apply_sample(p.sample, sa)),
                                                     generator_for(b, apply_sample(b.sample, sa)), prompts, cfg);
  std::ostringstream csv, text;
  evalkit::write_filtering_csv(csv, report);
  evalkit::write_filtering_summary(text, report);
  text << "prompts " << prompts.size() << ", k " << a.k << ", seed " << a.seed << '\n';
  write_outputs(a.out, csv.str(), text.str(), out);
  return kOk;
}

int cmd_eval_perplexity(const EvalArgs& a, std::ostream& out) {
  const auto [p, b] = load_pair(a);
  const auto poetic = evalkit::blocks_from_poems(synth::read_poems(a.poems));
  const auto layout = fs::is_directory(a.prose) ? segmentation::CorpusLayout::file_per_document
                                                : segmentation::CorpusLayout::blank_line_separated;
  const auto prose = evalkit::blocks_from_documents(segmentation::load_documents(a.prose, layout), a.seed);
  const auto report = evalkit::perplexity_report(*p.checkpoint.model, *b.checkpoint.model, p.vocab(), poetic, prose,
                                                 p.lang, a.jobs);
  std::ostringstream csv, text;
  evalkit::write_perplexity_csv(csv, report);
  evalkit::write_perplexity_summary(text, report);
  text << "seed " << a.seed << '\n';
  write_outputs(a.out, csv.str(), text.str(), out);
  return kOk;
}

int cmd_eval_curve(const EvalArgs& a, std::ostream& out) {
  const auto [p, b] = load_pair(a);
  const auto blocks = evalkit::blocks_from_poems(synth::read_poems(a.poems));
  const auto curve =
      evalkit::rhyme_proximity_curve(*p.checkpoint.model, *b.checkpoint.model, p.vocab(), blocks, p.lang, a.curve, a.jobs);
  std::ostringstream csv, text;
  evalkit::write_curve_csv(csv, curve);
  evalkit::write_curve_summary(text, curve);
  write_outputs(a.out, csv.str(), text.str(), out);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Formal verse generation with structure-conditioned language models", "verse"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  // synth-corpus
  std::string synth_out, poems_path;
  std::size_t words = 1'100'000, doc_words = 800, poem_count = 50, pool_size = 5;
  std::uint64_t synth_seed = 1;
  synth::GeneratorConfig gc;
  std::vector<std::string> schemes = {"7A 7B 7B 7A"};
  auto* synth_cmd = app.add_subcommand("synth-corpus", "Write a synthetic prose corpus and/or a poem set");
  synth_cmd->add_option("--out", synth_out, "Corpus directory (one file per document)");
  synth_cmd->add_option("--words", words, "Corpus size in words")->capture_default_str();
  synth_cmd->add_option("--doc-words", doc_words, "Words per document")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--nouns", gc.nouns, "Lexicon nouns")->capture_default_str();
  synth_cmd->add_option("--verbs", gc.verbs, "Lexicon verbs")->capture_default_str();
  synth_cmd->add_option("--adjectives", gc.adjectives, "Lexicon adjectives")->capture_default_str();
  synth_cmd->add_option("--lexicon-seed", gc.seed, "Seed of the lexicon itself")->capture_default_str();
  synth_cmd->add_option("--poems", poems_path, "Poem set file to write");
  synth_cmd->add_option("--poem-count", poem_count, "Poems in the set")->capture_default_str();
  synth_cmd->add_option("--scheme", schemes, "Poem scheme; repeat to cycle through several")->capture_default_str();
  synth_cmd->add_option("--pool", pool_size, "Rhyme classes available to poem letters")->capture_default_str();

  // augment
  std::string aug_corpus, aug_lang = "es", aug_out;
  std::uint64_t aug_seed = 1;
  std::size_t aug_jobs = 1;
  auto* aug_cmd = app.add_subcommand("augment", "Segment a corpus and prefix each block with its descriptor");
  aug_cmd->add_option("--corpus", aug_corpus, "Corpus directory or blank-line separated file")->required();
  aug_cmd->add_option("--lang", aug_lang, "Language: es or eu")->capture_default_str();
  aug_cmd->add_option("--seed", aug_seed, "Random seed")->capture_default_str();
  aug_cmd->add_option("--out", aug_out, "Augmented stream (class table goes to OUT.classes)")->required();
  aug_cmd->add_option("--jobs", aug_jobs, "Worker threads")->capture_default_str();

  // train-vocab
  std::string tv_in, tv_out, tv_classes;
  std::size_t tv_size = 8000, tv_control = 512, tv_max_lines = 0;
  auto* tv_cmd = app.add_subcommand("train-vocab", "Learn a subword vocabulary with reserved control tokens");
  tv_cmd->add_option("--in", tv_in, "Augmented stream")->required();
  tv_cmd->add_option("--size", tv_size, "Total vocabulary size")->capture_default_str();
  tv_cmd->add_option("--control", tv_control, "Ids reserved for control tokens")->capture_default_str();
  tv_cmd->add_option("--classes", tv_classes, "Class frequency table (default IN.classes)");
  tv_cmd->add_option("--max-lines", tv_max_lines, "Learn merges from the first N blocks only (0 = all)")
      ->capture_default_str();
  tv_cmd->add_option("--out", tv_out, "Vocabulary file")->required();

  // train-lm / train-baseline
  TrainArgs ta;
  SampleArgs train_sample;
  auto add_train = [&](const std::string& name, const std::string& desc) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--in", ta.in, "Augmented stream")->required();
    cmd->add_option("--vocab", ta.vocab, "Vocabulary file")->required();
    cmd->add_option("--config", ta.config, "JSON config with model/train/sample sections");
    cmd->add_option("--out", ta.out, "Checkpoint path")->required();
    cmd->add_option("--lang", ta.lang, "Language: es or eu")->capture_default_str();
    cmd->add_option("--seed", ta.seed, "Random seed");
    cmd->add_option("--steps", ta.steps, "Optimizer steps");
    cmd->add_option("--batch", ta.batch, "Sequences per step");
    cmd->add_option("--lr", ta.lr, "Peak learning rate");
    cmd->add_option("--backend", ta.backend, "transformer or ngram");
    cmd->add_option("--context", ta.context, "Context length in tokens");
    cmd->add_option("--d-model", ta.d_model, "Transformer width");
    cmd->add_option("--layers", ta.layers, "Transformer layers");
    cmd->add_option("--heads", ta.heads, "Attention heads");
    cmd->add_option("--log-every", ta.log_every, "Steps between progress lines");
    cmd->add_option("--heldout-every", ta.heldout_every, "Hold out every n-th block (0 = none)")->capture_default_str();
    add_sample_options(cmd, train_sample);
    return cmd;
  };
  auto* tl_cmd = add_train("train-lm", "Train the structure-conditioned model on the augmented stream");
  auto* tb_cmd = add_train("train-baseline", "Train the baseline on the same blocks with descriptors removed");

  // generate
  GenerateArgs ga;
  SampleArgs gen_sample;
  auto* gen_cmd = app.add_subcommand("generate", "Sample, filter and rerank candidates for a scheme");
  gen_cmd->add_option("--model", ga.model, "Checkpoint")->required();
  gen_cmd->add_option("--scheme", ga.scheme, "Scheme such as \"11A 11B 11B 11A\"")->required();
  auto* first_opt = gen_cmd->add_option("--first-line", ga.first_line, "Fixed first line");
  gen_cmd->add_option("--k", ga.run.k, "Candidates to sample")->capture_default_str();
  gen_cmd->add_option("--seed", ga.run.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--jobs", ga.run.jobs, "Worker threads")->capture_default_str();
  gen_cmd->add_option("--pool", ga.run.pool_size, "Rhyme classes available to scheme letters")->capture_default_str();
  gen_cmd->add_flag("--force", ga.run.force, "Accept a first line that does not fit the scheme");
  gen_cmd->add_option("--out", ga.out, "Artifact stem")->capture_default_str();
  gen_cmd->add_flag("--no-artifacts", ga.no_artifacts, "Do not write run artifacts");
  gen_cmd->add_flag("--interactive", ga.interactive, "List the top candidates and read a choice from stdin");
  add_sample_options(gen_cmd, gen_sample);

  // validate
  std::string val_scheme, val_desc, val_lang = "es", val_file;
  bool val_no_bleu = false, val_structure_only = false;
  auto* val_cmd = app.add_subcommand("validate", "Check a poem against a scheme or descriptor");
  auto* val_scheme_opt = val_cmd->add_option("--scheme", val_scheme, "Scheme; letters bind to their first line's rhyme");
  auto* val_desc_opt = val_cmd->add_option("--descriptor", val_desc, "Descriptor text, e.g. \"<PREF> <LEN_7> <CLS_ar> </PREF>\"");
  val_cmd->add_option("--lang", val_lang, "Language: es or eu")->capture_default_str();
  val_cmd->add_flag("--no-bleu", val_no_bleu, "Skip the repetition (BLEU) check");
  val_cmd->add_flag("--structure-only", val_structure_only, "Check line count, syllables and rhyme only");
  val_cmd->add_option("file", val_file, "Poem file, one verse per line")->required();
  val_scheme_opt->excludes(val_desc_opt);

  // eval
  EvalArgs ea;
  SampleArgs eval_sample;
  auto* eval_cmd = app.add_subcommand("eval", "Reproduce the automatic evaluations");
  eval_cmd->require_subcommand(1);
  auto add_eval_common = [&](CLI::App* cmd) {
    cmd->add_option("--poelm", ea.poelm, "Structure-conditioned checkpoint")->required();
    cmd->add_option("--baseline", ea.baseline, "Baseline checkpoint")->required();
    cmd->add_option("--poems", ea.poems, "Poem set file")->required();
    cmd->add_option("--seed", ea.seed, "Random seed")->capture_default_str();
    cmd->add_option("--jobs", ea.jobs, "Worker threads")->capture_default_str();
    cmd->add_option("--out", ea.out, "Output prefix (.csv and .txt)")->capture_default_str();
  };
  auto* ef_cmd = eval_cmd->add_subcommand("filtering", "Share of candidates passing each filter");
  add_eval_common(ef_cmd);
  ef_cmd->add_option("--k", ea.k, "Candidates per prompt")->capture_default_str();
  ef_cmd->add_option("--prompts", ea.prompts, "Prompts taken from the poem set")->capture_default_str();
  add_sample_options(ef_cmd, eval_sample);
  auto* ep_cmd = eval_cmd->add_subcommand("perplexity", "Perplexity with and without the structure prefix");
  add_eval_common(ep_cmd);
  ep_cmd->add_option("--prose", ea.prose, "Prose corpus directory or file")->required();
  auto* ec_cmd = eval_cmd->add_subcommand("curve", "Log-probability advantage along the line");
  add_eval_common(ec_cmd);
  ec_cmd->add_option("--min-tokens", ea.curve.min_tokens, "Shortest line considered")->capture_default_str();
  ec_cmd->add_option("--max-tokens", ea.curve.max_tokens, "Longest line considered")->capture_default_str();

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kFailure;
  }
  if (quiet) log::set_threshold(log::Level::warn);

  try {
    if (*synth_cmd) {
      if (synth_out.empty() && poems_path.empty()) throw UsageError("synth-corpus needs --out and/or --poems");
      return cmd_synth_corpus(synth_out, words, doc_words, synth_seed, gc, poems_path, poem_count, schemes, pool_size,
                              out);
    }
    if (*aug_cmd) return cmd_augment(aug_corpus, aug_lang, aug_seed, aug_out, aug_jobs, out);
    if (*tv_cmd) return cmd_train_vocab(tv_in, tv_size, tv_control, tv_classes, tv_max_lines, tv_out, out);
    if (*tl_cmd) return cmd_train(ta, train_sample, pipeline::ModelKind::poelm, out);
    if (*tb_cmd) return cmd_train(ta, train_sample, pipeline::ModelKind::baseline, out);
    if (*gen_cmd) {
      ga.has_first_line = first_opt->count() > 0;
      return cmd_generate(ga, gen_sample, in, out, err);
    }
    if (*val_cmd) return cmd_validate(val_scheme, val_desc, val_lang, val_file, val_no_bleu, val_structure_only, out);
    if (*ef_cmd) return cmd_eval_filtering(ea, eval_sample, out);
    if (*ep_cmd) return cmd_eval_perplexity(ea, out);
    if (*ec_cmd) return cmd_eval_curve(ea, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kFailure;
  } catch (const descriptor::SchemeError& e) {
    err << "error: invalid scheme: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace verse::cli
