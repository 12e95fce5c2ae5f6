#include "verse/evalkit.hpp"

#include "verse/log.hpp"
#include "verse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace verse::evalkit {

namespace {

constexpr std::size_t kReasons = constraints::kAllReasons.size();

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string percent(long basis_points) {
  std::ostringstream s;
  s << basis_points / 100 << '.' << std::setw(2) << std::setfill('0') << basis_points % 100;
  return s.str();
}

segmentation::Block to_block(const EvalBlock& lines) {
  segmentation::Block b;
  for (const auto& l : lines) b.phrases.push_back(segmentation::Phrase{l, false, ""});
  return b;
}

// Token streams for one block, with the positions of its text tokens.
struct Scored {
  std::vector<double> structure;     // per text token, log p under PoeLM with descriptor
  std::vector<double> no_structure;  // PoeLM, text only
  std::vector<double> baseline;
  std::vector<std::size_t> line_of;  // line index per text token
};

Scored score_block(const lm::LanguageModel& poelm, const lm::LanguageModel& baseline, const tokenizer::Vocab& vocab,
                   const EvalBlock& lines, Language lang) {
  const auto block = to_block(lines);
  const auto desc = descriptor::extract_descriptor(block, lang);
  const auto prefix =
      vocab.encode(descriptor::serialize_descriptor_text(desc, [&](std::string_view k) { return vocab.has_class(k); }));
  const auto body = vocab.encode(descriptor::block_text(block));
  const auto plain = vocab.encode(descriptor::strip_control(descriptor::block_text(block)));

  std::vector<std::size_t> text_pos;  // indices into body
  std::vector<std::size_t> line_of;
  std::size_t line = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == vocab.brk()) {
      ++line;
      continue;
    }
    text_pos.push_back(i);
    line_of.push_back(line);
  }
  if (text_pos.size() != plain.size())
    throw std::runtime_error("line breaks change the tokenization of: " + lines.front());
  for (std::size_t j = 0; j < plain.size(); ++j)
    if (body[text_pos[j]] != plain[j]) throw std::runtime_error("line breaks change the tokenization of: " + lines.front());

  Scored s;
  s.line_of = line_of;
  if (plain.size() < 2) return s;
  std::vector<TokenId> with(prefix);
  with.insert(with.end(), body.begin(), body.end());
  const auto lp_with = poelm.score(with);
  const auto lp_body = poelm.score(body);
  const auto lp_plain = baseline.score(plain);
  // Entry j (j >= 1) is the log-prob of text token j; token 0 has no
  // baseline score and is left at zero.
  s.structure.assign(plain.size(), 0.0);
  s.no_structure.assign(plain.size(), 0.0);
  s.baseline.assign(plain.size(), 0.0);
  for (std::size_t j = 1; j < plain.size(); ++j) {
    s.structure[j] = lp_with[prefix.size() + text_pos[j] - 1];
    s.no_structure[j] = lp_body[text_pos[j] - 1];
    s.baseline[j] = lp_plain[j - 1];
  }
  return s;
}

}  // namespace

std::vector<Prompt> prompts_from_poems(const std::vector<synth::Poem>& poems) {
  std::vector<Prompt> out;
  for (const auto& p : poems)
    if (!p.lines.empty()) out.push_back({p.lines.front(), p.scheme});
  return out;
}

std::array<long, constraints::kAllReasons.size() + 1> FilteringRow::basis_points() const {
  std::array<long, kReasons + 1> bp{};
  if (total == 0) return bp;
  std::array<std::size_t, kReasons + 1> counts{};
  counts[0] = correct;
  for (std::size_t i = 0; i < kReasons; ++i) counts[i + 1] = rejections[i];
  std::array<std::size_t, kReasons + 1> rem{};
  long assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    bp[i] = static_cast<long>(counts[i] * 10000 / total);
    rem[i] = counts[i] * 10000 % total;
    assigned += bp[i];
  }
  std::array<std::size_t, kReasons + 1> order{};
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < 10000 && i < order.size(); ++i, ++assigned) ++bp[order[i]];
  return bp;
}

FilteringReport filtering_rate_report(const pipeline::Generator& poelm, const pipeline::Generator& baseline,
                                      const std::vector<Prompt>& prompts, const pipeline::RunConfig& cfg) {
  FilteringReport report;
  for (const auto* gen : {&poelm, &baseline}) {
    FilteringRow row;
    row.model = std::string(pipeline::kind_name(gen->kind));
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      auto pc = cfg;
      pc.seed = derive_seed(cfg.seed, p);
      try {
        auto run = pipeline::run_generation(*gen, prompts[p].scheme, std::string_view(prompts[p].first_line), pc);
        row.total += run.k;
        row.correct += run.survivors();
        for (std::size_t i = 0; i < kReasons; ++i) row.rejections[i] += run.rejections[i];
        log::info(row.model, " prompt ", p, ": ", run.survivors(), "/", run.k, " correct");
        report.runs.push_back(std::move(run));
      } catch (const std::exception& e) {
        log::warn(row.model, " prompt ", p, " skipped: ", e.what());
        ++row.prompts_failed;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_filtering_csv(std::ostream& out, const FilteringReport& report) {
  out << "model,candidates,correct";
  for (const auto r : constraints::kAllReasons) out << ',' << constraints::reason_name(r);
  out << ",correct_pct";
  for (const auto r : constraints::kAllReasons) out << ',' << constraints::reason_name(r) << "_pct";
  out << '\n';
  for (const auto& row : report.rows) {
    out << row.model << ',' << row.total << ',' << row.correct;
    for (const auto n : row.rejections) out << ',' << n;
    for (const auto bp : row.basis_points()) out << ',' << percent(bp);
    out << '\n';
  }
}

void write_filtering_summary(std::ostream& out, const FilteringReport& report) {
  out << "Filtered candidates (%)\n";
  out << std::left << std::setw(12) << "" << std::right;
  out << std::setw(9) << "Correct";
  for (const auto r : constraints::kAllReasons) out << std::setw(15) << constraints::reason_name(r);
  out << '\n';
  for (const auto& row : report.rows) {
    out << std::left << std::setw(12) << row.model << std::right;
    const auto bp = row.basis_points();
    const bool baseline = row.model == pipeline::kind_name(pipeline::ModelKind::baseline);
    for (std::size_t i = 0; i < bp.size(); ++i) {
      const bool skipped = baseline && (i == 4 || i == 5);
      out << std::setw(i == 0 ? 9 : 15) << (skipped ? std::string("-") : percent(bp[i]));
    }
    out << "   (" << row.total << " candidates";
    if (row.prompts_failed) out << ", " << row.prompts_failed << " prompts skipped";
    out << ")\n";
  }
}

std::vector<EvalBlock> blocks_from_poems(const std::vector<synth::Poem>& poems) {
  std::vector<EvalBlock> out;
  for (const auto& p : poems)
    if (!p.lines.empty()) out.push_back(p.lines);
  return out;
}

std::vector<EvalBlock> blocks_from_documents(const std::vector<std::string>& documents, std::uint64_t seed) {
  std::vector<EvalBlock> out;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    Rng rng(derive_seed(seed, d));
    for (const auto& b : segmentation::segment_document(documents[d], rng)) {
      EvalBlock lines;
      for (const auto& p : b.phrases) lines.push_back(p.text);
      out.push_back(std::move(lines));
    }
  }
  return out;
}

double PerplexityCell::perplexity() const {
  if (tokens == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(-log_prob / static_cast<double>(tokens));
}

PerplexityReport perplexity_report(const lm::LanguageModel& poelm, const lm::LanguageModel& baseline,
                                   const tokenizer::Vocab& vocab, const std::vector<EvalBlock>& poetic,
                                   const std::vector<EvalBlock>& prose, Language lang, std::size_t jobs) {
  PerplexityReport report;
  const std::array<const std::vector<EvalBlock>*, 2> sets = {&poetic, &prose};
  for (std::size_t c = 0; c < sets.size(); ++c) {
    const auto& blocks = *sets[c];
    std::vector<Scored> scored(blocks.size());
    parallel_for(blocks.size(), jobs,
                 [&](std::size_t i) { scored[i] = score_block(poelm, baseline, vocab, blocks[i], lang); });
    for (const auto& s : scored) {
      for (std::size_t j = 1; j < s.baseline.size(); ++j) {
        report.cells[0][c].log_prob += s.baseline[j];
        report.cells[1][c].log_prob += s.structure[j];
        report.cells[2][c].log_prob += s.no_structure[j];
      }
      const std::size_t n = s.baseline.size() > 1 ? s.baseline.size() - 1 : 0;
      for (auto& row : report.cells) row[c].tokens += n;
    }
  }
  return report;
}

void write_perplexity_csv(std::ostream& out, const PerplexityReport& report) {
  out << "model";
  for (const auto* c : PerplexityReport::kColumns) out << ',' << c << ',' << c << "_tokens";
  out << '\n';
  for (std::size_t r = 0; r < report.cells.size(); ++r) {
    out << PerplexityReport::kRows[r];
    for (const auto& cell : report.cells[r]) out << ',' << fixed(cell.perplexity(), 4) << ',' << cell.tokens;
    out << '\n';
  }
}

void write_perplexity_summary(std::ostream& out, const PerplexityReport& report) {
  out << "Per-token perplexity\n" << std::left << std::setw(20) << "" << std::right;
  for (const auto* c : PerplexityReport::kColumns) out << std::setw(12) << c;
  out << '\n';
  for (std::size_t r = 0; r < report.cells.size(); ++r) {
    out << std::left << std::setw(20) << PerplexityReport::kRows[r] << std::right;
    for (const auto& cell : report.cells[r]) out << std::setw(12) << fixed(cell.perplexity(), 2);
    out << '\n';
  }
}

double Curve::mean_over(double lo, double hi) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo - 1e-12 || x[i] > hi + 1e-12) continue;
    sum += advantage[i];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

Curve rhyme_proximity_curve(const lm::LanguageModel& poelm, const lm::LanguageModel& baseline,
                            const tokenizer::Vocab& vocab, const std::vector<EvalBlock>& blocks, Language lang,
                            const CurveConfig& cfg, std::size_t jobs) {
  if (cfg.grid < 2) throw std::invalid_argument("curve grid needs at least 2 points");
  std::vector<double> grid(cfg.grid);
  for (std::size_t t = 0; t < cfg.grid; ++t) grid[t] = static_cast<double>(t) / static_cast<double>(cfg.grid - 1);

  std::vector<std::vector<std::vector<double>>> per_block(blocks.size());
  parallel_for(blocks.size(), jobs, [&](std::size_t b) {
    const auto s = score_block(poelm, baseline, vocab, blocks[b], lang);
    std::size_t start = 0;
    while (start < s.line_of.size()) {
      std::size_t end = start;
      while (end < s.line_of.size() && s.line_of[end] == s.line_of[start]) ++end;
      const std::size_t n = end - start;
      if (s.line_of[start] > 0 && n >= std::max<std::size_t>(2, cfg.min_tokens) && n <= cfg.max_tokens) {
        std::vector<double> series(cfg.grid);
        for (std::size_t t = 0; t < cfg.grid; ++t) {
          const double pos = grid[t] * static_cast<double>(n - 1);
          const auto lo = std::min(static_cast<std::size_t>(pos), n - 2);
          const double frac = pos - static_cast<double>(lo);
          const double a0 = s.structure[start + lo] - s.baseline[start + lo];
          const double a1 = s.structure[start + lo + 1] - s.baseline[start + lo + 1];
          series[t] = a0 + frac * (a1 - a0);
        }
        per_block[b].push_back(std::move(series));
      }
      start = end;
    }
  });

  std::vector<std::vector<double>> all;
  for (auto& v : per_block)
    for (auto& s : v) all.push_back(std::move(s));
  if (all.empty()) throw EmptyCurve("no lines with " + std::to_string(cfg.min_tokens) + " to " +
                                    std::to_string(cfg.max_tokens) + " tokens");
  std::sort(all.begin(), all.end());

  Curve curve;
  curve.x = grid;
  curve.advantage.assign(cfg.grid, 0.0);
  curve.lines = all.size();
  for (const auto& s : all)
    for (std::size_t t = 0; t < cfg.grid; ++t) curve.advantage[t] += s[t];
  for (auto& v : curve.advantage) v /= static_cast<double>(all.size());
  return curve;
}

void write_curve_csv(std::ostream& out, const Curve& curve) {
  out << "x,advantage\n";
  for (std::size_t i = 0; i < curve.x.size(); ++i)
    out << fixed(curve.x[i], 2) << ',' << fixed(curve.advantage[i], 6) << '\n';
}

void write_curve_summary(std::ostream& out, const Curve& curve) {
  out << "Log-probability advantage over " << curve.lines << " lines\n";
  out << "first quintile " << fixed(curve.mean_over(0.0, 0.2), 4) << '\n';
  out << "last quintile  " << fixed(curve.mean_over(0.8, 1.0), 4) << '\n';
}

}  // namespace verse::evalkit
