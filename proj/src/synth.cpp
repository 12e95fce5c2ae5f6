#include "verse/synth.hpp"

#include "verse/phonology.hpp"
#include "verse/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace verse::synth {
namespace {

constexpr std::string_view kOnsets[] = {"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v",
                                        "b", "c", "d", "l", "m", "n", "p", "r", "s", "t"};
constexpr std::string_view kClusters[] = {"pr", "tr", "bl", "br", "cr", "fl", "gr", "pl"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "a", "e", "o"};
constexpr std::string_view kCodas[] = {"n", "s", "r", "l"};

std::string capitalize(const std::string& s) {
  if (s.empty()) return s;
  std::string out = s;
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::size_t draw_index(Rng& rng, const std::vector<double>& cdf) {
  const double u = rng.uniform() * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

}  // namespace

Generator::Generator(const GeneratorConfig& config) {
  Rng rng(derive_seed(config.seed, 0x5e7));
  std::set<std::string> seen;
  function_words_[det] = {"el", "la", "los", "las", "un", "una", "mi", "su", "tu"};
  function_words_[prep] = {"de", "en", "con", "por", "a", "sin", "para"};
  function_words_[conj] = {"y", "que", "pero"};
  function_words_[neg] = {"no"};
  function_words_[refl] = {"se", "me", "te"};
  for (const auto& [pos, list] : function_words_) seen.insert(list.begin(), list.end());

  auto random_word = [&](std::size_t syllables) {
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      if (rng.uniform() < 0.08)
        w += kClusters[rng.uniform_int(0, std::size(kClusters) - 1)];
      else
        w += kOnsets[rng.uniform_int(0, std::size(kOnsets) - 1)];
      w += kVowels[rng.uniform_int(0, std::size(kVowels) - 1)];
    }
    if (rng.uniform() < 0.25) w += kCodas[rng.uniform_int(0, std::size(kCodas) - 1)];
    return w;
  };

  // Ending inventory: classes of random two-syllable words, in draw order.
  std::vector<std::string> endings;
  std::vector<double> ending_cdf;
  for (std::size_t guard = 0; endings.size() < config.rhyme_endings && guard < 100000; ++guard) {
    const auto cls = phonology::rhyme_class(random_word(2), Language::spanish);
    if (!cls.is_none() && std::find(endings.begin(), endings.end(), cls.key()) == endings.end())
      endings.push_back(cls.key());
  }
  for (std::size_t r = 0; r < endings.size(); ++r)
    ending_cdf.push_back((r ? ending_cdf.back() : 0.0) + 1.0 / std::pow(static_cast<double>(r) + 2.7, config.zipf));

  auto make_word = [&](std::size_t syllables) {
    std::optional<std::string> target;
    if (!endings.empty() && syllables > 1) target = endings[draw_index(rng, ending_cdf)];
    for (std::size_t attempt = 0;; ++attempt) {
      const auto w = random_word(syllables);
      if (seen.contains(w)) continue;
      const auto cls = phonology::rhyme_class(w, Language::spanish);
      if (cls.is_none() || phonology::token_syllables(w, Language::spanish) != syllables) continue;
      if (target && cls.key() != *target && attempt < 20000) continue;
      seen.insert(w);
      return Word{w, syllables, cls.key()};
    }
  };
  auto build = [&](Pos pos, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto& w = config.syllable_weights;
      const double u = rng.uniform() * (w[0] + w[1] + w[2]);
      const std::size_t syl = u < w[0] ? 1 : (u < w[0] + w[1] ? 2 : 3);
      by_pos_[pos].push_back(content_.size());
      content_.push_back(make_word(syl));
    }
    auto& cdf = cumulative_[pos];
    double acc = 0;
    for (std::size_t r = 0; r < count; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r) + 2.7, config.zipf);
      cdf.push_back(acc);
    }
  };
  build(noun, config.nouns);
  build(verb, config.verbs);
  build(adj, config.adjectives);
  for (const auto n : by_pos_[noun]) {
    auto& c = companions_[n];
    for (int k = 0; k < 3; ++k) c.push_back(by_pos_[adj][draw_index(rng, cumulative_[adj])]);
    for (int k = 0; k < 3; ++k) c.push_back(by_pos_[verb][draw_index(rng, cumulative_[verb])]);
  }
  for (const Pos pos : {noun, verb, adj})
    for (const auto i : by_pos_[pos]) by_rhyme_[content_[i].rhyme][pos].push_back(i);

  templates_ = {
      {det, noun, adj},        {det, noun, verb},          {verb, det, noun},
      {det, noun, verb, adj},  {det, adj, noun},           {prep, det, noun},
      {noun, conj, noun},      {det, noun, prep, det, noun}, {neg, verb, det, noun},
      {refl, verb},            {conj, verb, det, noun},    {det, noun, conj, verb},
      {verb, adj},             {refl, verb, prep, noun},   {det, noun, refl, verb},
      {noun, adj},             {prep, noun, adj},          {verb, prep, det, noun},
  };
}

std::size_t Generator::pick(Rng& rng, Pos pos) const {
  return by_pos_.at(pos)[draw_index(rng, cumulative_.at(pos))];
}

std::string Generator::render(Rng& rng, const std::vector<Pos>& tmpl, std::vector<std::size_t>* chosen) const {
  std::string out;
  std::optional<std::size_t> last_noun;
  for (const Pos pos : tmpl) {
    std::string w;
    if (function_words_.contains(pos)) {
      const auto& list = function_words_.at(pos);
      w = list[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(list.size()) - 1))];
      if (chosen) chosen->push_back(SIZE_MAX);
    } else {
      std::size_t idx;
      if (last_noun && pos != noun && rng.uniform() < 0.6) {
        const auto& comp = companions_.at(*last_noun);
        const std::size_t base = pos == adj ? 0 : 3;
        idx = comp[base + static_cast<std::size_t>(rng.uniform_int(0, 2))];
      } else {
        idx = pick(rng, pos);
      }
      if (pos == noun) last_noun = idx;
      w = content_[idx].text;
      if (chosen) chosen->push_back(idx);
    }
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string Generator::phrase(Rng& rng) const {
  const auto& t = templates_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(templates_.size()) - 1))];
  return render(rng, t, nullptr);
}

std::string Generator::sentence(Rng& rng) const {
  const auto phrases = rng.uniform_int(1, 4);
  std::string out;
  for (std::int64_t i = 0; i < phrases; ++i) {
    if (i > 0) {
      const double u = rng.uniform();
      out += u < 0.75 ? ", " : (u < 0.9 ? "; " : ": ");
    }
    out += phrase(rng);
  }
  const double u = rng.uniform();
  out += u < 0.8 ? "." : (u < 0.9 ? "?" : "!");
  return capitalize(out);
}

std::string Generator::document(Rng& rng, std::size_t words) const {
  std::string out;
  std::size_t count = 0;
  while (count < words) {
    const auto sentences = rng.uniform_int(2, 6);
    std::string para;
    for (std::int64_t s = 0; s < sentences; ++s) {
      const auto sent = sentence(rng);
      count += text::split_ws(sent).size();
      if (!para.empty()) para += ' ';
      para += sent;
    }
    if (!out.empty()) out += "\n\n";
    out += para;
  }
  return out + "\n";
}

std::vector<std::string> Generator::corpus(std::size_t target_words, std::size_t words_per_doc,
                                           std::uint64_t seed) const {
  std::vector<std::string> docs;
  std::size_t total = 0;
  while (total < target_words) {
    Rng rng(derive_seed(seed, docs.size()));
    docs.push_back(document(rng, words_per_doc));
    total += text::split_ws(docs.back()).size();
  }
  return docs;
}

std::optional<std::string> Generator::line(Rng& rng, std::size_t syllables, const std::optional<std::string>& rhyme,
                                            const std::vector<std::string>& avoid) const {
  for (int attempt = 0; attempt < 4000; ++attempt) {
    const auto& t = templates_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(templates_.size()) - 1))];
    std::vector<std::size_t> chosen;
    std::string body = render(rng, std::vector<Pos>(t.begin(), t.end() - 1), &chosen);
    const Pos last = t.back();
    std::size_t final_idx;
    if (rhyme) {
      const auto it = by_rhyme_.find(*rhyme);
      if (it == by_rhyme_.end() || !it->second.contains(last)) continue;
      const auto& cands = it->second.at(last);
      final_idx = cands[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cands.size()) - 1))];
    } else {
      final_idx = pick(rng, last);
    }
    const Word& fw = content_[final_idx];
    if (std::find(avoid.begin(), avoid.end(), fw.text) != avoid.end()) continue;
    const std::string candidate = body.empty() ? fw.text : body + " " + fw.text;
    if (phonology::count_line_syllables(candidate, Language::spanish) == syllables) return candidate;
  }
  return std::nullopt;
}

std::optional<Poem> Generator::poem(Rng& rng, const descriptor::RhymeScheme& scheme,
                                    const std::vector<std::string>& pool) const {
  std::map<char, std::string> binding;
  std::vector<std::string> available = pool;
  for (const auto& item : scheme.items) {
    if (item.letter == '-' || binding.contains(item.letter)) continue;
    if (available.empty()) return std::nullopt;
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(available.size()) - 1));
    binding[item.letter] = available[k];
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(k));
  }
  Poem p{scheme, {}};
  std::map<char, std::vector<std::string>> used;
  for (const auto& item : scheme.items) {
    std::optional<std::string> cls;
    if (item.letter != '-') cls = binding[item.letter];
    const auto l = line(rng, item.syllables, cls, used[item.letter]);
    if (!l) return std::nullopt;
    used[item.letter].push_back(*phonology::final_word(*l));
    p.lines.push_back(*l);
  }
  p.lines[0] = capitalize(p.lines[0]);
  return p;
}

void write_poems(const std::filesystem::path& path, const std::vector<Poem>& poems) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < poems.size(); ++i) {
    if (i) out << '\n';
    out << "# scheme: " << descriptor::to_string(poems[i].scheme) << '\n';
    for (const auto& l : poems[i].lines) out << l << '\n';
  }
}

std::vector<Poem> read_poems(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Poem> out;
  std::string line;
  std::size_t lineno = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::normalize_ws(line).empty()) {
      open = false;
      continue;
    }
    if (!open) {
      constexpr std::string_view tag = "# scheme:";
      if (!line.starts_with(tag))
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": record must start with '# scheme:'");
      out.push_back({descriptor::parse_scheme(line.substr(tag.size())), {}});
      open = true;
      continue;
    }
    out.back().lines.push_back(text::normalize_ws(line));
  }
  for (const auto& p : out)
    if (p.lines.size() != p.scheme.items.size())
      throw std::runtime_error(path.string() + ": poem with scheme '" + descriptor::to_string(p.scheme) + "' has " +
                               std::to_string(p.lines.size()) + " lines");
  return out;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<std::string>& documents) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < documents.size(); ++i) {
    std::ostringstream name;
    name << "doc_" << std::setw(6) << std::setfill('0') << i << ".txt";
    std::ofstream out(dir / name.str());
    if (!out) throw std::runtime_error("cannot write " + (dir / name.str()).string());
    out << documents[i];
  }
}

std::vector<std::string> Generator::common_rhymes(std::size_t n) const {
  std::map<std::string, std::size_t> counts;
  for (const auto& w : content_) ++counts[w.rhyme];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].first);
  return out;
}

}  // namespace verse::synth
