#include "verse/phonology.hpp"

#include "verse/text.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <array>

namespace verse::phonology {
namespace {

enum class Kind { consonant, weak, strong };

char32_t lower(char32_t c) { return static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))); }

bool is_plain_vowel(char32_t c) {
  return c == U'a' || c == U'e' || c == U'i' || c == U'o' || c == U'u';
}

bool is_accented_vowel(char32_t c) {
  return c == U'á' || c == U'é' || c == U'í' || c == U'ó' || c == U'ú';
}

bool is_vowel_letter(char32_t c) {
  return is_plain_vowel(c) || is_accented_vowel(c) || c == U'ü';
}

char32_t strip_accent(char32_t c) {
  switch (c) {
    case U'á': return U'a';
    case U'é': return U'e';
    case U'í': return U'i';
    case U'ó': return U'o';
    case U'ú': case U'ü': return U'u';
    default: return c;
  }
}

bool in_alphabet(char32_t c, Language lang) {
  if ((c >= U'a' && c <= U'z') || c == U'ñ') return true;
  (void)lang;
  return is_accented_vowel(c) || c == U'ü';
}

// `y` is a vowel unless a vowel follows it.
std::vector<Kind> classify(const std::u32string& low) {
  std::vector<Kind> kinds(low.size(), Kind::consonant);
  for (std::size_t i = 0; i < low.size(); ++i) {
    const char32_t c = low[i];
    if (c == U'a' || c == U'e' || c == U'o' || is_accented_vowel(c)) {
      kinds[i] = Kind::strong;
    } else if (c == U'i' || c == U'u' || c == U'ü') {
      kinds[i] = Kind::weak;
    } else if (c == U'y') {
      const bool vowel_follows = i + 1 < low.size() && is_vowel_letter(low[i + 1]);
      kinds[i] = vowel_follows ? Kind::consonant : Kind::weak;
    }
  }
  return kinds;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

// Vowel runs split between two strong vowels, and after a weak vowel that
// sits between two strong ones (a-u-a -> au|a).
std::vector<Span> find_nuclei(const std::vector<Kind>& kinds) {
  std::vector<Span> nuclei;
  std::size_t i = 0;
  while (i < kinds.size()) {
    if (kinds[i] == Kind::consonant) {
      ++i;
      continue;
    }
    std::size_t start = i;
    std::size_t j = i + 1;
    for (; j < kinds.size() && kinds[j] != Kind::consonant; ++j) {
      const bool strong_pair = kinds[j - 1] == Kind::strong && kinds[j] == Kind::strong;
      const bool bridged = kinds[j] == Kind::strong && kinds[j - 1] == Kind::weak &&
                           j >= start + 2 && kinds[j - 2] == Kind::strong;
      if (strong_pair || bridged) {
        nuclei.push_back({start, j});
        start = j;
      }
    }
    nuclei.push_back({start, j});
    i = j;
  }
  return nuclei;
}

struct Rules {
  std::array<std::u32string_view, 3> digraphs;
  std::vector<std::u32string_view> onset_pairs;
};

const Rules& rules_for(Language lang) {
  static const Rules spanish{
      {U"ch", U"ll", U"rr"},
      {U"pl", U"pr", U"bl", U"br", U"fl", U"fr", U"tl", U"tr", U"dr", U"cl", U"cr", U"gl", U"gr"}};
  static const Rules basque{
      {U"ts", U"tx", U"tz"},
      {U"tr", U"dr", U"pr", U"br", U"kr", U"gr", U"fr", U"pl", U"bl", U"kl", U"gl", U"fl"}};
  return lang == Language::spanish ? spanish : basque;
}

// Number of characters of the cluster low[begin, end) that open the next
// syllable under onset maximization.
std::size_t onset_length(const std::u32string& low, std::size_t begin, std::size_t end,
                         const Rules& rules) {
  std::vector<std::size_t> unit_sizes;
  for (std::size_t i = begin; i < end;) {
    std::size_t size = 1;
    if (i + 1 < end) {
      const std::u32string_view pair(low.data() + i, 2);
      if (std::find(rules.digraphs.begin(), rules.digraphs.end(), pair) != rules.digraphs.end())
        size = 2;
    }
    unit_sizes.push_back(size);
    i += size;
  }
  if (unit_sizes.empty()) return 0;
  const std::size_t n = unit_sizes.size();
  if (n >= 2 && unit_sizes[n - 1] == 1 && unit_sizes[n - 2] == 1) {
    const std::u32string_view pair(low.data() + end - 2, 2);
    if (std::find(rules.onset_pairs.begin(), rules.onset_pairs.end(), pair) !=
        rules.onset_pairs.end())
      return 2;
  }
  return unit_sizes.back();
}

struct Analysis {
  std::u32string surface;
  std::u32string low;
  std::vector<Kind> kinds;
  std::vector<Span> nuclei;
  std::vector<std::size_t> starts;  // syllable start offsets
};

Analysis analyze(std::string_view word, Language lang) {
  Analysis a;
  a.surface = text::to_u32(text::nfc(word));
  a.low.reserve(a.surface.size());
  for (char32_t c : a.surface) a.low.push_back(lower(c));
  a.kinds = classify(a.low);
  a.nuclei = find_nuclei(a.kinds);
  a.starts.push_back(0);
  const Rules& rules = rules_for(lang);
  for (std::size_t k = 1; k < a.nuclei.size(); ++k) {
    const std::size_t begin = a.nuclei[k - 1].end;
    const std::size_t end = a.nuclei[k].begin;
    a.starts.push_back(end - onset_length(a.low, begin, end, rules));
  }
  return a;
}

std::size_t syllable_of(const Analysis& a, std::size_t pos) {
  const auto it = std::upper_bound(a.starts.begin(), a.starts.end(), pos);
  return static_cast<std::size_t>(it - a.starts.begin()) - 1;
}

std::size_t spanish_stress(const Analysis& a) {
  const std::size_t count = a.nuclei.size();
  if (count <= 1) return 0;
  for (std::size_t i = 0; i < a.low.size(); ++i)
    if (is_accented_vowel(a.low[i])) return syllable_of(a, i);
  char32_t last = 0;
  for (auto it = a.low.rbegin(); it != a.low.rend(); ++it) {
    if (u_isalpha(static_cast<UChar32>(*it))) {
      last = *it;
      break;
    }
  }
  const bool penultimate = is_plain_vowel(last) || last == U'n' || last == U's';
  return penultimate ? count - 2 : count - 1;
}

// Stressed vowel of a nucleus: an accented vowel, else the first strong
// vowel, else the last weak vowel other than a final semivowel `y`.
std::size_t stressed_vowel(const Analysis& a, const Span& nucleus) {
  for (std::size_t i = nucleus.begin; i < nucleus.end; ++i)
    if (is_accented_vowel(a.low[i])) return i;
  for (std::size_t i = nucleus.begin; i < nucleus.end; ++i)
    if (a.kinds[i] == Kind::strong) return i;
  for (std::size_t i = nucleus.end; i-- > nucleus.begin;)
    if (a.low[i] != U'y' || i == nucleus.begin) return i;
  return nucleus.begin;
}

std::string key_from(const Analysis& a, std::size_t pos, Language lang) {
  std::u32string key;
  for (std::size_t i = pos; i < a.low.size(); ++i) {
    if (!in_alphabet(a.low[i], lang)) continue;
    key.push_back(strip_accent(a.low[i]));
  }
  return text::to_utf8(key);
}

bool has_alnum(std::u32string_view s) {
  return std::any_of(s.begin(), s.end(), [](char32_t c) { return text::is_alnum(c); });
}

}  // namespace

bool same_rhyme(const RhymeClass& a, const RhymeClass& b) {
  if (a.is_none() || b.is_none()) return false;
  return a.language() == b.language() && a.key() == b.key();
}

SyllabifiedWord syllabify(std::string_view word, Language lang) {
  const Analysis a = analyze(word, lang);
  SyllabifiedWord out;
  out.surface = text::to_utf8(a.surface);
  if (a.nuclei.empty()) {
    out.syllables.push_back(out.surface);
    if (lang == Language::spanish) out.stress_index = 0;
    return out;
  }
  for (std::size_t k = 0; k < a.starts.size(); ++k) {
    const std::size_t begin = a.starts[k];
    const std::size_t end = k + 1 < a.starts.size() ? a.starts[k + 1] : a.surface.size();
    out.syllables.push_back(text::to_utf8(std::u32string_view(a.surface).substr(begin, end - begin)));
  }
  if (lang == Language::spanish) out.stress_index = spanish_stress(a);
  return out;
}

std::size_t token_syllables(std::string_view token, Language lang) {
  const auto u = text::to_u32(token);
  if (!has_alnum(u)) return 0;
  const Analysis a = analyze(token, lang);
  return std::max<std::size_t>(1, a.nuclei.size());
}

std::size_t count_line_syllables(std::string_view line, Language lang) {
  std::size_t total = 0;
  for (const auto& tok : text::split_ws(line)) total += token_syllables(tok, lang);
  return total;
}

std::optional<std::string> final_word(std::string_view phrase) {
  const auto tokens = text::split_ws(phrase);
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    auto u = text::to_u32(*it);
    if (!has_alnum(u)) continue;
    std::size_t b = 0, e = u.size();
    while (b < e && !text::is_alnum(u[b])) ++b;
    while (e > b && !text::is_alnum(u[e - 1])) --e;
    return text::fold(text::to_utf8(std::u32string_view(u).substr(b, e - b)));
  }
  return std::nullopt;
}

RhymeClass rhyme_class(std::string_view phrase, Language lang) {
  const auto word = final_word(phrase);
  if (!word) return RhymeClass::none(lang);
  const Analysis a = analyze(*word, lang);
  if (a.nuclei.empty()) return RhymeClass::none(lang);

  std::size_t pos = 0;
  if (lang == Language::spanish) {
    pos = stressed_vowel(a, a.nuclei[spanish_stress(a)]);
  } else {
    const std::size_t n = a.nuclei.size();
    pos = a.nuclei[n >= 2 ? n - 2 : 0].begin;
  }
  std::string key = key_from(a, pos, lang);
  if (lang == Language::basque) key = canonicalize_basque(key);
  return RhymeClass(lang, std::move(key));
}

bool rhymes(std::string_view a, std::string_view b, Language lang) {
  const auto wa = final_word(a);
  const auto wb = final_word(b);
  if (!wa || !wb || *wa == *wb) return false;
  return same_rhyme(rhyme_class(a, lang), rhyme_class(b, lang));
}

std::string canonicalize_basque(std::string_view key) {
  std::string out(key);
  for (char& c : out) {
    switch (c) {
      case 't': case 'k': c = 'p'; break;
      case 'm': c = 'n'; break;
      case 'z': case 'x': c = 's'; break;
      case 'd': case 'g': case 'r': c = 'b'; break;
      default: break;
    }
  }
  return out;
}

}  // namespace verse::phonology
