#include "verse/common.hpp"
#include "verse/log.hpp"

#include <atomic>
#include <mutex>

namespace verse {

std::optional<Language> parse_language(std::string_view code) {
  if (code == "es" || code == "spanish") return Language::spanish;
  if (code == "eu" || code == "basque") return Language::basque;
  return std::nullopt;
}

std::string_view language_code(Language lang) {
  return lang == Language::spanish ? "es" : "eu";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace log {
namespace {
std::atomic<Level> g_threshold{Level::info};
std::mutex g_write_mutex;
}  // namespace

Level threshold() { return g_threshold.load(std::memory_order_relaxed); }
void set_threshold(Level level) { g_threshold.store(level, std::memory_order_relaxed); }

void write(Level level, std::string_view message) {
  static constexpr const char* kTags[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_write_mutex);
  std::clog << '[' << kTags[static_cast<int>(level)] << "] " << message << '\n';
}
}  // namespace log

}  // namespace verse
