#include "badam/seed.hpp"

namespace badam {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_byte(std::uint64_t h, std::uint8_t b) { return (h ^ b) * kFnvPrime; }

std::uint64_t hash_label(const SeedLabel& label) {
  std::uint64_t h = kFnvOffset;
  if (const auto* s = std::get_if<std::string>(&label)) {
    h = fnv_byte(h, 's');
    for (unsigned char c : *s) h = fnv_byte(h, c);
    h = fnv_byte(h, 0);
  } else {
    const auto v = static_cast<std::uint64_t>(std::get<std::int64_t>(label));
    h = fnv_byte(h, 'i');
    for (int shift = 0; shift < 64; shift += 8) h = fnv_byte(h, static_cast<std::uint8_t>(v >> shift));
  }
  return h;
}

}  // namespace

std::uint64_t seed_derive(std::uint64_t master, const std::vector<SeedLabel>& labels) {
  std::uint64_t state = splitmix64(master);
  for (const auto& label : labels) state = splitmix64(state ^ hash_label(label));
  return state;
}

Rng derive_rng(std::uint64_t master, const std::vector<SeedLabel>& labels) {
  return Rng(seed_derive(master, labels));
}

}  // namespace badam
