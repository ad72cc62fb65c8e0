#include "tabfuse/rng.hpp"

namespace tabfuse {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ fnv1a64(name)));
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return std::mt19937_64(
      splitmix64(splitmix64(seed) ^ fnv1a64(name) ^ splitmix64(index + 0x51ed2701ULL)));
}

}  // namespace tabfuse
