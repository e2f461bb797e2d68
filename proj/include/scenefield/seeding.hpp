#pragma once

#include <cstdint>
#include <string_view>

namespace scenefield {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the named random substream (e.g. "init", "pairs", "rays", "provider") for one view.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                                  std::uint64_t view = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
  for (char c : stream) {
    h ^= std::uint8_t(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(base ^ h) + view);
}

}  // namespace scenefield
