#include "gfomlab/rng.hpp"

namespace gfom {

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ (index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = parent;
  for (auto p : path) s = derive_seed(s, p);
  return s;
}

std::uint64_t stream_tag(std::string_view name) noexcept {
  // FNV-1a; only used to turn stream names into integer indices.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gfom
