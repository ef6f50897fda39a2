#pragma once

#include <cstdint>

namespace tacthand {

// splitmix64 finalizer; used to derive independent per-sample / per-step
// seeds from a master seed so that parallel work stays reproducible.
constexpr std::uint64_t mix_seed(std::uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t stream = 0) {
  return mix_seed(mix_seed(master ^ mix_seed(stream)) + index);
}

}  // namespace tacthand
