#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace ramstore {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// 64-bit FNV-1a, resumable: pass the previous result as `state` to hash a concatenation.
constexpr std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                                std::uint64_t state = kFnvOffsetBasis) noexcept {
  for (std::byte b : bytes) {
    state ^= static_cast<std::uint64_t>(b);
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t state = kFnvOffsetBasis) noexcept {
  for (char c : text) {
    state ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    state *= kFnvPrime;
  }
  return state;
}

/// CRC-32 (IEEE, reflected polynomial 0xEDB88320). Chain by passing the previous value.
std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t previous = 0) noexcept;

}  // namespace ramstore
