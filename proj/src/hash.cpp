#include "ramstore/hash.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>

namespace ramstore {

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t previous) noexcept {
  uLong crc = previous;
  const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t remaining = bytes.size();
  // zlib takes a uInt length.
  constexpr std::size_t kStep = std::numeric_limits<uInt>::max();
  while (remaining > 0) {
    const auto n = static_cast<uInt>(std::min(remaining, kStep));
    crc = ::crc32(crc, data, n);
    data += n;
    remaining -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace ramstore
