#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace asmk::varint {

/// LEB128-style unsigned varint: 7 payload bits per byte, high bit set on all but the last.
inline void encode(std::uint64_t value, std::vector<std::uint8_t>& out)
{
    while (value >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(value | 0x80));
        value >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(value));
}

/// Decodes one value starting at `pos`, advancing it. Returns false on truncated or
/// over-long input.
inline bool decode(std::span<const std::uint8_t> in, std::size_t& pos, std::uint64_t& value)
{
    value = 0;
    for (unsigned shift = 0; shift < 64; shift += 7) {
        if (pos >= in.size()) return false;
        const std::uint8_t byte = in[pos++];
        value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
        if ((byte & 0x80) == 0) return true;
    }
    return false;
}

/// Gap-encodes a strictly ascending sequence; the first gap is the first value itself.
inline std::vector<std::uint8_t> encode_gaps(std::span<const std::uint32_t> ascending)
{
    std::vector<std::uint8_t> out;
    out.reserve(ascending.size());
    std::uint32_t prev = 0;
    for (std::size_t i = 0; i < ascending.size(); ++i) {
        encode(i == 0 ? ascending[i] : ascending[i] - prev, out);
        prev = ascending[i];
    }
    return out;
}

}  // namespace asmk::varint
