#include "mechdet/half.hpp"

#include <bit>

namespace mechdet {

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    std::uint32_t exp = (h >> 10) & 0x1Fu;
    std::uint32_t mant = h & 0x3FFu;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            // subnormal: renormalize
            exp = 127 - 15 + 1;
            while ((mant & 0x400u) == 0) {
                mant <<= 1;
                --exp;
            }
            mant &= 0x3FFu;
            bits = sign | (exp << 23) | (mant << 13);
        }
    } else if (exp == 31) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

std::uint16_t float_to_half(float f) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
    const std::uint32_t abs = bits & 0x7FFFFFFFu;

    if (abs >= 0x7F800000u) {
        // inf stays inf, NaN keeps a quiet payload bit
        return sign | 0x7C00u | (abs > 0x7F800000u ? 0x200u : 0u);
    }
    if (abs >= 0x477FF000u) {
        // rounds past the largest finite half (65504)
        return sign | 0x7C00u;
    }
    if (abs < 0x38800000u) {
        // result is subnormal or zero
        if (abs < 0x33000000u) {
            return sign;
        }
        const std::uint32_t mant = (abs & 0x7FFFFFu) | 0x800000u;
        const int shift = 126 - static_cast<int>(abs >> 23);  // 14..24
        const std::uint32_t half_mant = mant >> (shift);
        const std::uint32_t rem = mant & ((1u << shift) - 1);
        const std::uint32_t halfway = 1u << (shift - 1);
        std::uint32_t out = half_mant;
        if (rem > halfway || (rem == halfway && (half_mant & 1u))) {
            ++out;
        }
        return sign | static_cast<std::uint16_t>(out);
    }
    std::uint32_t out = ((abs >> 23) - 127 + 15) << 10 | ((abs >> 13) & 0x3FFu);
    const std::uint32_t rem = abs & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) {
        ++out;  // may carry into the exponent, which is the correct result
    }
    return sign | static_cast<std::uint16_t>(out);
}

}  // namespace mechdet
