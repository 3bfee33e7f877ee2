#pragma once

#include <cstdint>

namespace mechdet {

// IEEE 754 binary16 <-> binary32. Widening is exact; narrowing rounds to
// nearest-even, saturating to infinity on overflow.
float half_to_float(std::uint16_t h);
std::uint16_t float_to_half(float f);

}  // namespace mechdet
