// Copyright 2026 The vcluster Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "vcluster/vector_ops.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"

namespace vcluster {

double DecodeMinifloat(uint32_t bits, MinifloatFormat fmt) {
  const int bias = (1 << (fmt.exp_bits - 1)) - 1;
  const uint32_t man_mask = (1u << fmt.man_bits) - 1;
  const uint32_t exp_mask = (1u << fmt.exp_bits) - 1;
  const bool neg = (bits >> (fmt.exp_bits + fmt.man_bits)) & 1;
  const uint32_t e = (bits >> fmt.man_bits) & exp_mask;
  const uint32_t m = bits & man_mask;
  double v;
  if (e == exp_mask) {
    v = m ? std::numeric_limits<double>::quiet_NaN()
          : std::numeric_limits<double>::infinity();
  } else if (e == 0) {
    v = std::ldexp(static_cast<double>(m), 1 - bias - fmt.man_bits);
  } else {
    v = std::ldexp(static_cast<double>(m | (1u << fmt.man_bits)),
                   static_cast<int>(e) - bias - fmt.man_bits);
  }
  return neg ? -v : v;
}

uint32_t EncodeMinifloat(double value, MinifloatFormat fmt) {
  const int bias = (1 << (fmt.exp_bits - 1)) - 1;
  const uint32_t exp_mask = (1u << fmt.exp_bits) - 1;
  const uint32_t sign = std::signbit(value) ? 1u << (fmt.exp_bits + fmt.man_bits)
                                            : 0;
  if (std::isnan(value)) {
    return sign | (exp_mask << fmt.man_bits) | (1u << (fmt.man_bits - 1));
  }
  const double a = std::fabs(value);
  if (std::isinf(a)) return sign | (exp_mask << fmt.man_bits);
  if (a == 0) return sign;
  int exp;
  std::frexp(a, &exp);  // a = f * 2^exp, f in [0.5, 1)
  int e = exp - 1 + bias;  // biased exponent of the leading one
  int scale_exp = (e <= 0) ? 1 - bias - fmt.man_bits
                           : exp - 1 - fmt.man_bits;
  // Integer significand at the target precision, rounded to nearest even.
  double scaled = std::ldexp(a, -scale_exp);
  double q = std::nearbyint(scaled);  // default rounding mode is RNE
  uint64_t m = static_cast<uint64_t>(q);
  if (e <= 0) {
    // Subnormal; rounding may carry into the smallest normal.
    if (m >> fmt.man_bits) return sign | (1u << fmt.man_bits);
    return sign | static_cast<uint32_t>(m);
  }
  if (m >> (fmt.man_bits + 1)) {
    m >>= 1;
    ++e;
  }
  if (e >= static_cast<int>(exp_mask)) return sign | (exp_mask << fmt.man_bits);
  return sign | (static_cast<uint32_t>(e) << fmt.man_bits) |
         static_cast<uint32_t>(m & ((1u << fmt.man_bits) - 1));
}

double LoadFloat(std::span<const uint8_t> bytes, int index, ElementWidth sew) {
  switch (sew) {
    case ElementWidth::kE64: {
      double v;
      std::memcpy(&v, bytes.data() + 8 * index, 8);
      return v;
    }
    case ElementWidth::kE32: {
      float v;
      std::memcpy(&v, bytes.data() + 4 * index, 4);
      return v;
    }
    case ElementWidth::kE16: {
      uint16_t h;
      std::memcpy(&h, bytes.data() + 2 * index, 2);
      return DecodeMinifloat(h, kBinary16);
    }
    case ElementWidth::kE8:
      return DecodeMinifloat(bytes[index], kE5M2);
  }
  return 0;
}

void StoreFloat(std::span<uint8_t> bytes, int index, ElementWidth sew,
                double value) {
  switch (sew) {
    case ElementWidth::kE64:
      std::memcpy(bytes.data() + 8 * index, &value, 8);
      break;
    case ElementWidth::kE32: {
      const float f = static_cast<float>(value);
      std::memcpy(bytes.data() + 4 * index, &f, 4);
      break;
    }
    case ElementWidth::kE16: {
      const uint16_t h = EncodeMinifloat(value, kBinary16);
      std::memcpy(bytes.data() + 2 * index, &h, 2);
      break;
    }
    case ElementWidth::kE8:
      bytes[index] = static_cast<uint8_t>(EncodeMinifloat(value, kE5M2));
      break;
  }
}

double RoundToWidth(double value, ElementWidth sew) {
  uint8_t buf[8] = {};
  StoreFloat(buf, 0, sew, value);
  return LoadFloat(buf, 0, sew);
}

double Sdotp(double a0, double b0, double a1, double b1, double e,
             ElementWidth result) {
  return RoundToWidth(a0 * b0 + a1 * b1 + e, result);
}

namespace {

ElementWidth Widen(ElementWidth w) {
  return w == ElementWidth::kE8 ? ElementWidth::kE16 : ElementWidth::kE32;
}

uint64_t LoadInt(std::span<const uint8_t> bytes, int index, int size) {
  uint64_t v = 0;
  std::memcpy(&v, bytes.data() + size * index, size);
  return v;
}

void StoreInt(std::span<uint8_t> bytes, int index, int size, uint64_t v) {
  std::memcpy(bytes.data() + size * index, &v, size);
}

// Scalar operand of a .vf form, interpreted at element width `sew`.
double ScalarFloat(uint64_t bits, ElementWidth sew) {
  uint8_t buf[8] = {};
  std::memcpy(buf, &bits, 8);
  return LoadFloat(buf, 0, sew);
}

}  // namespace

absl::StatusOr<int> ExecuteArith(Opcode op, ElementWidth sew, int elems,
                                 const ArithOperands& in,
                                 std::span<uint8_t> out) {
  const int size = SewBytes(sew);
  const InstrClass cls = ClassOf(op);
  const bool fp_narrow = sew == ElementWidth::kE8 || sew == ElementWidth::kE16;
  if (cls == InstrClass::kWideningSdotp) {
    if (!fp_narrow) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s needs 8- or 16-bit sources, not e%d", MnemonicOf(op),
          SewBits(sew)));
    }
    if (elems % 2 != 0) {
      return absl::InvalidArgumentError(
          "sum of dot products needs an even element count");
    }
    const ElementWidth wide = Widen(sew);
    uint8_t pair[8];
    std::memcpy(pair, &in.scalar, 8);
    for (int j = 0; j < elems / 2; ++j) {
      const bool vf = op == Opcode::kVfwmaccSdotpVF;
      const double a0 = vf ? LoadFloat(pair, 0, sew)
                           : LoadFloat(in.vs1, 2 * j, sew);
      const double a1 = vf ? LoadFloat(pair, 1, sew)
                           : LoadFloat(in.vs1, 2 * j + 1, sew);
      const double b0 = LoadFloat(in.vs2, 2 * j, sew);
      const double b1 = LoadFloat(in.vs2, 2 * j + 1, sew);
      const double e = LoadFloat(in.vd, j, wide);
      StoreFloat(out, j, wide, Sdotp(a0, b0, a1, b1, e, wide));
    }
    return elems * size;
  }
  if (cls == InstrClass::kIntArith) {
    for (int i = 0; i < elems; ++i) {
      const uint64_t a = LoadInt(in.vs2, i, size);
      const uint64_t b = LoadInt(in.vs1, i, size);
      StoreInt(out, i, size, op == Opcode::kVaddVV ? a + b : a * b);
    }
    return elems * size;
  }
  if (cls != InstrClass::kArithVV && cls != InstrClass::kArithVF &&
      cls != InstrClass::kFma) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s is not an element-wise VAU operation",
                        MnemonicOf(op)));
  }
  if (fp_narrow) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s supports e32 and e64 only, not e%d", MnemonicOf(op),
        SewBits(sew)));
  }
  const double s = ScalarFloat(in.scalar, sew);
  for (int i = 0; i < elems; ++i) {
    double r = 0;
    switch (op) {
      case Opcode::kVfaddVV:
        r = LoadFloat(in.vs2, i, sew) + LoadFloat(in.vs1, i, sew);
        break;
      case Opcode::kVfsubVV:
        r = LoadFloat(in.vs2, i, sew) - LoadFloat(in.vs1, i, sew);
        break;
      case Opcode::kVfmulVV:
        r = LoadFloat(in.vs2, i, sew) * LoadFloat(in.vs1, i, sew);
        break;
      case Opcode::kVfmulVF:
        r = LoadFloat(in.vs2, i, sew) * s;
        break;
      case Opcode::kVfmaccVV:
        r = std::fma(LoadFloat(in.vs1, i, sew), LoadFloat(in.vs2, i, sew),
                     LoadFloat(in.vd, i, sew));
        break;
      case Opcode::kVfmaccVF:
        r = std::fma(s, LoadFloat(in.vs2, i, sew), LoadFloat(in.vd, i, sew));
        break;
      default:
        return absl::InvalidArgumentError("unsupported arithmetic opcode");
    }
    if (sew == ElementWidth::kE32) {
      // binary32 fma: the double product is exact, so one rounding suffices.
      r = static_cast<float>(r);
    }
    StoreFloat(out, i, sew, r);
  }
  return elems * size;
}

LaneReducer::LaneReducer(int lanes, ElementWidth sew)
    : sew_(sew), lanes_(lanes, 0.0) {}

void LaneReducer::Add(std::span<const uint8_t> chunk, int elems) {
  for (int i = 0; i < elems; ++i) {
    lanes_[next_] += LoadFloat(chunk, i, sew_);
    next_ = (next_ + 1) % static_cast<int>(lanes_.size());
  }
}

double LaneReducer::Finish(double seed) const {
  std::vector<double> v = lanes_;
  while (v.size() > 1) {
    std::vector<double> half((v.size() + 1) / 2);
    for (size_t i = 0; i < half.size(); ++i) {
      half[i] = v[2 * i] + (2 * i + 1 < v.size() ? v[2 * i + 1] : 0.0);
    }
    v = std::move(half);
  }
  return RoundToWidth(seed + v[0], sew_);
}

}  // namespace vcluster
