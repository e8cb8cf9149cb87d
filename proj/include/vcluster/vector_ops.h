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


#ifndef VCLUSTER_VECTOR_OPS_H_
#define VCLUSTER_VECTOR_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "vcluster/isa.h"

namespace vcluster {

// IEEE-style binary format with `exp_bits` exponent and `man_bits` fraction
// bits: (5, 10) is binary16, (5, 2) is the E5M2 8-bit format.
struct MinifloatFormat {
  int exp_bits;
  int man_bits;
};
inline constexpr MinifloatFormat kBinary16{5, 10};
inline constexpr MinifloatFormat kE5M2{5, 2};

double DecodeMinifloat(uint32_t bits, MinifloatFormat fmt);
// Round to nearest, ties to even; overflow saturates to infinity.
uint32_t EncodeMinifloat(double value, MinifloatFormat fmt);

// Element values of the floating-point formats used by the VAU: binary64,
// binary32, binary16 and E5M2.
double LoadFloat(std::span<const uint8_t> bytes, int index, ElementWidth sew);
void StoreFloat(std::span<uint8_t> bytes, int index, ElementWidth sew,
                double value);

// Rounds `value` to the format of `sew` and back.
double RoundToWidth(double value, ElementWidth sew);

// The widening sum of dot products: a0*b0 + a1*b1 + e, with w-bit products
// accumulated in binary64 and rounded once to the 2w-bit result format.
double Sdotp(double a0, double b0, double a1, double b1, double e,
             ElementWidth result);

// Operands of one element-wise VAU step over `elems` source elements. `vs1`
// is empty for .vf forms, which broadcast `scalar` (raw register bits)
// instead.
struct ArithOperands {
  std::span<const uint8_t> vs1;
  std::span<const uint8_t> vs2;
  std::span<const uint8_t> vd;
  uint64_t scalar = 0;
};

// Computes the destination bytes for `elems` source elements of `op` at
// element width `sew` into `out` and returns the written byte count.
// Reductions are not element-wise and are rejected here.
absl::StatusOr<int> ExecuteArith(Opcode op, ElementWidth sew, int elems,
                                 const ArithOperands& in,
                                 std::span<uint8_t> out);

// Ordered sum for vfredsum: `lanes` partial sums fed round-robin, folded
// pairwise at the end, then added to the scalar seed.
class LaneReducer {
 public:
  LaneReducer(int lanes, ElementWidth sew);
  void Add(std::span<const uint8_t> chunk, int elems);
  double Finish(double seed) const;

 private:
  ElementWidth sew_;
  std::vector<double> lanes_;
  int next_ = 0;
};

}  // namespace vcluster

#endif  // VCLUSTER_VECTOR_OPS_H_
