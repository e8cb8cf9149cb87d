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

#ifndef VCLUSTER_ASSEMBLER_H_
#define VCLUSTER_ASSEMBLER_H_

#include <string>
#include "absl/strings/string_view.h"

#include "absl/status/statusor.h"
#include "vcluster/isa.h"

namespace vcluster {

// Assembly syntax, one statement per line, `#` starts a comment:
//
//   .data                     switch to the data image (starts at address 0)
//   .text                     switch back to code
//   .pe N                     following code belongs to PE N (default 0)
//   .align N                  pad the data image to a 2^N byte boundary
//   .dword v[, v...]          64-bit integers
//   .double x[, x...]         binary64 values
//   .byte v[, v...]           single bytes
//   .zero N                   N zero bytes
//   name:                     label (data symbol or branch target)
//
// Vector mnemonics follow RVV operand order; stores name the data register
// first (`vse64.v v8, (a0)`). The widening sum-of-dot-products takes either
// a vector or an f-register as its first source:
//   vfwmacc-sdotp v0, v4, v8      vfwmacc-sdotp v0, fa0, v8
//
// Errors carry "line L, col C" of the offending token.
absl::StatusOr<Program> ParseProgram(absl::string_view text,
                                     const MachineConfig& cfg = {});

// Inverse of ParseProgram: parsing the result yields an equal Program.
std::string PrintProgram(const Program& program);

std::string FormatInstruction(const Instruction& instr);

}  // namespace vcluster

#endif  // VCLUSTER_ASSEMBLER_H_
