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

#ifndef VCLUSTER_ISA_H_
#define VCLUSTER_ISA_H_

#include <cstdint>
#include <map>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/statusor.h"
#include "vcluster/machine_config.h"

// The Zve64d subset executed by the vector PEs, plus the handful of scalar
// instructions needed for loop control and scalar operand loads.

namespace vcluster {

inline constexpr int kNumVectorRegs = 32;
inline constexpr int kNumScalarRegs = 32;

enum class ElementWidth : uint8_t { kE8 = 8, kE16 = 16, kE32 = 32, kE64 = 64 };

inline int SewBits(ElementWidth w) { return static_cast<int>(w); }
inline int SewBytes(ElementWidth w) { return static_cast<int>(w) / 8; }
absl::StatusOr<ElementWidth> ElementWidthFromBits(int bits);

enum class Lmul : uint8_t { kM1 = 1, kM2 = 2, kM4 = 4, kM8 = 8 };

inline int LmulValue(Lmul l) { return static_cast<int>(l); }
absl::StatusOr<Lmul> LmulFromValue(int ell);

struct VType {
  ElementWidth sew = ElementWidth::kE64;
  Lmul lmul = Lmul::kM1;
  bool operator==(const VType&) const = default;
};

struct CsrState {
  int64_t vl = 0;
  VType vtype;
  bool operator==(const CsrState&) const = default;
};

// Elements of one register group: lmul * VLEN / (sew / 8).
int64_t Vlmax(VType vtype, const MachineConfig& cfg);

// Clamps the requested length to VLMAX and installs the new vtype.
int64_t ApplyVsetvli(int64_t avl, ElementWidth sew, Lmul lmul,
                     const MachineConfig& cfg, CsrState* csr);

// Physical registers {base, ..., base + lmul - 1}; base must be aligned.
absl::StatusOr<std::vector<int>> RegisterGroup(int base, Lmul lmul);

enum class Opcode : uint8_t {
  // Vector configuration.
  kVsetvli,
  // Vector memory.
  kVle,       // unit-stride load, element width in Instruction::eew
  kVse,       // unit-stride store
  kVlse64,    // constant-stride load
  kVsse64,    // constant-stride store
  kVluxei64,  // indexed (gather) load, 64-bit byte offsets
  kVsuxei64,  // indexed (scatter) store
  // Floating-point arithmetic on the FPUs.
  kVfaddVV,
  kVfsubVV,
  kVfmulVV,
  kVfmulVF,
  kVfmaccVV,
  kVfmaccVF,
  kVfwmaccSdotpVV,
  kVfwmaccSdotpVF,
  kVfredsumVS,
  // Integer arithmetic on the IPU.
  kVaddVV,
  kVmulVV,
  // Permutation.
  kVslideupVI,
  kVslidedownVI,
  // Scalar bookkeeping.
  kLi,
  kLa,
  kAdd,
  kAddi,
  kSub,
  kMul,
  kSlli,
  kBnez,
  kBlt,
  kJ,
  kLd,
  kSd,
  kFld,
  kFlw,
  kFlh,
  kFsd,
};

enum class InstrClass : uint8_t {
  kVsetvli,
  kArithVV,
  kArithVF,
  kFma,
  kWideningSdotp,
  kReduction,
  kIntArith,
  kLoad,
  kStore,
  kSlide,
  kScalarAlu,
  kScalarBranch,
  kScalarLoad,
  kScalarStore,
};

enum class AddrMode : uint8_t { kNone, kUnitStride, kStrided, kIndexed };

InstrClass ClassOf(Opcode op);
AddrMode AddrModeOf(Opcode op);
absl::string_view MnemonicOf(Opcode op, ElementWidth eew = ElementWidth::kE64);
bool IsVector(Opcode op);
bool IsVectorMemory(Opcode op);
bool IsScalarMemory(Opcode op);

// True when the `rs1` operand names a floating-point scalar register.
bool ReadsFloatScalar(Opcode op);
// True when `rd` names a floating-point scalar register.
bool WritesFloatScalar(Opcode op);

// A decoded instruction. Scalar operands live in rd/rs1/rs2 (integer or
// floating-point file depending on the opcode), vector operands in
// vd/vs1/vs2. Unused operands are -1.
struct Instruction {
  Opcode op = Opcode::kAddi;
  int rd = -1;
  int rs1 = -1;
  int rs2 = -1;
  int vd = -1;
  int vs1 = -1;
  int vs2 = -1;
  int64_t imm = 0;
  ElementWidth eew = ElementWidth::kE64;  // memory EEW, or vsetvli SEW
  Lmul lmul = Lmul::kM1;                  // vsetvli only
  std::string symbol;  // label operand (branch target or data symbol)
  int line = 0;        // source line, 0 when generated

  // Vector registers read, including the accumulator of fma-like ops.
  std::vector<int> VectorSources() const;

  bool operator==(const Instruction& o) const {
    return op == o.op && rd == o.rd && rs1 == o.rs1 && rs2 == o.rs2 &&
           vd == o.vd && vs1 == o.vs1 && vs2 == o.vs2 && imm == o.imm &&
           eew == o.eew && lmul == o.lmul && symbol == o.symbol;
  }
};

// Instruction stream of one PE. Branch targets are resolved into `imm` as
// absolute instruction indices; `labels` keeps the names for printing.
struct PeProgram {
  std::vector<Instruction> code;
  std::map<std::string, int> labels;
  bool operator==(const PeProgram&) const = default;
};

struct Program {
  std::vector<PeProgram> pes;
  // Initial L1 contents starting at address 0.
  std::vector<uint8_t> data;
  std::map<std::string, uint64_t> symbols;
  // Analytic cycle bound used by the simulator watchdog; 0 if unknown.
  int64_t cycle_bound = 0;

  bool operator==(const Program& o) const {
    return pes == o.pes && data == o.data && symbols == o.symbols;
  }
};

}  // namespace vcluster

#endif  // VCLUSTER_ISA_H_
