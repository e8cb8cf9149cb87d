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

#include "vcluster/isa.h"

#include <algorithm>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace vcluster {

absl::Status MachineConfig::Validate() const {
  auto bad = [](const std::string& msg) {
    return absl::InvalidArgumentError(msg);
  };
  if (num_pes < 1 || num_pes > 16) {
    return bad(absl::StrFormat("pes must be in [1, 16], got %d", num_pes));
  }
  if (fpus_per_pe != 1 && fpus_per_pe != 2 && fpus_per_pe != 4 &&
      fpus_per_pe != 8) {
    return bad(absl::StrFormat("fpus must be 1, 2, 4 or 8, got %d",
                               fpus_per_pe));
  }
  if (ipus_per_pe < 1) return bad("ipus must be at least 1");
  // Each bank row (VLEN/2 bytes) holds a whole number of port-wide chunks.
  if (vlen_bytes < 16 * fpus_per_pe || vlen_bytes % (16 * fpus_per_pe) != 0 ||
      vlen_bytes > 4096) {
    return bad(absl::StrFormat(
        "vlen must be a multiple of 16*fpus (%d) and at most 4096 bytes, "
        "got %d",
        16 * fpus_per_pe, vlen_bytes));
  }
  if (vlsu_ports < 1 || vlsu_ports > 32) {
    return bad(absl::StrFormat("vlsu-ports must be in [1, 32], got %d",
                               vlsu_ports));
  }
  if (l1_banks < 1 || (l1_banks & (l1_banks - 1)) != 0 || l1_banks > 256) {
    return bad(absl::StrFormat("banks must be a power of two <= 256, got %d",
                               l1_banks));
  }
  if (l1_bank_bytes < 8 || l1_bank_bytes % 8 != 0) {
    return bad("bank size must be a positive multiple of 8 bytes");
  }
  if (fpu_latency < 1) return bad("fpu latency must be positive");
  if (rob_depth_per_port < 1) return bad("rob depth must be positive");
  if (controller_queue < 1) return bad("controller queue must be positive");
  if (max_cycles < 0) return bad("max cycles must be non-negative");
  return absl::OkStatus();
}

absl::StatusOr<ElementWidth> ElementWidthFromBits(int bits) {
  switch (bits) {
    case 8:
      return ElementWidth::kE8;
    case 16:
      return ElementWidth::kE16;
    case 32:
      return ElementWidth::kE32;
    case 64:
      return ElementWidth::kE64;
    default:
      return absl::InvalidArgumentError(
          absl::StrFormat("unsupported element width %d", bits));
  }
}

absl::StatusOr<Lmul> LmulFromValue(int ell) {
  switch (ell) {
    case 1:
      return Lmul::kM1;
    case 2:
      return Lmul::kM2;
    case 4:
      return Lmul::kM4;
    case 8:
      return Lmul::kM8;
    default:
      return absl::InvalidArgumentError(
          absl::StrFormat("unsupported LMUL %d", ell));
  }
}

int64_t Vlmax(VType vtype, const MachineConfig& cfg) {
  return static_cast<int64_t>(LmulValue(vtype.lmul)) * cfg.vlen_bytes /
         SewBytes(vtype.sew);
}

int64_t ApplyVsetvli(int64_t avl, ElementWidth sew, Lmul lmul,
                     const MachineConfig& cfg, CsrState* csr) {
  VType vtype{sew, lmul};
  int64_t vl = std::clamp<int64_t>(avl, 0, Vlmax(vtype, cfg));
  csr->vtype = vtype;
  csr->vl = vl;
  return vl;
}

absl::StatusOr<std::vector<int>> RegisterGroup(int base, Lmul lmul) {
  const int ell = LmulValue(lmul);
  if (base < 0 || base >= kNumVectorRegs) {
    return absl::InvalidArgumentError(
        absl::StrFormat("vector register v%d out of range", base));
  }
  if (base % ell != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "register group base v%d is not a multiple of LMUL %d", base, ell));
  }
  std::vector<int> regs(ell);
  for (int i = 0; i < ell; ++i) regs[i] = base + i;
  return regs;
}

InstrClass ClassOf(Opcode op) {
  switch (op) {
    case Opcode::kVsetvli:
      return InstrClass::kVsetvli;
    case Opcode::kVle:
    case Opcode::kVlse64:
    case Opcode::kVluxei64:
      return InstrClass::kLoad;
    case Opcode::kVse:
    case Opcode::kVsse64:
    case Opcode::kVsuxei64:
      return InstrClass::kStore;
    case Opcode::kVfaddVV:
    case Opcode::kVfsubVV:
    case Opcode::kVfmulVV:
      return InstrClass::kArithVV;
    case Opcode::kVfmulVF:
      return InstrClass::kArithVF;
    case Opcode::kVfmaccVV:
    case Opcode::kVfmaccVF:
      return InstrClass::kFma;
    case Opcode::kVfwmaccSdotpVV:
    case Opcode::kVfwmaccSdotpVF:
      return InstrClass::kWideningSdotp;
    case Opcode::kVfredsumVS:
      return InstrClass::kReduction;
    case Opcode::kVaddVV:
    case Opcode::kVmulVV:
      return InstrClass::kIntArith;
    case Opcode::kVslideupVI:
    case Opcode::kVslidedownVI:
      return InstrClass::kSlide;
    case Opcode::kBnez:
    case Opcode::kBlt:
    case Opcode::kJ:
      return InstrClass::kScalarBranch;
    case Opcode::kLd:
    case Opcode::kFld:
    case Opcode::kFlw:
    case Opcode::kFlh:
      return InstrClass::kScalarLoad;
    case Opcode::kSd:
    case Opcode::kFsd:
      return InstrClass::kScalarStore;
    default:
      return InstrClass::kScalarAlu;
  }
}

AddrMode AddrModeOf(Opcode op) {
  switch (op) {
    case Opcode::kVle:
    case Opcode::kVse:
      return AddrMode::kUnitStride;
    case Opcode::kVlse64:
    case Opcode::kVsse64:
      return AddrMode::kStrided;
    case Opcode::kVluxei64:
    case Opcode::kVsuxei64:
      return AddrMode::kIndexed;
    default:
      return AddrMode::kNone;
  }
}

absl::string_view MnemonicOf(Opcode op, ElementWidth eew) {
  switch (op) {
    case Opcode::kVsetvli:
      return "vsetvli";
    case Opcode::kVle:
      switch (eew) {
        case ElementWidth::kE8:
          return "vle8.v";
        case ElementWidth::kE16:
          return "vle16.v";
        case ElementWidth::kE32:
          return "vle32.v";
        case ElementWidth::kE64:
          return "vle64.v";
      }
      break;
    case Opcode::kVse:
      switch (eew) {
        case ElementWidth::kE8:
          return "vse8.v";
        case ElementWidth::kE16:
          return "vse16.v";
        case ElementWidth::kE32:
          return "vse32.v";
        case ElementWidth::kE64:
          return "vse64.v";
      }
      break;
    case Opcode::kVlse64:
      return "vlse64.v";
    case Opcode::kVsse64:
      return "vsse64.v";
    case Opcode::kVluxei64:
      return "vluxei64.v";
    case Opcode::kVsuxei64:
      return "vsuxei64.v";
    case Opcode::kVfaddVV:
      return "vfadd.vv";
    case Opcode::kVfsubVV:
      return "vfsub.vv";
    case Opcode::kVfmulVV:
      return "vfmul.vv";
    case Opcode::kVfmulVF:
      return "vfmul.vf";
    case Opcode::kVfmaccVV:
      return "vfmacc.vv";
    case Opcode::kVfmaccVF:
      return "vfmacc.vf";
    case Opcode::kVfwmaccSdotpVV:
    case Opcode::kVfwmaccSdotpVF:
      return "vfwmacc-sdotp";
    case Opcode::kVfredsumVS:
      return "vfredsum.vs";
    case Opcode::kVaddVV:
      return "vadd.vv";
    case Opcode::kVmulVV:
      return "vmul.vv";
    case Opcode::kVslideupVI:
      return "vslideup.vi";
    case Opcode::kVslidedownVI:
      return "vslidedown.vi";
    case Opcode::kLi:
      return "li";
    case Opcode::kLa:
      return "la";
    case Opcode::kAdd:
      return "add";
    case Opcode::kAddi:
      return "addi";
    case Opcode::kSub:
      return "sub";
    case Opcode::kMul:
      return "mul";
    case Opcode::kSlli:
      return "slli";
    case Opcode::kBnez:
      return "bnez";
    case Opcode::kBlt:
      return "blt";
    case Opcode::kJ:
      return "j";
    case Opcode::kLd:
      return "ld";
    case Opcode::kSd:
      return "sd";
    case Opcode::kFld:
      return "fld";
    case Opcode::kFlw:
      return "flw";
    case Opcode::kFlh:
      return "flh";
    case Opcode::kFsd:
      return "fsd";
  }
  return "?";
}

bool IsVector(Opcode op) {
  switch (ClassOf(op)) {
    case InstrClass::kScalarAlu:
    case InstrClass::kScalarBranch:
    case InstrClass::kScalarLoad:
    case InstrClass::kScalarStore:
      return false;
    default:
      return true;
  }
}

bool IsVectorMemory(Opcode op) {
  InstrClass c = ClassOf(op);
  return c == InstrClass::kLoad || c == InstrClass::kStore;
}

bool IsScalarMemory(Opcode op) {
  InstrClass c = ClassOf(op);
  return c == InstrClass::kScalarLoad || c == InstrClass::kScalarStore;
}

bool ReadsFloatScalar(Opcode op) {
  return op == Opcode::kVfmaccVF || op == Opcode::kVfmulVF ||
         op == Opcode::kVfwmaccSdotpVF;
}

bool WritesFloatScalar(Opcode op) {
  return op == Opcode::kFld || op == Opcode::kFlw || op == Opcode::kFlh;
}

std::vector<int> Instruction::VectorSources() const {
  std::vector<int> srcs;
  switch (op) {
    case Opcode::kVfmaccVV:
    case Opcode::kVfwmaccSdotpVV:
      srcs = {vs1, vs2, vd};
      break;
    case Opcode::kVfmaccVF:
    case Opcode::kVfwmaccSdotpVF:
      srcs = {vs2, vd};
      break;
    case Opcode::kVfaddVV:
    case Opcode::kVfsubVV:
    case Opcode::kVfmulVV:
    case Opcode::kVaddVV:
    case Opcode::kVmulVV:
    case Opcode::kVfredsumVS:
      srcs = {vs2, vs1};
      break;
    case Opcode::kVfmulVF:
    case Opcode::kVslideupVI:
    case Opcode::kVslidedownVI:
      srcs = {vs2};
      break;
    case Opcode::kVse:
    case Opcode::kVsse64:
      srcs = {vd};
      break;
    case Opcode::kVluxei64:
      srcs = {vs2};
      break;
    case Opcode::kVsuxei64:
      srcs = {vd, vs2};
      break;
    default:
      break;
  }
  return srcs;
}

}  // namespace vcluster
