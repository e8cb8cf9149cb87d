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

#ifndef VCLUSTER_VRF_H_
#define VCLUSTER_VRF_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "vcluster/energy_model.h"
#include "vcluster/isa.h"
#include "vcluster/machine_config.h"

namespace vcluster {

// Dual-bank 3R1W vector register file. Every architectural register owns
// row r of both banks; a register group is cut into port-wide chunks that
// alternate between the banks, so consecutive chunks of one instruction hit
// different banks and two instructions can proceed in anti-phase.
class VrfLayout {
 public:
  static constexpr int kBanks = 2;
  static constexpr int kRows = kNumVectorRegs;
  static constexpr int kReadPorts = 3;
  static constexpr int kWritePorts = 1;

  explicit VrfLayout(const MachineConfig& cfg)
      : vlen_bytes_(cfg.vlen_bytes), chunk_bytes_(cfg.chunk_bytes()) {}

  int row_bytes() const { return vlen_bytes_ / 2; }
  int chunk_bytes() const { return chunk_bytes_; }
  int bank_bytes() const { return kRows * row_bytes(); }
  // Chunks held by one architectural register.
  int chunks_per_reg() const { return vlen_bytes_ / chunk_bytes_; }

  struct Location {
    int bank = 0;
    int row = 0;
    int offset = 0;  // byte offset within the row
    bool operator==(const Location&) const = default;
  };

  // Chunk `chunk` of the group starting at `base`. Fails when the chunk lies
  // outside the group or the base is misaligned.
  absl::StatusOr<Location> LocateChunk(int base, Lmul lmul, int chunk) const;

  // Same mapping without validation, addressing the register file as one
  // sequence of chunks (chunk c of register r is slot r*chunks_per_reg()+c).
  Location LocateSlot(int slot) const;

 private:
  int vlen_bytes_;
  int chunk_bytes_;
};

enum class VrfAccessKind : uint8_t { kRead, kWrite };

// Requesting units in grant-priority order.
enum class VrfUnit : uint8_t { kVau = 0, kVsldu = 1, kVlsu = 2, kSequencer = 3 };

struct VrfPortRequest {
  VrfAccessKind kind = VrfAccessKind::kRead;
  int bank = 0;
  int row = 0;
  uint64_t strobe = 0;  // per-byte write enable, bit i = byte i of the port
  VrfUnit unit = VrfUnit::kVau;
};

struct ArbitrationResult {
  std::vector<int> granted;  // indices into the request list
  std::vector<int> stalled;
};

// Grants at most three reads and one write per bank. Higher-priority units
// win; within a unit, earlier requests win.
ArbitrationResult ArbitrateVrf(std::span<const VrfPortRequest> requests);

// Register file contents, zero-initialised.
class VrfState {
 public:
  explicit VrfState(const VrfLayout& layout);

  const VrfLayout& layout() const { return layout_; }

  std::span<const uint8_t> Read(const VrfLayout::Location& loc) const;
  void Write(const VrfLayout::Location& loc, std::span<const uint8_t> bytes,
             uint64_t strobe);

  // Architectural view: byte `i` of register group starting at `base`.
  uint8_t GroupByte(int base, int64_t i) const;
  void SetGroupByte(int base, int64_t i, uint8_t v);

 private:
  uint8_t* At(int bank, int row, int offset);
  const uint8_t* At(int bank, int row, int offset) const;

  VrfLayout layout_;
  std::vector<uint8_t> banks_[VrfLayout::kBanks];
};

// Energy in fJ of accessing `width_bytes` of an SCM of `capacity_bytes`.
absl::StatusOr<double> AccessEnergy(VrfAccessKind kind, double width_bytes,
                                    double capacity_bytes,
                                    const ScmEnergyModel& model);

}  // namespace vcluster

#endif  // VCLUSTER_VRF_H_
