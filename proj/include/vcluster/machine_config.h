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

#ifndef VCLUSTER_MACHINE_CONFIG_H_
#define VCLUSTER_MACHINE_CONFIG_H_

#include <cstdint>

#include "absl/status/status.h"

namespace vcluster {

// Architectural parameters of the shared-L1 cluster. Every timing and
// capacity decision in the simulator reads from here.
struct MachineConfig {
  int num_pes = 2;          // C
  int fpus_per_pe = 4;      // F
  int ipus_per_pe = 1;      // G
  int vlen_bytes = 64;      // VLEN, bytes per architectural vector register
  int vlsu_ports = 4;       // 64-bit VLSU memory interfaces per PE
  int l1_banks = 16;        // M
  int l1_bank_bytes = 8192;
  int fpu_latency = 4;      // FMA pipeline depth
  int rob_depth_per_port = 4;
  int controller_queue = 4;  // accepted but not yet issued vector instructions
  // Whole-run cycle limit. Zero derives the limit from the program.
  int64_t max_cycles = 0;

  // Bytes moved by one VRF port access (64F bits).
  int chunk_bytes() const { return 8 * fpus_per_pe; }
  // Bytes of one VRF bank (half the register file).
  int vrf_bank_bytes() const { return 16 * vlen_bytes; }
  int l1_bytes() const { return l1_banks * l1_bank_bytes; }
  // L1 initiators per PE: the VLSU ports plus one scalar port.
  int ports_per_pe() const { return vlsu_ports + 1; }

  // The cluster evaluated throughout: C=2, F=4, VLEN=64 B, 16 banks.
  static MachineConfig Default() { return MachineConfig{}; }

  absl::Status Validate() const;
};

}  // namespace vcluster

#endif  // VCLUSTER_MACHINE_CONFIG_H_
