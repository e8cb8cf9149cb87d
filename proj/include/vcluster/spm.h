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

#ifndef VCLUSTER_SPM_H_
#define VCLUSTER_SPM_H_

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/statusor.h"
#include "vcluster/energy_model.h"
#include "vcluster/machine_config.h"

namespace vcluster {

// Multi-banked L1 scratchpad, word-interleaved: consecutive 8-byte words
// live in consecutive banks.
struct SpmConfig {
  static constexpr int kWordBytes = 8;
  int banks = 16;
  int bank_bytes = 8192;

  int64_t total_bytes() const { return int64_t{banks} * bank_bytes; }
  static SpmConfig From(const MachineConfig& cfg) {
    return SpmConfig{cfg.l1_banks, cfg.l1_bank_bytes};
  }
};

struct BankAddress {
  int bank = 0;
  int64_t row = 0;
  int offset = 0;
  bool operator==(const BankAddress&) const = default;
};

// bank = (addr / 8) mod M, row = addr / (8 M), offset = addr mod 8.
// Word accesses must be 8-byte aligned.
absl::StatusOr<BankAddress> MapAddress(uint64_t addr, const SpmConfig& cfg,
                                       bool word_access = true);

// One word-sized request from an initiator port. Sub-word accesses carry a
// byte strobe; `addr` is always the word address.
struct L1Request {
  int initiator = 0;
  uint64_t addr = 0;
  bool write = false;
  uint64_t wdata = 0;
  uint8_t strobe = 0xff;
  uint64_t tag = 0;  // echoed in the response
};

struct L1Response {
  int initiator = 0;
  uint64_t tag = 0;
  uint64_t rdata = 0;
  bool write = false;
};

// Per-bank round-robin arbiter. Each bank grants one request per cycle,
// searching initiators from the one after the last winner.
class L1Arbiter {
 public:
  L1Arbiter(const SpmConfig& cfg, int num_initiators);

  // Returns one flag per request. Every stalled request counts one conflict.
  std::vector<bool> Arbitrate(std::span<const L1Request> requests);

  int64_t conflicts() const { return conflicts_; }
  int last_granted(int bank) const { return last_granted_[bank]; }

 private:
  SpmConfig cfg_;
  int num_initiators_;
  std::vector<int> last_granted_;
  int64_t conflicts_ = 0;
};

// The scratchpad: arbitration, storage, one-cycle response latency and the
// per-access energy tally.
class SharedL1 {
 public:
  SharedL1(const SpmConfig& cfg, int num_initiators,
           L1EnergyModel energy = {});

  // Arbitrates and performs this cycle's requests. Granted reads produce a
  // response visible from `cycle + 1`.
  std::vector<bool> Cycle(int64_t cycle, std::span<const L1Request> requests);

  // Responses whose data is available at `cycle`.
  std::vector<L1Response> PopResponses(int64_t cycle);

  std::span<uint8_t> bytes() { return mem_; }
  std::span<const uint8_t> bytes() const { return mem_; }
  uint64_t LoadWord(uint64_t addr) const;
  void StoreWord(uint64_t addr, uint64_t value, uint8_t strobe = 0xff);

  const SpmConfig& config() const { return cfg_; }
  int64_t reads() const { return reads_; }
  int64_t writes() const { return writes_; }
  int64_t conflicts() const { return arbiter_.conflicts(); }
  int64_t max_grants_per_cycle() const { return max_grants_; }
  // 4.63 pJ per read plus 5.77 pJ per write with the default model.
  double energy_pj() const {
    return energy_.read_pj * reads_ + energy_.write_pj * writes_;
  }

 private:
  SpmConfig cfg_;
  L1Arbiter arbiter_;
  L1EnergyModel energy_;
  std::vector<uint8_t> mem_;
  struct Pending {
    int64_t ready;
    L1Response response;
  };
  std::deque<Pending> pending_;
  int64_t reads_ = 0;
  int64_t writes_ = 0;
  int64_t max_grants_ = 0;
};

// Memory images. The text form is
//
//   @<hex base address>
//   <16-hex-digit word> <16-hex-digit word> ...
//
// where each word is the little-endian value of 8 consecutive bytes. Several
// `@` sections may appear. The binary form is the raw bytes from `base`.
std::string FormatHexImage(std::span<const uint8_t> bytes, uint64_t base = 0);
absl::Status ParseHexImage(absl::string_view text, std::span<uint8_t> memory);
absl::Status LoadBinaryImage(std::span<const uint8_t> image, uint64_t base,
                             std::span<uint8_t> memory);

}  // namespace vcluster

#endif  // VCLUSTER_SPM_H_
