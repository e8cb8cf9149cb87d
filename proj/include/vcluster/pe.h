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


#ifndef VCLUSTER_PE_H_
#define VCLUSTER_PE_H_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/string_view.h"
#include "vcluster/isa.h"
#include "vcluster/machine_config.h"
#include "vcluster/spm.h"
#include "vcluster/vector_ops.h"
#include "vcluster/vrf.h"

namespace vcluster {

// Optional event log: one `cycle,unit,event,detail` line per event.
class EventLog {
 public:
  explicit EventLog(std::ostream* out = nullptr) : out_(out) {}
  bool enabled() const { return out_ != nullptr; }
  void Log(int64_t cycle, absl::string_view unit, absl::string_view event,
           absl::string_view detail);

 private:
  std::ostream* out_;
};

enum class VectorUnit : uint8_t { kVau, kVlsu, kVsldu };

// Lifetime of one accepted vector instruction, in cycles.
struct InstrRecord {
  int64_t id = 0;
  int pc = 0;
  Opcode op = Opcode::kAddi;
  int64_t accepted = -1;
  int64_t issued = -1;    // handed from the controller queue to its unit
  int64_t first_op = -1;  // first chunk, memory request or slide read
  int64_t last_op = -1;
  int64_t completed = -1;  // every read and write performed
  int64_t vau_cycles = 0;  // cycles holding the VAU issue stage
};

struct PeStats {
  int64_t vau_busy = 0;
  int64_t vlsu_busy = 0;
  int64_t vsldu_busy = 0;
  int64_t instructions = 0;  // retired by the scalar core, vector included
  int64_t vector_accepted = 0;
  int64_t fma_ops = 0;            // element FMAs; a sum of dot products counts 2
  double fma_ops_weighted = 0;    // fma_ops scaled by source width / 64
  double fpu_lane_ops = 0;        // 64-bit FPU slot uses by any FP operation
  int64_t vrf_reads = 0;
  int64_t vrf_writes = 0;
  int64_t vrf_port_stalls = 0;
  int64_t dispatch_stalls = 0;  // cycles a vector instruction waited for space
  int64_t chaining_violations = 0;
  int64_t chaining_checks = 0;
};

// One processing element: a single-issue scalar core that forwards vector
// instructions to a controller, which issues them in order to the VAU
// (F FPUs and the IPU), the VLSU and the VSLDU. The units overlap and chain
// on VRF chunks under a scoreboard.
//
// Memory ports 0..vlsu_ports-1 belong to the VLSU; the last port is the
// scalar core's. Each port holds at most one un-granted request.
class Pe {
 public:
  Pe(int index, const MachineConfig& cfg, const PeProgram* program,
     EventLog* log);
  ~Pe();
  Pe(Pe&&) noexcept;

  int index() const { return index_; }
  int num_ports() const { return cfg_.ports_per_pe(); }

  // Responses are delivered before Step in the cycle they become visible.
  void Deliver(int port, const L1Response& response);
  absl::Status Step(int64_t cycle);
  const std::vector<std::optional<L1Request>>& port_requests() const {
    return ports_;
  }
  void Granted(int port);

  bool Done() const;
  int64_t progress() const { return progress_; }
  const PeStats& stats() const { return stats_; }
  const std::vector<InstrRecord>& history() const { return history_; }

  uint64_t xreg(int i) const { return x_[i]; }
  uint64_t freg(int i) const { return f_[i]; }
  void set_xreg(int i, uint64_t v) {
    if (i != 0) x_[i] = v;
  }
  const CsrState& csr() const { return csr_; }
  const VrfState& vrf() const { return vrf_; }
  VrfState& mutable_vrf() { return vrf_; }

 private:
  struct VecOp;
  struct VauWrite;
  struct RobEntry;
  struct PendingLoad;
  struct UnitPlan;

  // Scoreboard queries over older in-flight instructions.
  bool CanRead(const VecOp& op, int slot, int64_t cycle) const;
  bool CanWrite(const VecOp& op, int slot) const;
  void NoteRead(VecOp& op, int slot, int64_t cycle);
  void NoteWrite(VecOp& op, int chunk, int64_t cycle);
  int GroupSlot(int base, int chunk) const { return base * per_reg_ + chunk; }

  absl::Status VrfPhase(int64_t cycle);
  absl::Status MemoryPhase(int64_t cycle);
  void Retire(int64_t cycle);
  void ControllerIssue(int64_t cycle);
  absl::Status ScalarStep(int64_t cycle);
  absl::StatusOr<std::unique_ptr<VecOp>> Accept(const Instruction& in,
                                                int64_t cycle);
  absl::Status Fault(const VecOp* op, absl::string_view what) const;

  int index_;
  MachineConfig cfg_;
  const PeProgram* program_;
  EventLog* log_;
  VrfLayout layout_;
  VrfState vrf_;
  int per_reg_;  // chunks per architectural register
  int num_slots_;

  // Scalar core.
  int pc_ = 0;
  uint64_t x_[kNumScalarRegs] = {};
  uint64_t f_[kNumScalarRegs] = {};
  int x_busy_[kNumScalarRegs] = {};
  int f_busy_[kNumScalarRegs] = {};
  CsrState csr_;
  std::deque<PendingLoad> scalar_loads_;
  int scalar_stores_ = 0;

  // Controller and units.
  int64_t next_id_ = 0;
  std::map<int64_t, std::unique_ptr<VecOp>> inflight_;
  std::deque<VecOp*> queue_;
  std::deque<VecOp*> vau_;
  std::deque<VecOp*> vlsu_;
  std::deque<VecOp*> vsldu_;
  std::deque<VauWrite> vau_writes_;
  int64_t ipu_ready_ = 0;
  int vector_mem_inflight_ = 0;
  std::vector<std::deque<RobEntry>> rob_;
  std::vector<std::optional<L1Request>> ports_;
  std::vector<uint64_t> port_seq_;

  // Chaining checker: the youngest accepted writer per slot and the last
  // writer whose data actually reached the slot.
  std::vector<int64_t> last_writer_;
  std::vector<int64_t> current_writer_;
  std::vector<int64_t> slot_written_at_;

  PeStats stats_;
  std::vector<InstrRecord> history_;
  int64_t progress_ = 0;
};

}  // namespace vcluster

#endif  // VCLUSTER_PE_H_
