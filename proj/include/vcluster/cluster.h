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


#ifndef VCLUSTER_CLUSTER_H_
#define VCLUSTER_CLUSTER_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "vcluster/energy_model.h"
#include "vcluster/isa.h"
#include "vcluster/machine_config.h"
#include "vcluster/pe.h"
#include "vcluster/spm.h"

namespace vcluster {

// Per-access energy tally of one run, in pJ. An analytic estimate built from
// the SCM and SRAM access models, not a power measurement.
struct EnergyTally {
  double vrf = 0;
  double l1 = 0;
  double fpu = 0;
  double pe = 0;
  double total = 0;
  bool operator==(const EnergyTally&) const = default;
};

struct SimReport {
  int64_t cycles = 0;
  int pes = 0;
  int fpus_per_pe = 0;
  int64_t vau_busy = 0;
  int64_t vlsu_busy = 0;
  int64_t vsldu_busy = 0;
  int64_t instructions = 0;
  int64_t fma_ops = 0;
  double fma_ops_weighted = 0;
  double utilization = 0;  // fma_ops_weighted / (cycles * C * F)
  double flops = 0;        // 2 per element FMA
  double flop_per_cycle = 0;
  int64_t l1_reads = 0;
  int64_t l1_writes = 0;
  int64_t l1_conflicts = 0;
  int64_t vrf_reads = 0;
  int64_t vrf_writes = 0;
  int64_t vrf_port_stalls = 0;
  int64_t dispatch_stalls = 0;
  int64_t chaining_checks = 0;
  int64_t chaining_violations = 0;
  EnergyTally energy;
  std::vector<PeStats> per_pe;

  bool operator==(const SimReport& o) const;
};

struct SimOptions {
  EnergyProfile profile = EnergyProfile::kModel;
  ScmEnergyModel scm;
  std::ostream* trace = nullptr;  // event log destination
  // Cycles without any PE or memory progress before the run is declared hung.
  int64_t stall_limit = 20000;
};

struct SimResult {
  SimReport report;
  std::vector<uint8_t> memory;  // final L1 contents
  std::vector<std::vector<InstrRecord>> history;  // per PE
};

// Runs every PE program to completion against the shared L1.
absl::StatusOr<SimResult> Simulate(const Program& program,
                                   const MachineConfig& cfg,
                                   const SimOptions& opts = {});

// Human-readable summary and the CSV form (header plus one row).
std::string FormatReport(const SimReport& r);
inline constexpr char kReportCsvHeader[] =
    "cycles,pes,fpus,utilization,flop_per_cycle,fma_ops,l1_reads,l1_writes,"
    "l1_conflicts,vrf_reads,vrf_writes,vau_busy,vlsu_busy,vsldu_busy,"
    "e_vrf_pj,e_l1_pj,e_fpu_pj,e_pe_pj,e_total_pj";
std::string ReportCsvRow(const SimReport& r);

}  // namespace vcluster

#endif  // VCLUSTER_CLUSTER_H_
