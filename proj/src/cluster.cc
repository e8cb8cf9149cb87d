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


#include "vcluster/cluster.h"

#include <algorithm>
#include <cstring>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "vcluster/vrf.h"

namespace vcluster {

bool SimReport::operator==(const SimReport& o) const {
  auto same_stats = [](const PeStats& a, const PeStats& b) {
    return a.vau_busy == b.vau_busy && a.vlsu_busy == b.vlsu_busy &&
           a.vsldu_busy == b.vsldu_busy && a.instructions == b.instructions &&
           a.vector_accepted == b.vector_accepted && a.fma_ops == b.fma_ops &&
           a.fma_ops_weighted == b.fma_ops_weighted &&
           a.fpu_lane_ops == b.fpu_lane_ops && a.vrf_reads == b.vrf_reads &&
           a.vrf_writes == b.vrf_writes &&
           a.vrf_port_stalls == b.vrf_port_stalls &&
           a.dispatch_stalls == b.dispatch_stalls &&
           a.chaining_violations == b.chaining_violations &&
           a.chaining_checks == b.chaining_checks;
  };
  if (per_pe.size() != o.per_pe.size()) return false;
  for (size_t i = 0; i < per_pe.size(); ++i) {
    if (!same_stats(per_pe[i], o.per_pe[i])) return false;
  }
  return cycles == o.cycles && pes == o.pes && fpus_per_pe == o.fpus_per_pe &&
         vau_busy == o.vau_busy && vlsu_busy == o.vlsu_busy &&
         vsldu_busy == o.vsldu_busy && instructions == o.instructions &&
         fma_ops == o.fma_ops && fma_ops_weighted == o.fma_ops_weighted &&
         utilization == o.utilization && flops == o.flops &&
         flop_per_cycle == o.flop_per_cycle && l1_reads == o.l1_reads &&
         l1_writes == o.l1_writes && l1_conflicts == o.l1_conflicts &&
         vrf_reads == o.vrf_reads && vrf_writes == o.vrf_writes &&
         vrf_port_stalls == o.vrf_port_stalls &&
         dispatch_stalls == o.dispatch_stalls &&
         chaining_checks == o.chaining_checks &&
         chaining_violations == o.chaining_violations && energy == o.energy;
}

absl::StatusOr<SimResult> Simulate(const Program& program,
                                   const MachineConfig& cfg,
                                   const SimOptions& opts) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (static_cast<int>(program.pes.size()) > cfg.num_pes) {
    return absl::InvalidArgumentError(
        absl::StrFormat("program has code for %d PEs, the cluster has %d",
                        program.pes.size(), cfg.num_pes));
  }
  if (program.data.size() > static_cast<size_t>(cfg.l1_bytes())) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "data image of %d bytes exceeds the %d-byte L1", program.data.size(),
        cfg.l1_bytes()));
  }
  const int ports = cfg.ports_per_pe();
  SharedL1 l1(SpmConfig::From(cfg), cfg.num_pes * ports);
  std::copy(program.data.begin(), program.data.end(), l1.bytes().begin());

  EventLog log(opts.trace);
  static const PeProgram kEmpty;
  std::vector<Pe> pes;
  pes.reserve(cfg.num_pes);
  for (int i = 0; i < cfg.num_pes; ++i) {
    const PeProgram* code =
        i < static_cast<int>(program.pes.size()) ? &program.pes[i] : &kEmpty;
    pes.emplace_back(i, cfg, code, &log);
  }

  int64_t limit = cfg.max_cycles;
  if (limit <= 0) {
    limit = program.cycle_bound > 0 ? 10 * program.cycle_bound : 50'000'000;
  }

  int64_t cycle = 0;
  int64_t last_progress = -1;
  int64_t last_progress_cycle = 0;
  std::vector<L1Request> reqs;
  std::vector<std::pair<int, int>> owner;  // (pe, port) per request
  for (;; ++cycle) {
    bool done = true;
    for (const Pe& pe : pes) done = done && pe.Done();
    if (done) break;
    if (cycle >= limit) {
      return absl::DeadlineExceededError(absl::StrFormat(
          "watchdog: no completion after %d cycles", cycle));
    }
    for (const L1Response& r : l1.PopResponses(cycle)) {
      pes[r.initiator / ports].Deliver(r.initiator % ports, r);
    }
    for (Pe& pe : pes) {
      if (absl::Status s = pe.Step(cycle); !s.ok()) {
        return absl::Status(s.code(),
                            absl::StrCat("cycle ", cycle, ": ", s.message()));
      }
    }
    reqs.clear();
    owner.clear();
    for (Pe& pe : pes) {
      const auto& pr = pe.port_requests();
      for (int p = 0; p < ports; ++p) {
        if (pr[p]) {
          reqs.push_back(*pr[p]);
          owner.push_back({pe.index(), p});
        }
      }
    }
    const std::vector<bool> grants = l1.Cycle(cycle, reqs);
    for (size_t i = 0; i < grants.size(); ++i) {
      if (grants[i]) pes[owner[i].first].Granted(owner[i].second);
    }
    int64_t progress = 0;
    for (const Pe& pe : pes) progress += pe.progress();
    if (progress != last_progress) {
      last_progress = progress;
      last_progress_cycle = cycle;
    } else if (cycle - last_progress_cycle > opts.stall_limit) {
      return absl::DeadlineExceededError(absl::StrFormat(
          "watchdog: no progress for %d cycles at cycle %d", opts.stall_limit,
          cycle));
    }
  }

  SimResult out;
  SimReport& r = out.report;
  r.cycles = cycle;
  r.pes = cfg.num_pes;
  r.fpus_per_pe = cfg.fpus_per_pe;
  double lane_ops = 0;
  for (const Pe& pe : pes) {
    const PeStats& s = pe.stats();
    r.per_pe.push_back(s);
    r.vau_busy += s.vau_busy;
    r.vlsu_busy += s.vlsu_busy;
    r.vsldu_busy += s.vsldu_busy;
    r.instructions += s.instructions;
    r.fma_ops += s.fma_ops;
    r.fma_ops_weighted += s.fma_ops_weighted;
    r.vrf_reads += s.vrf_reads;
    r.vrf_writes += s.vrf_writes;
    r.vrf_port_stalls += s.vrf_port_stalls;
    r.dispatch_stalls += s.dispatch_stalls;
    r.chaining_checks += s.chaining_checks;
    r.chaining_violations += s.chaining_violations;
    lane_ops += s.fpu_lane_ops;
    out.history.push_back(pe.history());
  }
  const double peak = static_cast<double>(r.cycles) * cfg.num_pes *
                      cfg.fpus_per_pe;
  r.utilization = peak > 0 ? r.fma_ops_weighted / peak : 0;
  r.flops = 2.0 * r.fma_ops;
  r.flop_per_cycle = r.cycles > 0 ? r.flops / r.cycles : 0;
  r.l1_reads = l1.reads();
  r.l1_writes = l1.writes();
  r.l1_conflicts = l1.conflicts();

  const double w = cfg.chunk_bytes();
  const double k = cfg.vrf_bank_bytes();
  const double rd = AccessEnergy(VrfAccessKind::kRead, w, k, opts.scm)
                        .value_or(0) / 1000.0;
  const double wr = AccessEnergy(VrfAccessKind::kWrite, w, k, opts.scm)
                        .value_or(0) / 1000.0;
  r.energy.vrf = rd * r.vrf_reads + wr * r.vrf_writes;
  r.energy.l1 = l1.energy_pj();
  r.energy.fpu = FpuEnergyPerFma(opts.profile) * lane_ops;
  r.energy.pe = kPeEnergyPerInstrPj * r.instructions;
  r.energy.total = r.energy.vrf + r.energy.l1 + r.energy.fpu + r.energy.pe;

  out.memory.assign(l1.bytes().begin(), l1.bytes().end());
  return out;
}

std::string FormatReport(const SimReport& r) {
  std::string s;
  absl::StrAppendFormat(&s, "cycles            %d\n", r.cycles);
  absl::StrAppendFormat(&s, "FLOP/cycle        %.3f\n", r.flop_per_cycle);
  absl::StrAppendFormat(&s, "FPU utilization   %.2f %%\n",
                        100 * r.utilization);
  absl::StrAppendFormat(&s, "FMA operations    %d\n", r.fma_ops);
  absl::StrAppendFormat(&s, "L1 reads/writes   %d / %d\n", r.l1_reads,
                        r.l1_writes);
  absl::StrAppendFormat(&s, "L1 bank conflicts %d\n", r.l1_conflicts);
  absl::StrAppendFormat(&s, "VRF reads/writes  %d / %d\n", r.vrf_reads,
                        r.vrf_writes);
  absl::StrAppendFormat(&s, "busy VAU/VLSU/VSLDU %d / %d / %d\n", r.vau_busy,
                        r.vlsu_busy, r.vsldu_busy);
  absl::StrAppendFormat(
      &s,
      "energy (analytic estimate, pJ): vrf %.1f  l1 %.1f  fpu %.1f  pe %.1f  "
      "total %.1f\n",
      r.energy.vrf, r.energy.l1, r.energy.fpu, r.energy.pe, r.energy.total);
  if (r.cycles > 0) {
    absl::StrAppendFormat(&s, "energy per cycle  %.2f pJ\n",
                          r.energy.total / r.cycles);
  }
  return s;
}

std::string ReportCsvRow(const SimReport& r) {
  return absl::StrFormat(
      "%d,%d,%d,%.6f,%.6f,%d,%d,%d,%d,%d,%d,%d,%d,%d,%.3f,%.3f,%.3f,%.3f,%.3f",
      r.cycles, r.pes, r.fpus_per_pe, r.utilization, r.flop_per_cycle,
      r.fma_ops, r.l1_reads, r.l1_writes, r.l1_conflicts, r.vrf_reads,
      r.vrf_writes, r.vau_busy, r.vlsu_busy, r.vsldu_busy, r.energy.vrf,
      r.energy.l1, r.energy.fpu, r.energy.pe, r.energy.total);
}

}  // namespace vcluster
