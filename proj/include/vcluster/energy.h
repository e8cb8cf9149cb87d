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

#ifndef VCLUSTER_ENERGY_H_
#define VCLUSTER_ENERGY_H_

#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "vcluster/energy_model.h"

// Analytical energy model of a shared-L1 cluster running an n x n
// double-precision matrix multiplication at peak FPU utilization. All
// per-cycle energies are in pJ/cycle; the clock is fixed at 1 GHz.

namespace vcluster {

struct ClusterEnergyParams {
  double pes = 2;          // C
  double fpus = 4;         // F per PE
  double vlen_bytes = 64;  // VLEN
  double n = 256;          // matrix dimension
  double fpu_pj_per_fma = FpuEnergyPerFma(EnergyProfile::kModel);
  double pe_pj_per_instr = kPeEnergyPerInstrPj;
  int hot_loop_instrs = 4;  // i; cancels out of the per-cycle PE energy
  int lmul = 4;             // register grouping used by the kernel
  L1EnergyModel l1;
};

struct EnergyBreakdown {
  double vlen_bytes = 0;
  double fpu = 0;
  double pe = 0;
  double l0 = 0;
  double l0_to_l1 = 0;
  double l1_to_l0 = 0;
  double l1 = 0;  // l0_to_l1 + l1_to_l0
  double total = 0;
  double gflops_per_watt = 0;
};

// C * F * energy per FMA.
double FpuEnergy(const ClusterEnergyParams& p);

// Issue energy amortized over the cycles one vector instruction keeps the
// FPUs busy: e_PE * 8 C F / (lmul * VLEN), i.e. e_PE * 2 C F / VLEN at m4.
double PeEnergy(const ClusterEnergyParams& p);

// Three port-wide reads and one write per cycle into each PE's VRF bank.
double L0Energy(const ClusterEnergyParams& p, const ScmEnergyModel& scm);

// Result write-back (L0 -> L1), amortized over the n^3 / (C F) cycles.
double L0ToL1Energy(const ClusterEnergyParams& p, const ScmEnergyModel& scm);

// Operand refill (L1 -> L0): two L1 words per FMA lane, reduced by
// sqrt(32 VLEN / 64) through register-file reuse.
double L1ToL0Energy(const ClusterEnergyParams& p, const ScmEnergyModel& scm);

EnergyBreakdown EvaluateEnergy(const ClusterEnergyParams& p,
                               const ScmEnergyModel& scm);

// One breakdown per VLEN sample; every sample must lie in [8, 1024] bytes.
absl::StatusOr<std::vector<EnergyBreakdown>> EfficiencyCurve(
    const ClusterEnergyParams& p, const ScmEnergyModel& scm,
    std::span<const double> vlens);

struct VlenOptimum {
  double vlen_bytes = 0;
  double gflops_per_watt = 0;
};

// Exhaustive sweep of [min, max] at 1-byte steps, or over the powers of two
// in that range.
absl::StatusOr<VlenOptimum> OptimizeVlen(const ClusterEnergyParams& p,
                                         const ScmEnergyModel& scm,
                                         int min_vlen, int max_vlen,
                                         bool powers_of_two = false);

struct BalanceResult {
  bool satisfied = false;
  double beta_min = 0;  // L1 words per cycle the cluster must fetch
};

// Machine balance for matmul with a VRF of `capacity_bytes` per PE: each of
// the C*F FMA lanes needs two L1 words per cycle when it holds only the
// 64-byte minimum register set, and reuse scales that by sqrt(Z / 64).
BalanceResult BalanceCheck(double pes, double fpus, double beta_words,
                           double capacity_bytes);

struct ScmSample {
  double width_bytes = 0;
  double capacity_bytes = 0;
  double energy_fj = 0;
};

// Least-squares fit of energy = a W + b W K + c K (Householder QR on the
// column-scaled design matrix).
absl::StatusOr<ScmCoefficients> FitScmCoefficients(
    std::span<const ScmSample> samples);

// Sum of squared residuals of `coeffs` over `samples`.
double FitResidual(const ScmCoefficients& coeffs,
                   std::span<const ScmSample> samples);

inline constexpr char kEnergyCsvHeader[] =
    "vlen,e_fpu,e_pe,e_l0,e_l1,total,gflops_per_watt";

std::string EfficiencyCurveCsv(std::span<const EnergyBreakdown> curve);

}  // namespace vcluster

#endif  // VCLUSTER_ENERGY_H_
