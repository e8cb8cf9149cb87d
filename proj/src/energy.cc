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

#include "vcluster/energy.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "vcluster/vrf.h"

namespace vcluster {
namespace {

// SCM access energy in pJ for a port of 8F bytes into a 16 VLEN-byte bank.
double BankAccessPj(VrfAccessKind kind, const ClusterEnergyParams& p,
                    const ScmEnergyModel& scm) {
  const double w = 8 * p.fpus;
  const double k = 16 * p.vlen_bytes;
  auto fj = AccessEnergy(kind, w, k, scm);
  return fj.ok() ? *fj / 1000.0 : 0.0;
}

}  // namespace

double FpuEnergy(const ClusterEnergyParams& p) {
  return p.pes * p.fpus * p.fpu_pj_per_fma;
}

double PeEnergy(const ClusterEnergyParams& p) {
  return p.pe_pj_per_instr * 8 * p.pes * p.fpus / (p.lmul * p.vlen_bytes);
}

double L0Energy(const ClusterEnergyParams& p, const ScmEnergyModel& scm) {
  return p.pes * (3 * BankAccessPj(VrfAccessKind::kRead, p, scm) +
                  BankAccessPj(VrfAccessKind::kWrite, p, scm));
}

double L0ToL1Energy(const ClusterEnergyParams& p, const ScmEnergyModel& scm) {
  return (p.pes * BankAccessPj(VrfAccessKind::kRead, p, scm) +
          p.pes * p.fpus * p.l1.write_pj) /
         p.n;
}

double L1ToL0Energy(const ClusterEnergyParams& p, const ScmEnergyModel& scm) {
  return p.pes *
         (2 * p.fpus * p.l1.read_pj +
          2 * BankAccessPj(VrfAccessKind::kWrite, p, scm)) /
         std::sqrt(32 * p.vlen_bytes / 64);
}

EnergyBreakdown EvaluateEnergy(const ClusterEnergyParams& p,
                               const ScmEnergyModel& scm) {
  EnergyBreakdown e;
  e.vlen_bytes = p.vlen_bytes;
  e.fpu = FpuEnergy(p);
  e.pe = PeEnergy(p);
  e.l0 = L0Energy(p, scm);
  e.l0_to_l1 = L0ToL1Energy(p, scm);
  e.l1_to_l0 = L1ToL0Energy(p, scm);
  e.l1 = e.l0_to_l1 + e.l1_to_l0;
  e.total = e.fpu + e.pe + e.l0 + e.l1;
  e.gflops_per_watt = e.total > 0 ? 2 * p.pes * p.fpus * 1000 / e.total : 0;
  return e;
}

absl::StatusOr<std::vector<EnergyBreakdown>> EfficiencyCurve(
    const ClusterEnergyParams& p, const ScmEnergyModel& scm,
    std::span<const double> vlens) {
  std::vector<EnergyBreakdown> out;
  out.reserve(vlens.size());
  for (double v : vlens) {
    if (!(v >= 8 && v <= 1024)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("VLEN %g outside [8, 1024] bytes", v));
    }
    ClusterEnergyParams q = p;
    q.vlen_bytes = v;
    out.push_back(EvaluateEnergy(q, scm));
  }
  return out;
}

absl::StatusOr<VlenOptimum> OptimizeVlen(const ClusterEnergyParams& p,
                                         const ScmEnergyModel& scm,
                                         int min_vlen, int max_vlen,
                                         bool powers_of_two) {
  if (min_vlen > max_vlen) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "empty VLEN range [%d, %d]", min_vlen, max_vlen));
  }
  std::vector<double> grid;
  for (int v = min_vlen; v <= max_vlen; ++v) {
    if (powers_of_two && (v <= 0 || (v & (v - 1)) != 0)) continue;
    grid.push_back(v);
  }
  if (grid.empty()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "no candidate VLEN in [%d, %d]", min_vlen, max_vlen));
  }
  auto curve = EfficiencyCurve(p, scm, grid);
  if (!curve.ok()) return curve.status();
  VlenOptimum best{curve->front().vlen_bytes, curve->front().gflops_per_watt};
  for (const EnergyBreakdown& e : *curve) {
    if (e.gflops_per_watt > best.gflops_per_watt) {
      best = {e.vlen_bytes, e.gflops_per_watt};
    }
  }
  return best;
}

BalanceResult BalanceCheck(double pes, double fpus, double beta_words,
                           double capacity_bytes) {
  const double beta_min = 2 * pes * fpus / std::sqrt(capacity_bytes / 64);
  return BalanceResult{beta_words >= beta_min, beta_min};
}

absl::StatusOr<ScmCoefficients> FitScmCoefficients(
    std::span<const ScmSample> samples) {
  constexpr int kCols = 3;
  const size_t m = samples.size();
  if (m < kCols) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "need at least 3 samples to fit 3 coefficients, got %d", m));
  }
  // Design matrix columns W, W*K, K, scaled to unit norm.
  std::vector<std::array<double, kCols>> a(m);
  std::vector<double> y(m);
  std::array<double, kCols> scale{};
  for (size_t i = 0; i < m; ++i) {
    const ScmSample& s = samples[i];
    a[i] = {s.width_bytes, s.width_bytes * s.capacity_bytes, s.capacity_bytes};
    y[i] = s.energy_fj;
    for (int j = 0; j < kCols; ++j) scale[j] += a[i][j] * a[i][j];
  }
  for (int j = 0; j < kCols; ++j) {
    scale[j] = std::sqrt(scale[j]);
    if (scale[j] == 0) {
      return absl::FailedPreconditionError("rank-deficient sample set");
    }
    for (size_t i = 0; i < m; ++i) a[i][j] /= scale[j];
  }
  // Householder QR, applying each reflector to y as well.
  std::array<double, kCols> diag{};
  for (int k = 0; k < kCols; ++k) {
    double norm = 0;
    for (size_t i = k; i < m; ++i) norm += a[i][k] * a[i][k];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      return absl::FailedPreconditionError("rank-deficient sample set");
    }
    const double alpha = a[k][k] > 0 ? -norm : norm;
    std::vector<double> v(m, 0.0);
    for (size_t i = k; i < m; ++i) v[i] = a[i][k];
    v[k] -= alpha;
    double vnorm2 = 0;
    for (size_t i = k; i < m; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 > 0) {
      for (int j = k; j < kCols; ++j) {
        double dot = 0;
        for (size_t i = k; i < m; ++i) dot += v[i] * a[i][j];
        const double f = 2 * dot / vnorm2;
        for (size_t i = k; i < m; ++i) a[i][j] -= f * v[i];
      }
      double dot = 0;
      for (size_t i = k; i < m; ++i) dot += v[i] * y[i];
      const double f = 2 * dot / vnorm2;
      for (size_t i = k; i < m; ++i) y[i] -= f * v[i];
    }
    diag[k] = a[k][k];
  }
  const double dmax = std::max({std::abs(diag[0]), std::abs(diag[1]),
                                std::abs(diag[2])});
  for (double d : diag) {
    if (std::abs(d) <= 1e-10 * dmax) {
      return absl::FailedPreconditionError("rank-deficient sample set");
    }
  }
  std::array<double, kCols> x{};
  for (int k = kCols - 1; k >= 0; --k) {
    double s = y[k];
    for (int j = k + 1; j < kCols; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return ScmCoefficients{x[0] / scale[0], x[1] / scale[1], x[2] / scale[2]};
}

double FitResidual(const ScmCoefficients& c,
                   std::span<const ScmSample> samples) {
  double sum = 0;
  for (const ScmSample& s : samples) {
    const double r = c.a * s.width_bytes +
                     c.b * s.width_bytes * s.capacity_bytes +
                     c.c * s.capacity_bytes - s.energy_fj;
    sum += r * r;
  }
  return sum;
}

std::string EfficiencyCurveCsv(std::span<const EnergyBreakdown> curve) {
  std::string out = absl::StrCat(kEnergyCsvHeader, "\n");
  for (const EnergyBreakdown& e : curve) {
    absl::StrAppendFormat(&out, "%g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          e.vlen_bytes, e.fpu, e.pe, e.l0, e.l1, e.total,
                          e.gflops_per_watt);
  }
  return out;
}

}  // namespace vcluster
