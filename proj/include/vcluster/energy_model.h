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

#ifndef VCLUSTER_ENERGY_MODEL_H_
#define VCLUSTER_ENERGY_MODEL_H_

namespace vcluster {

// energy(W, K) = a*W + b*W*K + c*K femtojoules, for an access of W bytes to
// a latch-based memory of capacity K bytes.
struct ScmCoefficients {
  double a = 0;
  double b = 0;
  double c = 0;
};

struct ScmEnergyModel {
  ScmCoefficients read{47.7588, 0.001792, 0.27497};
  ScmCoefficients write{72.0772, 0.005721, 3.11102};

  // Coefficients that reproduce the published cluster-level energy figures.
  static ScmEnergyModel Reconciled() { return {}; }
  // The rounded coefficients as typeset next to the read/write formulas.
  // The read WK term is ten times the reconciled one.
  static ScmEnergyModel Printed() {
    return {{47.759, 0.018, 0.275}, {72.077, 0.006, 3.111}};
  }
};

// Per-access energy of one 8-byte word of an 8 KiB single-port SRAM bank.
struct L1EnergyModel {
  double read_pj = 4.63;
  double write_pj = 5.77;
};

enum class EnergyProfile {
  kModel,     // 13.31 pJ per FMA
  kMeasured,  // 18.1 pJ per FMA
};

inline double FpuEnergyPerFma(EnergyProfile p) {
  return p == EnergyProfile::kModel ? 13.31 : 18.1;
}

// Fetch, decode and dispatch of one instruction by the scalar core.
inline constexpr double kPeEnergyPerInstrPj = 3.1;

}  // namespace vcluster

#endif  // VCLUSTER_ENERGY_MODEL_H_
