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


#ifndef VCLUSTER_KERNELS_H_
#define VCLUSTER_KERNELS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "vcluster/cluster.h"
#include "vcluster/isa.h"
#include "vcluster/machine_config.h"

namespace vcluster {

enum class KernelKind : uint8_t { kMatmul, kWidMatmul, kConv2d, kDotp, kFft };

inline constexpr uint64_t kDefaultSeed = 0x9e3779b97f4a7c15ULL;

struct KernelSpec {
  KernelKind kind = KernelKind::kMatmul;
  int64_t n = 64;
  int width = 64;  // source element width; 16 or 8 for kWidMatmul
  uint64_t seed = kDefaultSeed;
};

// "matmul", "wid-matmul16", "wid-matmul8", "conv2d", "dotp", "fft".
absl::StatusOr<KernelSpec> ParseKernelName(absl::string_view name,
                                           int64_t n = 64);
std::string KernelName(const KernelSpec& spec);

// Reproducible doubles in [-1, 1): (x >> 11) * 2^-53 * 2 - 1 over the
// mt19937_64 stream seeded with `seed`.
std::vector<double> UniformData(uint64_t seed, size_t count);

// A contiguous output array in L1. Values are floats of `width` bits
// (e16 is binary16).
struct OutputRegion {
  std::string name;
  uint64_t addr = 0;
  int64_t count = 0;
  ElementWidth width = ElementWidth::kE64;
};

struct KernelImage {
  Program program;
  std::vector<OutputRegion> outputs;
  int64_t fma_ops = 0;  // element FMAs the schedule performs
};

// Work is split row-wise (element-wise for dotp and fft) across the PEs.
// Matrix kernels use LMUL 4.
absl::StatusOr<KernelImage> GenerateKernel(const KernelSpec& spec,
                                           const MachineConfig& cfg);

// Reference outputs, concatenated over the output regions, and a per-element
// magnitude (sum of |term|) for accumulation-order tolerant comparison.
struct OracleResult {
  std::vector<double> values;
  std::vector<double> scale;
};
OracleResult OracleEval(const KernelSpec& spec);

struct Validation {
  bool pass = false;
  int64_t checked = 0;
  int64_t first_bad = -1;
  double max_error = 0;  // largest normalized error seen
  double tolerance = 0;
  std::string message;
};

// Reads the outputs of `image` from `memory` and compares them to `oracle`.
Validation CompareOutputs(const KernelSpec& spec, const KernelImage& image,
                          const std::vector<uint8_t>& memory,
                          const OracleResult& oracle);

struct KernelRun {
  KernelImage image;
  SimResult sim;
  Validation validation;
};

absl::StatusOr<KernelRun> RunAndValidate(const KernelSpec& spec,
                                         const MachineConfig& cfg,
                                         const SimOptions& opts = {});

}  // namespace vcluster

#endif  // VCLUSTER_KERNELS_H_
