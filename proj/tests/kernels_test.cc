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


#include "vcluster/kernels.h"

#include <complex>
#include <cstring>
#include <vector>

#include "Eigen/Dense"
#include "gtest/gtest.h"
#include "vcluster/assembler.h"

namespace vcluster {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                          Eigen::RowMajor>;

double Word(const std::vector<uint8_t>& mem, uint64_t addr) {
  double v;
  std::memcpy(&v, mem.data() + addr, 8);
  return v;
}

Mat ReadMatrix(const std::vector<uint8_t>& mem, uint64_t addr, int64_t n) {
  Mat m(n, n);
  for (int64_t i = 0; i < n * n; ++i) m.data()[i] = Word(mem, addr + 8 * i);
  return m;
}

KernelRun MustRun(const KernelSpec& spec, const MachineConfig& cfg = {}) {
  auto r = RunAndValidate(spec, cfg);
  EXPECT_TRUE(r.ok()) << r.status();
  return *std::move(r);
}

std::vector<std::complex<double>> Fft(std::vector<std::complex<double>> x) {
  const size_t n = x.size();
  if (n == 1) return x;
  std::vector<std::complex<double>> even(n / 2), odd(n / 2);
  for (size_t i = 0; i < n / 2; ++i) {
    even[i] = x[2 * i];
    odd[i] = x[2 * i + 1];
  }
  even = Fft(even);
  odd = Fft(odd);
  for (size_t k = 0; k < n / 2; ++k) {
    const auto t = std::polar(1.0, -2 * M_PI * k / n) * odd[k];
    x[k] = even[k] + t;
    x[k + n / 2] = even[k] - t;
  }
  return x;
}

TEST(KernelsTest, MatmulMatchesEigenProduct) {
  KernelSpec s{KernelKind::kMatmul, 12};
  KernelRun r = MustRun(s);
  EXPECT_TRUE(r.validation.pass) << r.validation.message;
  const auto& data = r.image.program.data;
  Mat want = ReadMatrix(data, 0, 12) * ReadMatrix(data, 8 * 144, 12);
  Mat got = ReadMatrix(r.sim.memory, r.image.outputs[0].addr, 12);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KernelsTest, Conv2dMatchesDirectSum) {
  const int n = 8, pitch = n + 6;
  KernelRun r = MustRun({KernelKind::kConv2d, n});
  EXPECT_TRUE(r.validation.pass) << r.validation.message;
  const auto& data = r.image.program.data;
  const uint64_t w = 8 * pitch * pitch;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double sum = 0;
      for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b)
          sum += Word(data, 8 * ((i + a) * pitch + j + b)) *
                 Word(data, w + 8 * (a * 7 + b));
      EXPECT_NEAR(Word(r.sim.memory, r.image.outputs[0].addr + 8 * (i * n + j)),
                  sum, 1e-12);
    }
  }
}

TEST(KernelsTest, DotpMatchesEigenDot) {
  const int n = 200;
  KernelRun r = MustRun({KernelKind::kDotp, n});
  EXPECT_TRUE(r.validation.pass) << r.validation.message;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = Word(r.image.program.data, 8 * i);
    y[i] = Word(r.image.program.data, 8 * (n + i));
  }
  EXPECT_NEAR(Word(r.sim.memory, r.image.outputs[0].addr), x.dot(y), 1e-12);
}

TEST(KernelsTest, FftMatchesRecursiveTransform) {
  const int n = 64;
  KernelRun r = MustRun({KernelKind::kFft, n});
  EXPECT_TRUE(r.validation.pass) << r.validation.message;
  std::vector<std::complex<double>> x(n);
  for (int i = 0; i < n; ++i)
    x[i] = {Word(r.image.program.data, 8 * i),
            Word(r.image.program.data, 8 * (n + i))};
  const auto y = Fft(x);
  for (int k = 0; k < n; ++k) {
    EXPECT_NEAR(Word(r.sim.memory, r.image.outputs[0].addr + 8 * k),
                y[k].real(), 1e-12);
    EXPECT_NEAR(Word(r.sim.memory, r.image.outputs[1].addr + 8 * k),
                y[k].imag(), 1e-12);
  }
}

TEST(KernelsTest, EveryKernelValidatesAcrossConfigs) {
  const char* names[] = {"matmul", "wid-matmul16", "wid-matmul8",
                         "conv2d", "dotp",         "fft"};
  const int sizes[] = {8, 16, 16, 8, 100, 32};
  MachineConfig configs[3];
  configs[1].num_pes = 4;
  configs[2].fpus_per_pe = 2;
  configs[2].vlen_bytes = 128;
  for (const MachineConfig& cfg : configs) {
    for (int i = 0; i < 6; ++i) {
      auto spec = ParseKernelName(names[i], sizes[i]);
      ASSERT_TRUE(spec.ok());
      KernelRun r = MustRun(*spec, cfg);
      EXPECT_TRUE(r.validation.pass)
          << names[i] << " C=" << cfg.num_pes << " F=" << cfg.fpus_per_pe
          << ": " << r.validation.message;
      EXPECT_EQ(r.sim.report.chaining_violations, 0) << names[i];
    }
  }
}

TEST(KernelsTest, CorruptedOutputIsRejected) {
  KernelSpec s{KernelKind::kMatmul, 8};
  KernelRun r = MustRun(s);
  std::vector<uint8_t> mem = r.sim.memory;
  const uint64_t addr = r.image.outputs[0].addr + 8 * 5;
  const double bad = Word(mem, addr) + 1e-6;
  std::memcpy(mem.data() + addr, &bad, 8);
  Validation v = CompareOutputs(s, r.image, mem, OracleEval(s));
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.first_bad, 5);
}

TEST(KernelsTest, ZeroSizeGivesEmptyProgram) {
  for (const char* name : {"matmul", "conv2d", "fft"}) {
    auto spec = ParseKernelName(name, 0);
    ASSERT_TRUE(spec.ok());
    auto img = GenerateKernel(*spec, MachineConfig::Default());
    ASSERT_TRUE(img.ok()) << img.status();
    for (const auto& pe : img->program.pes) EXPECT_TRUE(pe.code.empty());
    EXPECT_EQ(img->fma_ops, 0);
  }
}

TEST(KernelsTest, OversizedProblemIsRejected) {
  auto img = GenerateKernel({KernelKind::kMatmul, 512}, MachineConfig::Default());
  EXPECT_EQ(img.status().code(), absl::StatusCode::kResourceExhausted);
}

TEST(KernelsTest, UnknownNameAndNegativeSize) {
  EXPECT_FALSE(ParseKernelName("gemv", 8).ok());
  EXPECT_FALSE(ParseKernelName("matmul", -1).ok());
  auto s = ParseKernelName("wid-matmul8", 32);
  ASSERT_TRUE(s.ok());
  EXPECT_EQ(s->width, 8);
  EXPECT_EQ(KernelName(*s), "wid-matmul8");
}

TEST(KernelsTest, MatmulInnerLoopIsOneLoadAndFourFmas) {
  auto img = GenerateKernel({KernelKind::kMatmul, 16}, MachineConfig::Default());
  ASSERT_TRUE(img.ok());
  const std::string text = PrintProgram(img->program);
  size_t loads = 0, fmas = 0;
  for (size_t p = 0; (p = text.find("vle64.v", p)) != std::string::npos; ++p)
    ++loads;
  for (size_t p = 0; (p = text.find("vfmacc.vf", p)) != std::string::npos; ++p)
    ++fmas;
  EXPECT_GT(loads, 0u);
  EXPECT_EQ(fmas, 4 * loads);
}

TEST(KernelsTest, MatmulUtilizationGrowsWithSize) {
  double last = 0;
  for (int n : {16, 32, 64}) {
    KernelRun r = MustRun({KernelKind::kMatmul, n});
    EXPECT_GE(r.sim.report.utilization, last) << n;
    last = r.sim.report.utilization;
  }
  EXPECT_GT(last, 0.9);
}

TEST(KernelsTest, DotpIsMemoryBound) {
  KernelRun r = MustRun({KernelKind::kDotp, 1024});
  EXPECT_LT(r.sim.report.utilization, 0.7);
  EXPECT_GT(r.sim.report.vlsu_busy, r.sim.report.vau_busy);
}

TEST(KernelsTest, RunsAreDeterministic) {
  KernelSpec s{KernelKind::kFft, 32};
  KernelRun a = MustRun(s), b = MustRun(s);
  EXPECT_EQ(a.sim.report, b.sim.report);
  EXPECT_EQ(a.sim.memory, b.sim.memory);
}

}  // namespace
}  // namespace vcluster
