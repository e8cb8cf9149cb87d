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

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <random>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "vcluster/assembler.h"
#include "vcluster/vector_ops.h"

namespace vcluster {
namespace {

constexpr int kLmul = 4;
constexpr int kConvTaps = 7;
constexpr int kTileRows = 4;

// Byte-addressed data image that grows as regions are allocated.
class DataImage {
 public:
  uint64_t Alloc(int64_t bytes) {
    const uint64_t addr = (bytes_.size() + 7) & ~uint64_t{7};
    bytes_.resize(addr + bytes, 0);
    return addr;
  }
  void PutFloat(uint64_t addr, int64_t i, ElementWidth w, double v) {
    StoreFloat(std::span<uint8_t>(bytes_).subspan(addr), static_cast<int>(i),
               w, v);
  }
  void PutWord(uint64_t addr, int64_t i, uint64_t v) {
    std::memcpy(bytes_.data() + addr + 8 * i, &v, 8);
  }
  int64_t size() const { return static_cast<int64_t>(bytes_.size()); }
  std::vector<uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

// Assembly text builder.
class Code {
 public:
  template <typename... Args>
  void operator()(const absl::FormatSpec<Args...>& format,
                  const Args&... args) {
    absl::StrAppend(&text_, "  ", absl::StrFormat(format, args...), "\n");
  }
  void Label(absl::string_view name) { absl::StrAppend(&text_, name, ":\n"); }
  void Pe(int p) { absl::StrAppend(&text_, ".pe ", p, "\n"); }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

std::pair<int64_t, int64_t> Share(int64_t total, int parts, int p) {
  const int64_t base = total / parts, extra = total % parts;
  const int64_t lo = p * base + std::min<int64_t>(p, extra);
  return {lo, lo + base + (p < extra ? 1 : 0)};
}

int64_t VlmaxBytes(const MachineConfig& cfg) {
  return int64_t{kLmul} * cfg.vlen_bytes;
}

ElementWidth WidthOf(int bits) {
  switch (bits) {
    case 8:
      return ElementWidth::kE8;
    case 16:
      return ElementWidth::kE16;
    case 32:
      return ElementWidth::kE32;
    default:
      return ElementWidth::kE64;
  }
}

double Quantize(double v, int bits) {
  if (bits == 16) return DecodeMinifloat(EncodeMinifloat(v, kBinary16), kBinary16);
  if (bits == 8) return DecodeMinifloat(EncodeMinifloat(v, kE5M2), kE5M2);
  return v;
}

// Flag barrier: publish `epoch` in this PE's flag word, then spin until
// every other PE has published at least `epoch`.
void Barrier(Code& c, const MachineConfig& cfg, int p, uint64_t flags,
             int epoch, bool wait = true) {
  c("li t3, %d", epoch);
  c("li t4, %d", flags + 8 * p);
  c("sd t3, 0(t4)");
  if (!wait) return;
  for (int q = 0; q < cfg.num_pes; ++q) {
    if (q == p) continue;
    const std::string label = absl::StrFormat("sync_%d_%d_%d", p, epoch, q);
    c("li t4, %d", flags + 8 * q);
    c.Label(label);
    c("ld t5, 0(t4)");
    c("blt t5, t3, %s", label);
  }
}

struct MatmulLayout {
  uint64_t a, b, c;
};

// C = A B. For w < 64 the B rows are stored pair-interleaved
// (Bp[k/2][2j+t] = B[k+t][j]) and each step consumes two k with one
// sum-of-dot-products against the packed A pair.
absl::StatusOr<KernelImage> GenMatmul(const KernelSpec& s,
                                      const MachineConfig& cfg) {
  const int64_t n = s.n;
  const bool wide = s.kind == KernelKind::kWidMatmul;
  const int w = wide ? s.width : 64;
  const ElementWidth src = WidthOf(w);
  const ElementWidth dst = WidthOf(wide ? 2 * w : 64);
  const int eb = w / 8, db = SewBytes(dst);
  if (wide && n % 2 != 0) {
    return absl::InvalidArgumentError("wid-matmul needs an even n");
  }
  const int64_t need = n * n * (2 * eb + db);
  if (need > cfg.l1_bytes()) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "%s n=%d needs %d bytes, L1 holds %d", KernelName(s), n, need,
        cfg.l1_bytes()));
  }
  DataImage img;
  MatmulLayout m{img.Alloc(n * n * eb), img.Alloc(n * n * eb),
                 img.Alloc(n * n * db)};
  const std::vector<double> data = UniformData(s.seed, 2 * n * n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t k = 0; k < n; ++k) {
      img.PutFloat(m.a, i * n + k, src, Quantize(data[i * n + k], w));
      const double b = Quantize(data[n * n + i * n + k], w);  // B[i][k]
      if (wide) {
        img.PutFloat(m.b, (i / 2) * 2 * n + 2 * k + i % 2, src, b);
      } else {
        img.PutFloat(m.b, i * n + k, src, b);
      }
    }
  }

  // Output columns per vector and the vl that covers them.
  const int64_t cols_max = VlmaxBytes(cfg) / (wide ? 2 * eb : eb);
  const int64_t steps = wide ? n / 2 : n;  // k steps per tile
  const int64_t a_step = wide ? 2 * eb : eb;
  const int64_t b_row = wide ? 2 * n * eb : n * eb;
  const std::string vop = wide ? "vfwmacc-sdotp" : "vfmacc.vf";
  const std::string fload = w == 64 ? "fld" : w == 16 ? "flw" : "flh";
  const char* acc[] = {"v0", "v4", "v8", "v12"};
  const char* fa[] = {"fa0", "fa1", "fa2", "fa3"};

  Code c;
  KernelImage out;
  int64_t bound = 0;
  for (int p = 0; p < cfg.num_pes; ++p) {
    c.Pe(p);
    auto [r_lo, r_hi] = Share(n, cfg.num_pes, p);
    int tile = 0;
    int64_t pe_work = 0;
    for (int64_t r0 = r_lo; r0 < r_hi; r0 += kTileRows) {
      const int rows = static_cast<int>(std::min<int64_t>(kTileRows, r_hi - r0));
      for (int64_t j0 = 0; j0 < n; j0 += cols_max) {
        const int64_t cols = std::min(cols_max, n - j0);
        const int64_t vl = wide ? 2 * cols : cols;
        c("li t2, %d", vl);
        c("vsetvli t0, t2, e%d, m%d", w, kLmul);
        for (int q = 0; q < rows; ++q) c("vslidedown.vi %s, v28, 0", acc[q]);
        c("li a1, %d", m.a + r0 * n * eb);
        c("li a2, %d", m.b + (wide ? 2 * j0 : j0) * eb);
        for (int q = 0; q < rows; ++q) {
          c("%s %s, %d(a1)", fload, fa[q], q * n * eb);
        }
        auto step = [&](bool prefetch) {
          c("vle%d.v v16, (a2)", w);
          for (int q = 0; q < rows; ++q) {
            c("%s %s, %s, v16", vop, acc[q], fa[q]);
          }
          if (!prefetch) return;
          c("addi a1, a1, %d", a_step);
          for (int q = 0; q < rows; ++q) {
            c("%s %s, %d(a1)", fload, fa[q], q * n * eb);
          }
          c("addi a2, a2, %d", b_row);
        };
        if (steps > 1) {
          const std::string label = absl::StrFormat("k_%d_%d", p, tile);
          c("li t1, %d", steps - 1);
          c.Label(label);
          step(true);
          c("addi t1, t1, -1");
          c("bnez t1, %s", label);
        }
        if (steps > 0) step(false);
        if (wide) {
          c("li t2, %d", cols);
          c("vsetvli t0, t2, e%d, m%d", 2 * w, kLmul);
        }
        for (int q = 0; q < rows; ++q) {
          c("li a3, %d", m.c + ((r0 + q) * n + j0) * db);
          c("vse%d.v %s, (a3)", SewBits(dst), acc[q]);
        }
        ++tile;
        const int64_t chunks = (vl * eb + cfg.chunk_bytes() - 1) /
                               cfg.chunk_bytes();
        pe_work += steps * (rows * chunks + 12) + 40 + rows * chunks;
        out.fma_ops += rows * cols * n;
      }
    }
    bound = std::max(bound, pe_work);
  }
  auto prog = ParseProgram(c.text(), cfg);
  if (!prog.ok()) return prog.status();
  out.program = *std::move(prog);
  out.program.data = img.Take();
  out.program.symbols = {{"a", m.a}, {"b", m.b}, {"c", m.c}};
  out.program.cycle_bound = 4 * bound + 1000;
  out.outputs.push_back({"c", m.c, n * n, dst});
  return out;
}

// Valid-region 7x7 convolution producing an n x n output from an
// (n+6) x (n+6) input. Blocks of four output rows share every loaded input
// row; the 49 weights are held in f registers in two batches of columns.
absl::StatusOr<KernelImage> GenConv2d(const KernelSpec& s,
                                      const MachineConfig& cfg) {
  const int64_t n = s.n;
  const int64_t pitch = n + kConvTaps - 1;
  const int64_t need = 8 * (pitch * pitch + n * n + kConvTaps * kConvTaps);
  if (need > cfg.l1_bytes()) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "conv2d n=%d needs %d bytes, L1 holds %d", n, need, cfg.l1_bytes()));
  }
  DataImage img;
  const uint64_t in = img.Alloc(8 * pitch * pitch);
  const uint64_t wt = img.Alloc(8 * kConvTaps * kConvTaps);
  const uint64_t outp = img.Alloc(8 * n * n);
  const std::vector<double> data =
      UniformData(s.seed, pitch * pitch + kConvTaps * kConvTaps);
  for (int64_t i = 0; i < pitch * pitch; ++i) {
    img.PutFloat(in, i, ElementWidth::kE64, data[i]);
  }
  for (int i = 0; i < kConvTaps * kConvTaps; ++i) {
    img.PutFloat(wt, i, ElementWidth::kE64, data[pitch * pitch + i]);
  }

  const int64_t cols_max = VlmaxBytes(cfg) / 8;
  const char* acc[] = {"v0", "v4", "v8", "v12"};
  const char* buf[] = {"v16", "v20", "v24"};
  const int batches[][2] = {{0, 4}, {4, kConvTaps}};
  Code c;
  KernelImage out;
  int64_t bound = 0;
  for (int p = 0; p < cfg.num_pes; ++p) {
    c.Pe(p);
    auto [r_lo, r_hi] = Share(n, cfg.num_pes, p);
    int next_buf = 0;
    int64_t pe_work = 0;
    for (int64_t i0 = r_lo; i0 < r_hi; i0 += kTileRows) {
      const int rows = static_cast<int>(std::min<int64_t>(kTileRows, r_hi - i0));
      for (int64_t j0 = 0; j0 < n; j0 += cols_max) {
        const int64_t vl = std::min(cols_max, n - j0);
        c("li t2, %d", vl);
        c("vsetvli t0, t2, e64, m%d", kLmul);
        for (int q = 0; q < rows; ++q) c("vslidedown.vi %s, v28, 0", acc[q]);
        for (const auto& batch : batches) {
          const int kc0 = batch[0], kc1 = batch[1], span = kc1 - kc0;
          c("li t1, %d", wt);
          for (int kr = 0; kr < kConvTaps; ++kr) {
            for (int kc = kc0; kc < kc1; ++kc) {
              c("fld f%d, %d(t1)", kr * span + kc - kc0,
                8 * (kr * kConvTaps + kc));
            }
          }
          for (int r = 0; r < rows + kConvTaps - 1; ++r) {
            for (int kc = kc0; kc < kc1; ++kc) {
              const char* v = buf[next_buf];
              next_buf = (next_buf + 1) % 3;
              c("li a1, %d", in + 8 * ((i0 + r) * pitch + j0 + kc));
              c("vle64.v %s, (a1)", v);
              for (int q = 0; q < rows; ++q) {
                const int kr = r - q;
                if (kr < 0 || kr >= kConvTaps) continue;
                c("vfmacc.vf %s, f%d, %s", acc[q], kr * span + kc - kc0, v);
              }
            }
          }
        }
        for (int q = 0; q < rows; ++q) {
          c("li a3, %d", outp + 8 * ((i0 + q) * n + j0));
          c("vse64.v %s, (a3)", acc[q]);
        }
        const int64_t chunks = (8 * vl + cfg.chunk_bytes() - 1) /
                               cfg.chunk_bytes();
        pe_work += (rows * 49 + (rows + 6) * 7) * (chunks + 2) + 200;
        out.fma_ops += rows * vl * kConvTaps * kConvTaps;
      }
    }
    bound = std::max(bound, pe_work);
  }
  auto prog = ParseProgram(c.text(), cfg);
  if (!prog.ok()) return prog.status();
  out.program = *std::move(prog);
  out.program.data = img.Take();
  out.program.symbols = {{"in", in}, {"w", wt}, {"out", outp}};
  out.program.cycle_bound = 4 * bound + 1000;
  out.outputs.push_back({"out", outp, n * n, ElementWidth::kE64});
  return out;
}

// Each PE accumulates its share of x*y into v24 with a strip-mined loop and
// reduces it; PE 0 combines the partial sums after a flag barrier.
absl::StatusOr<KernelImage> GenDotp(const KernelSpec& s,
                                    const MachineConfig& cfg) {
  const int64_t n = s.n;
  const int64_t need = 16 * n + 16 * cfg.num_pes + 8;
  if (need > cfg.l1_bytes()) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "dotp n=%d needs %d bytes, L1 holds %d", n, need, cfg.l1_bytes()));
  }
  DataImage img;
  const uint64_t x = img.Alloc(8 * n), y = img.Alloc(8 * n);
  const uint64_t partial = img.Alloc(8 * cfg.num_pes);
  const uint64_t flags = img.Alloc(8 * cfg.num_pes);
  const uint64_t result = img.Alloc(8);
  const std::vector<double> data = UniformData(s.seed, 2 * n);
  for (int64_t i = 0; i < 2 * n; ++i) {
    img.PutFloat(x, i, ElementWidth::kE64, data[i]);
  }
  KernelImage out;
  out.fma_ops = n;
  if (n > 0) {
    Code c;
    const int64_t vlmax = VlmaxBytes(cfg) / 8;
    for (int p = 0; p < cfg.num_pes; ++p) {
      c.Pe(p);
      auto [lo, hi] = Share(n, cfg.num_pes, p);
      c("li t2, %d", vlmax);
      c("vsetvli t0, t2, e64, m%d", kLmul);
      c("vslidedown.vi v24, v28, 0");
      if (hi > lo) {
        const std::string label = absl::StrFormat("strip_%d", p);
        c("li a0, %d", hi - lo);
        c("li a1, %d", x + 8 * lo);
        c("li a2, %d", y + 8 * lo);
        c.Label(label);
        c("vsetvli t0, a0, e64, m%d", kLmul);
        c("vle64.v v0, (a1)");
        c("vle64.v v4, (a2)");
        c("vfmacc.vv v24, v0, v4");
        c("slli t1, t0, 3");
        c("add a1, a1, t1");
        c("add a2, a2, t1");
        c("sub a0, a0, t0");
        c("bnez a0, %s", label);
        c("li t2, %d", vlmax);
        c("vsetvli t0, t2, e64, m%d", kLmul);
      }
      c("vfredsum.vs v8, v24, v28");
      c("li t2, 1");
      c("vsetvli t0, t2, e64, m%d", kLmul);
      c("li a3, %d", partial + 8 * p);
      c("vse64.v v8, (a3)");
      Barrier(c, cfg, p, flags, 1, p == 0);
      if (p == 0) {
        c("li t2, %d", cfg.num_pes);
        c("vsetvli t0, t2, e64, m%d", kLmul);
        c("li a1, %d", partial);
        c("vle64.v v0, (a1)");
        c("vfredsum.vs v4, v0, v28");
        c("li t2, 1");
        c("vsetvli t0, t2, e64, m%d", kLmul);
        c("li a3, %d", result);
        c("vse64.v v4, (a3)");
      }
    }
    auto prog = ParseProgram(c.text(), cfg);
    if (!prog.ok()) return prog.status();
    out.program = *std::move(prog);
  }
  out.program.data = img.Take();
  out.program.symbols = {{"x", x}, {"y", y}, {"partial", partial},
                         {"flags", flags}, {"result", result}};
  out.program.cycle_bound =
      4 * (2 * n / std::max(1, cfg.num_pes * cfg.vlsu_ports) +
           40 * (n / (VlmaxBytes(cfg) / 8) + 1)) +
      2000;
  if (n > 0) out.outputs.push_back({"result", result, 1, ElementWidth::kE64});
  return out;
}

int Log2(int64_t n) { return std::countr_zero(static_cast<uint64_t>(n)); }

uint64_t BitReverse(uint64_t i, int bits) {
  uint64_t r = 0;
  for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
  return r;
}

// Constant-geometry radix-2 decimation in frequency. Every stage pairs
// x[j] with x[j + n/2] (unit-stride loads) and writes the sum and the
// twiddled difference to y[2j] and y[2j+1] (stride-16 stores). The result
// comes out bit-reversed and is put in order by an indexed gather.
absl::StatusOr<KernelImage> GenFft(const KernelSpec& s,
                                   const MachineConfig& cfg) {
  const int64_t n = s.n;
  if (n < 2 || (n & (n - 1)) != 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("fft n must be a power of two >= 2, got %d", n));
  }
  const int stages = Log2(n);
  const int64_t half = n / 2;
  const int64_t need =
      8 * (6 * n + 2 * stages * half + n + 2 * cfg.num_pes);
  if (need > cfg.l1_bytes()) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "fft n=%d needs %d bytes, L1 holds %d", n, need, cfg.l1_bytes()));
  }
  DataImage img;
  uint64_t re[2] = {img.Alloc(8 * n), 0}, im[2] = {img.Alloc(8 * n), 0};
  re[1] = img.Alloc(8 * n);
  im[1] = img.Alloc(8 * n);
  const uint64_t twr = img.Alloc(8 * stages * half);
  const uint64_t twi = img.Alloc(8 * stages * half);
  const uint64_t idx = img.Alloc(8 * n);
  const uint64_t out_re = img.Alloc(8 * n), out_im = img.Alloc(8 * n);
  const uint64_t flags = img.Alloc(8 * cfg.num_pes);
  const std::vector<double> data = UniformData(s.seed, 2 * n);
  for (int64_t i = 0; i < n; ++i) {
    img.PutFloat(re[0], i, ElementWidth::kE64, data[2 * i]);
    img.PutFloat(im[0], i, ElementWidth::kE64, data[2 * i + 1]);
    img.PutWord(idx, i, 8 * BitReverse(i, stages));
  }
  for (int st = 0; st < stages; ++st) {
    for (int64_t j = 0; j < half; ++j) {
      const int64_t e = (j >> st) << st;
      const double ang = -2 * M_PI * static_cast<double>(e) / n;
      img.PutFloat(twr, st * half + j, ElementWidth::kE64, std::cos(ang));
      img.PutFloat(twi, st * half + j, ElementWidth::kE64, std::sin(ang));
    }
  }

  const int64_t vlmax = VlmaxBytes(cfg) / 8;
  Code c;
  KernelImage out;
  for (int p = 0; p < cfg.num_pes; ++p) {
    c.Pe(p);
    auto [lo, hi] = Share(half, cfg.num_pes, p);
    c("li t6, 16");
    for (int st = 0; st < stages; ++st) {
      const int from = st % 2, to = 1 - from;
      for (int64_t j0 = lo; j0 < hi; j0 += vlmax) {
        const int64_t vl = std::min(vlmax, hi - j0);
        c("li t2, %d", vl);
        c("vsetvli t0, t2, e64, m%d", kLmul);
        c("li a1, %d", re[from] + 8 * j0);
        c("vle64.v v0, (a1)");
        c("li a1, %d", im[from] + 8 * j0);
        c("vle64.v v4, (a1)");
        c("li a1, %d", re[from] + 8 * (j0 + half));
        c("vle64.v v8, (a1)");
        c("li a1, %d", im[from] + 8 * (j0 + half));
        c("vle64.v v12, (a1)");
        c("li a1, %d", twr + 8 * (st * half + j0));
        c("vle64.v v16, (a1)");
        c("li a1, %d", twi + 8 * (st * half + j0));
        c("vle64.v v20, (a1)");
        c("vfadd.vv v24, v0, v8");
        c("li a2, %d", re[to] + 16 * j0);
        c("vsse64.v v24, (a2), t6");
        c("vfadd.vv v28, v4, v12");
        c("li a2, %d", im[to] + 16 * j0);
        c("vsse64.v v28, (a2), t6");
        c("vfsub.vv v0, v0, v8");
        c("vfsub.vv v4, v4, v12");
        c("vfmul.vv v8, v0, v16");
        c("vfmul.vv v12, v4, v20");
        c("vfsub.vv v8, v8, v12");
        c("li a2, %d", re[to] + 16 * j0 + 8);
        c("vsse64.v v8, (a2), t6");
        c("vfmul.vv v12, v0, v20");
        c("vfmacc.vv v12, v4, v16");
        c("li a2, %d", im[to] + 16 * j0 + 8);
        c("vsse64.v v12, (a2), t6");
        out.fma_ops += vl;
      }
      Barrier(c, cfg, p, flags, st + 1);
    }
    const int fin = stages % 2;
    auto [olo, ohi] = Share(n, cfg.num_pes, p);
    for (int64_t i0 = olo; i0 < ohi; i0 += vlmax) {
      const int64_t vl = std::min(vlmax, ohi - i0);
      c("li t2, %d", vl);
      c("vsetvli t0, t2, e64, m%d", kLmul);
      c("li a1, %d", idx + 8 * i0);
      c("vle64.v v0, (a1)");
      c("li a1, %d", re[fin]);
      c("vluxei64.v v4, (a1), v0");
      c("li a2, %d", out_re + 8 * i0);
      c("vse64.v v4, (a2)");
      c("li a1, %d", im[fin]);
      c("vluxei64.v v8, (a1), v0");
      c("li a2, %d", out_im + 8 * i0);
      c("vse64.v v8, (a2)");
    }
  }
  auto prog = ParseProgram(c.text(), cfg);
  if (!prog.ok()) return prog.status();
  out.program = *std::move(prog);
  out.program.data = img.Take();
  out.program.symbols = {{"re", re[0]},     {"im", im[0]},   {"twr", twr},
                         {"twi", twi},      {"idx", idx},    {"out_re", out_re},
                         {"out_im", out_im}, {"flags", flags}};
  out.program.cycle_bound =
      4 * (stages * (half / cfg.num_pes / std::max<int64_t>(1, vlmax / 4) *
                         200 +
                     200) +
           n * 4) +
      2000;
  out.outputs.push_back({"out_re", out_re, n, ElementWidth::kE64});
  out.outputs.push_back({"out_im", out_im, n, ElementWidth::kE64});
  return out;
}

}  // namespace

std::vector<double> UniformData(uint64_t seed, size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(count);
  for (double& v : out) {
    v = static_cast<double>(rng() >> 11) * 0x1p-53 * 2 - 1;
  }
  return out;
}

absl::StatusOr<KernelSpec> ParseKernelName(absl::string_view name,
                                           int64_t n) {
  KernelSpec s;
  s.n = n;
  const std::string k = absl::AsciiStrToLower(name);
  if (k == "matmul") {
    s.kind = KernelKind::kMatmul;
  } else if (k == "conv2d") {
    s.kind = KernelKind::kConv2d;
  } else if (k == "dotp") {
    s.kind = KernelKind::kDotp;
  } else if (k == "fft") {
    s.kind = KernelKind::kFft;
  } else if (k == "wid-matmul16" || k == "wid_matmul16") {
    s.kind = KernelKind::kWidMatmul;
    s.width = 16;
  } else if (k == "wid-matmul8" || k == "wid_matmul8") {
    s.kind = KernelKind::kWidMatmul;
    s.width = 8;
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        "unknown kernel '", name,
        "' (expected matmul, wid-matmul16, wid-matmul8, conv2d, dotp, fft)"));
  }
  if (n < 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("n must be non-negative, got %d", n));
  }
  return s;
}

std::string KernelName(const KernelSpec& s) {
  switch (s.kind) {
    case KernelKind::kMatmul:
      return "matmul";
    case KernelKind::kWidMatmul:
      return absl::StrCat("wid-matmul", s.width);
    case KernelKind::kConv2d:
      return "conv2d";
    case KernelKind::kDotp:
      return "dotp";
    case KernelKind::kFft:
      return "fft";
  }
  return "?";
}

absl::StatusOr<KernelImage> GenerateKernel(const KernelSpec& spec,
                                           const MachineConfig& cfg) {
  if (absl::Status st = cfg.Validate(); !st.ok()) return st;
  if (spec.n < 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("n must be non-negative, got %d", spec.n));
  }
  if (spec.kind == KernelKind::kWidMatmul && spec.width != 8 &&
      spec.width != 16) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "wid-matmul width must be 8 or 16, got %d", spec.width));
  }
  if (spec.n == 0 && spec.kind != KernelKind::kDotp) {
    return KernelImage{};
  }
  switch (spec.kind) {
    case KernelKind::kMatmul:
    case KernelKind::kWidMatmul:
      return GenMatmul(spec, cfg);
    case KernelKind::kConv2d:
      return GenConv2d(spec, cfg);
    case KernelKind::kDotp:
      return GenDotp(spec, cfg);
    case KernelKind::kFft:
      return GenFft(spec, cfg);
  }
  return absl::InternalError("unhandled kernel");
}

OracleResult OracleEval(const KernelSpec& s) {
  OracleResult r;
  const int64_t n = s.n;
  if (n <= 0) return r;
  switch (s.kind) {
    case KernelKind::kMatmul: {
      const std::vector<double> d = UniformData(s.seed, 2 * n * n);
      const double* a = d.data();
      const double* b = d.data() + n * n;
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
          double sum = 0, mag = 0;
          for (int64_t k = 0; k < n; ++k) {
            sum += a[i * n + k] * b[k * n + j];
            mag += std::abs(a[i * n + k] * b[k * n + j]);
          }
          r.values.push_back(sum);
          r.scale.push_back(mag);
        }
      }
      break;
    }
    case KernelKind::kWidMatmul: {
      // The accumulator is rounded to 2w bits after every pair of products.
      const std::vector<double> d = UniformData(s.seed, 2 * n * n);
      const int w = s.width;
      auto q = [&](double v) { return Quantize(v, w); };
      auto round_acc = [&](double v) {
        return w == 16 ? static_cast<double>(static_cast<float>(v))
                       : DecodeMinifloat(EncodeMinifloat(v, kBinary16),
                                         kBinary16);
      };
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
          double acc = 0, mag = 0;
          for (int64_t k = 0; k < n; k += 2) {
            const double a0 = q(d[i * n + k]), a1 = q(d[i * n + k + 1]);
            const double b0 = q(d[n * n + k * n + j]);
            const double b1 = q(d[n * n + (k + 1) * n + j]);
            acc = round_acc(a0 * b0 + a1 * b1 + acc);
            mag += std::abs(a0 * b0) + std::abs(a1 * b1);
          }
          r.values.push_back(acc);
          r.scale.push_back(mag);
        }
      }
      break;
    }
    case KernelKind::kConv2d: {
      const int64_t pitch = n + kConvTaps - 1;
      const std::vector<double> d =
          UniformData(s.seed, pitch * pitch + kConvTaps * kConvTaps);
      const double* w = d.data() + pitch * pitch;
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
          double sum = 0, mag = 0;
          for (int kr = 0; kr < kConvTaps; ++kr) {
            for (int kc = 0; kc < kConvTaps; ++kc) {
              const double t =
                  d[(i + kr) * pitch + j + kc] * w[kr * kConvTaps + kc];
              sum += t;
              mag += std::abs(t);
            }
          }
          r.values.push_back(sum);
          r.scale.push_back(mag);
        }
      }
      break;
    }
    case KernelKind::kDotp: {
      const std::vector<double> d = UniformData(s.seed, 2 * n);
      double sum = 0, mag = 0;
      for (int64_t i = 0; i < n; ++i) {
        sum += d[i] * d[n + i];
        mag += std::abs(d[i] * d[n + i]);
      }
      r.values.push_back(sum);
      r.scale.push_back(mag);
      break;
    }
    case KernelKind::kFft: {
      // Naive DFT; errors are judged against the largest output magnitude.
      const std::vector<double> d = UniformData(s.seed, 2 * n);
      std::vector<std::complex<double>> x(n), y(n);
      for (int64_t i = 0; i < n; ++i) x[i] = {d[2 * i], d[2 * i + 1]};
      double peak = 0;
      for (int64_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0;
        for (int64_t t = 0; t < n; ++t) {
          const double ang = -2 * M_PI * static_cast<double>((k * t) % n) / n;
          acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        y[k] = acc;
        peak = std::max({peak, std::abs(acc.real()), std::abs(acc.imag())});
      }
      for (int64_t k = 0; k < n; ++k) r.values.push_back(y[k].real());
      for (int64_t k = 0; k < n; ++k) r.values.push_back(y[k].imag());
      r.scale.assign(2 * n, peak);
      break;
    }
  }
  return r;
}

Validation CompareOutputs(const KernelSpec& spec, const KernelImage& image,
                          const std::vector<uint8_t>& memory,
                          const OracleResult& oracle) {
  Validation v;
  v.tolerance = spec.kind == KernelKind::kFft ? 1e-9 : 1e-10;
  std::vector<double> got;
  for (const OutputRegion& o : image.outputs) {
    const uint64_t end = o.addr + o.count * SewBytes(o.width);
    if (end > memory.size()) {
      v.message = absl::StrCat("output region ", o.name, " outside memory");
      return v;
    }
    std::span<const uint8_t> bytes(memory.data() + o.addr, end - o.addr);
    for (int64_t i = 0; i < o.count; ++i) {
      got.push_back(LoadFloat(bytes, static_cast<int>(i), o.width));
    }
  }
  if (got.size() != oracle.values.size()) {
    v.message = absl::StrFormat("%d outputs, oracle has %d", got.size(),
                                oracle.values.size());
    return v;
  }
  for (size_t i = 0; i < got.size(); ++i) {
    const double want = oracle.values[i];
    const double denom =
        std::max({std::abs(want), oracle.scale[i], 1e-300});
    const double err = std::abs(got[i] - want) / denom;
    const bool bad = !(err <= v.tolerance);
    if (bad && v.first_bad < 0) {
      v.first_bad = static_cast<int64_t>(i);
      v.message = absl::StrFormat("element %d: got %.17g, expected %.17g", i,
                                  got[i], want);
    }
    if (!(err <= v.max_error)) v.max_error = err;
  }
  v.checked = static_cast<int64_t>(got.size());
  v.pass = v.first_bad < 0;
  if (v.pass) {
    v.message = absl::StrFormat("%d elements within %g", v.checked,
                                v.tolerance);
  }
  return v;
}

absl::StatusOr<KernelRun> RunAndValidate(const KernelSpec& spec,
                                         const MachineConfig& cfg,
                                         const SimOptions& opts) {
  auto image = GenerateKernel(spec, cfg);
  if (!image.ok()) return image.status();
  auto sim = Simulate(image->program, cfg, opts);
  if (!sim.ok()) return sim.status();
  KernelRun run;
  run.validation =
      CompareOutputs(spec, *image, sim->memory, OracleEval(spec));
  run.image = *std::move(image);
  run.sim = *std::move(sim);
  return run;
}

}  // namespace vcluster
