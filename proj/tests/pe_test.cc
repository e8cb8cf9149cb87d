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


#include "vcluster/pe.h"

#include <cstring>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "vcluster/assembler.h"
#include "vcluster/cluster.h"
#include "vcluster/vector_ops.h"

namespace vcluster {
namespace {

SimResult RunText(const std::string& text, MachineConfig cfg = {}) {
  auto p = ParseProgram(text, cfg);
  EXPECT_TRUE(p.ok()) << p.status();
  auto r = Simulate(*p, cfg);
  EXPECT_TRUE(r.ok()) << r.status();
  return *std::move(r);
}

double At(const SimResult& r, uint64_t addr) {
  double v;
  std::memcpy(&v, r.memory.data() + addr, 8);
  return v;
}

const InstrRecord& Find(const SimResult& r, Opcode op, int nth = 0) {
  for (const InstrRecord& h : r.history[0]) {
    if (h.op == op && nth-- == 0) return h;
  }
  static const InstrRecord kNone;
  ADD_FAILURE() << "instruction not found";
  return kNone;
}

TEST(PeTimingTest, SingleFmaHoldsVauEightCycles) {
  SimResult r = RunText(R"(
    li a0, 32
    vsetvli t0, a0, e64, m4
    vfmacc.vv v8, v4, v0
  )");
  const InstrRecord& h = Find(r, Opcode::kVfmaccVV);
  EXPECT_EQ(h.vau_cycles, 8);
  EXPECT_EQ(r.report.vau_busy, 8);
  EXPECT_EQ(h.last_op - h.first_op + 1, 8);
  EXPECT_EQ(h.completed - h.last_op, 4);  // FMA pipeline drain
  EXPECT_EQ(h.first_op - h.accepted, 2);
}

TEST(PeTimingTest, BackToBackFmasKeepVauBusy) {
  SimResult r = RunText(R"(
    li a0, 32
    vsetvli t0, a0, e64, m4
    vfmacc.vv v8, v4, v0
    addi a1, a1, 1
    vfmacc.vv v12, v4, v0
    vfmacc.vv v16, v4, v0
  )");
  const InstrRecord& a = Find(r, Opcode::kVfmaccVV, 0);
  const InstrRecord& b = Find(r, Opcode::kVfmaccVV, 1);
  const InstrRecord& c = Find(r, Opcode::kVfmaccVV, 2);
  EXPECT_EQ(b.first_op, a.last_op + 1);
  EXPECT_EQ(c.first_op, b.last_op + 1);
  EXPECT_EQ(r.report.vau_busy, 24);
}

TEST(PeTimingTest, AddChainsOnLoadChunks) {
  SimResult r = RunText(R"(
    .data
    x: .double 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16
    .text
    li a0, 16
    vsetvli t0, a0, e64, m4
    la a1, x
    vle64.v v0, (a1)
    vfadd.vv v8, v0, v0
  )");
  const InstrRecord& ld = Find(r, Opcode::kVle);
  const InstrRecord& add = Find(r, Opcode::kVfaddVV);
  EXPECT_EQ(add.accepted, ld.accepted + 1);
  EXPECT_LT(add.first_op, ld.completed);
  EXPECT_EQ(r.report.chaining_violations, 0);
  EXPECT_GT(r.report.chaining_checks, 0);
}

TEST(PeTimingTest, EmptyProgram) {
  SimResult r = RunText("");
  EXPECT_EQ(r.report.cycles, 0);
  EXPECT_EQ(r.report.vau_busy + r.report.vlsu_busy + r.report.vsldu_busy, 0);
  EXPECT_EQ(r.report.utilization, 0);
}

TEST(PeTimingTest, ScalarAddDoesNotDisturbVectorStream) {
  const std::string head = "li a0, 32\nvsetvli t0, a0, e64, m4\n";
  SimResult plain = RunText(head + "vfmacc.vv v8, v4, v0\nvfmacc.vv v12, v4, v0\n");
  SimResult mixed =
      RunText(head + "vfmacc.vv v8, v4, v0\nadd a1, a2, a3\nvfmacc.vv v12, v4, v0\n");
  EXPECT_EQ(Find(plain, Opcode::kVfmaccVV, 1).first_op,
            Find(mixed, Opcode::kVfmaccVV, 1).first_op);
  EXPECT_EQ(plain.report.vau_busy, mixed.report.vau_busy);
}

TEST(PeTimingTest, ScalarLoadWaitsForVectorStore) {
  SimResult r = RunText(R"(
    .data
    x: .zero 256
    y: .double 7
    .text
    li a0, 32
    vsetvli t0, a0, e64, m4
    la a1, x
    la a2, y
    vse64.v v0, (a1)
    fld fa0, 0(a2)
    vfmul.vf v8, v8, fa0
  )");
  const InstrRecord& st = Find(r, Opcode::kVse);
  const InstrRecord& mul = Find(r, Opcode::kVfmulVF);
  EXPECT_GT(mul.accepted, st.completed);
}

TEST(PeVlsuTest, UnitStrideLoadNeedsEightRequestCycles) {
  std::string data = ".data\nx: .double ";
  for (int i = 0; i < 32; ++i) data += (i ? ", " : "") + std::to_string(i);
  SimResult r = RunText(data + R"(
    .text
    li a0, 32
    vsetvli t0, a0, e64, m4
    la a1, x
    vle64.v v0, (a1)
    la a2, x
    addi a2, a2, 256
    vse64.v v0, (a2)
  )");
  const InstrRecord& ld = Find(r, Opcode::kVle);
  EXPECT_GE(ld.completed - ld.first_op + 1, 8);
  EXPECT_EQ(r.report.l1_conflicts, 0);
  for (int i = 0; i < 32; ++i) EXPECT_EQ(At(r, 256 + 8 * i), i);
}

TEST(PeVlsuTest, ZeroStrideReadsOneWord) {
  SimResult r = RunText(R"(
    .data
    x: .double 3.5, 1, 1, 1
    out: .zero 128
    .text
    li a0, 16
    vsetvli t0, a0, e64, m4
    la a1, x
    li a2, 0
    vlse64.v v0, (a1), a2
    la a3, out
    vse64.v v0, (a3)
  )");
  for (int i = 0; i < 16; ++i) EXPECT_EQ(At(r, 32 + 8 * i), 3.5);
  EXPECT_GT(r.report.l1_conflicts, 0);  // four ports on one bank
}

TEST(PeVlsuTest, StridedLoad) {
  std::string data = ".data\nx: .double ";
  for (int i = 0; i < 64; ++i) data += (i ? ", " : "") + std::to_string(i);
  SimResult r = RunText(data + R"(
    out: .zero 64
    .text
    li a0, 8
    vsetvli t0, a0, e64, m1
    la a1, x
    li a2, 24
    vlse64.v v0, (a1), a2
    la a3, out
    vse64.v v0, (a3)
  )");
  for (int i = 0; i < 8; ++i) EXPECT_EQ(At(r, 512 + 8 * i), 3 * i);
}

TEST(PeVlsuTest, IndexedSameBankSerializesInOrder) {
  // Every index is a multiple of 16 words, so all requests hit bank 0.
  std::string data = ".data\nx: .double ";
  for (int i = 0; i < 128; ++i) data += (i ? ", " : "") + std::to_string(i);
  data += "\nidx: .dword ";
  for (int i = 0; i < 8; ++i) data += (i ? ", " : "") + std::to_string(128 * (7 - i));
  SimResult r = RunText(data + R"(
    out: .zero 64
    .text
    li a0, 8
    vsetvli t0, a0, e64, m1
    la a1, idx
    vle64.v v4, (a1)
    la a2, x
    vluxei64.v v0, (a2), v4
    la a3, out
    vse64.v v0, (a3)
  )");
  for (int i = 0; i < 8; ++i) EXPECT_EQ(At(r, 1088 + 8 * i), 16 * (7 - i));
  EXPECT_GE(r.report.l1_conflicts, 6);
}

TEST(PeVlsuTest, OutOfRangeAccessFaults) {
  auto p = ParseProgram(R"(
    li a0, 4
    vsetvli t0, a0, e64, m1
    li a1, 200000
    vle64.v v0, (a1)
  )");
  ASSERT_TRUE(p.ok());
  auto r = Simulate(*p, MachineConfig::Default());
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.status().message().find("pc 3"), std::string::npos)
      << r.status();
  EXPECT_NE(r.status().message().find("0x30d40"), std::string::npos)
      << r.status();
}

std::string SlideProgram(const std::string& op, int vl) {
  std::string src = ".data\nx: .double ";
  for (int i = 0; i < vl; ++i) src += (i ? ", " : "") + std::to_string(i + 1);
  src += "\nout: .zero " + std::to_string(8 * vl) + "\n.text\n";
  src += "li a0, " + std::to_string(vl) + "\n";
  src += "vsetvli t0, a0, e64, m4\nla a1, x\nvle64.v v0, (a1)\n";
  src += op + "\nla a2, out\nvse64.v v8, (a2)\n";
  return src;
}

TEST(PeSlideTest, SlideDownByOneZeroFills) {
  SimResult r = RunText(SlideProgram("vslidedown.vi v8, v0, 1", 4));
  EXPECT_EQ(At(r, 32), 2);
  EXPECT_EQ(At(r, 40), 3);
  EXPECT_EQ(At(r, 48), 4);
  EXPECT_EQ(At(r, 56), 0);
}

TEST(PeSlideTest, SlideByZeroCopies) {
  SimResult r = RunText(SlideProgram("vslidedown.vi v8, v0, 0", 16));
  for (int i = 0; i < 16; ++i) EXPECT_EQ(At(r, 128 + 8 * i), i + 1);
}

TEST(PeSlideTest, SlideByOneChunkShiftsChunks) {
  // Four f64 elements fill one 32-byte chunk.
  SimResult r = RunText(SlideProgram("vslidedown.vi v8, v0, 4", 16));
  for (int i = 0; i < 12; ++i) EXPECT_EQ(At(r, 128 + 8 * i), i + 5);
  for (int i = 12; i < 16; ++i) EXPECT_EQ(At(r, 128 + 8 * i), 0);
}

TEST(PeSlideTest, SlideUpKeepsLowElements) {
  SimResult r = RunText(SlideProgram(
      "vslidedown.vi v8, v0, 0\nvslideup.vi v8, v0, 3", 8));
  const double want[] = {1, 2, 3, 1, 2, 3, 4, 5};
  for (int i = 0; i < 8; ++i) EXPECT_EQ(At(r, 64 + 8 * i), want[i]);
}

TEST(PeArithTest, Reduction) {
  SimResult r = RunText(R"(
    .data
    x: .double 1, 2, 3, 4
    s: .double 0
    .text
    li a0, 4
    vsetvli t0, a0, e64, m1
    la a1, x
    vle64.v v0, (a1)
    vfredsum.vs v4, v0, v8
    li a0, 1
    vsetvli t0, a0, e64, m1
    la a2, s
    vse64.v v4, (a2)
  )");
  EXPECT_EQ(At(r, 32), 10);
}

TEST(PeArithTest, FmaElementwise) {
  std::vector<uint8_t> a(16), b(16), d(16), out(16);
  StoreFloat(a, 0, ElementWidth::kE64, 1);
  StoreFloat(a, 1, ElementWidth::kE64, 2);
  StoreFloat(b, 0, ElementWidth::kE64, 3);
  StoreFloat(b, 1, ElementWidth::kE64, 4);
  StoreFloat(d, 0, ElementWidth::kE64, 10);
  StoreFloat(d, 1, ElementWidth::kE64, 10);
  ArithOperands in{a, b, d, 0};
  auto n = ExecuteArith(Opcode::kVfmaccVV, ElementWidth::kE64, 2, in, out);
  ASSERT_TRUE(n.ok());
  EXPECT_EQ(*n, 16);
  EXPECT_EQ(LoadFloat(out, 0, ElementWidth::kE64), 13);
  EXPECT_EQ(LoadFloat(out, 1, ElementWidth::kE64), 18);
}

TEST(PeArithTest, WideningSdotp) {
  std::vector<uint8_t> a(4), b(4), e(4), out(4);
  for (int i = 0; i < 2; ++i) {
    StoreFloat(a, i, ElementWidth::kE16, 1);
    StoreFloat(b, i, ElementWidth::kE16, 1);
  }
  StoreFloat(e, 0, ElementWidth::kE32, 2);
  ArithOperands in{a, b, e, 0};
  auto n =
      ExecuteArith(Opcode::kVfwmaccSdotpVV, ElementWidth::kE16, 2, in, out);
  ASSERT_TRUE(n.ok()) << n.status();
  EXPECT_EQ(LoadFloat(out, 0, ElementWidth::kE32), 4.0);
}

TEST(PeArithTest, UnsupportedWidthFaults) {
  auto p = ParseProgram(R"(
    li a0, 4
    vsetvli t0, a0, e16, m1
    vfadd.vv v0, v1, v2
  )");
  ASSERT_TRUE(p.ok());
  auto r = Simulate(*p, MachineConfig::Default());
  EXPECT_FALSE(r.ok());
}

TEST(PeDeterminismTest, RepeatedRunsMatch) {
  const std::string src = SlideProgram(
      "vfmacc.vv v8, v0, v0\nvslidedown.vi v12, v8, 5\nvfadd.vv v8, v12, v0", 32);
  SimResult a = RunText(src);
  SimResult b = RunText(src);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.memory, b.memory);
}

}  // namespace
}  // namespace vcluster
