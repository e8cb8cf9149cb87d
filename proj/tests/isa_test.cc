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


#include "vcluster/isa.h"

#include <random>
#include <set>

#include "gtest/gtest.h"
#include "vcluster/assembler.h"

namespace vcluster {
namespace {

TEST(VsetvliTest, ClampsToVlmax) {
  MachineConfig cfg;
  CsrState csr;
  EXPECT_EQ(ApplyVsetvli(1000, ElementWidth::kE64, Lmul::kM4, cfg, &csr), 32);
  EXPECT_EQ(csr.vl, 32);
  EXPECT_EQ(csr.vtype.lmul, Lmul::kM4);
  EXPECT_EQ(ApplyVsetvli(0, ElementWidth::kE64, Lmul::kM4, cfg, &csr), 0);
  EXPECT_EQ(ApplyVsetvli(16, ElementWidth::kE64, Lmul::kM4, cfg, &csr), 16);
}

TEST(VsetvliTest, VlmaxLaw) {
  for (int vlen : {16, 32, 64, 128, 256}) {
    MachineConfig cfg;
    cfg.vlen_bytes = vlen;
    for (ElementWidth sew : {ElementWidth::kE8, ElementWidth::kE16,
                             ElementWidth::kE32, ElementWidth::kE64}) {
      for (Lmul l : {Lmul::kM1, Lmul::kM2, Lmul::kM4, Lmul::kM8}) {
        const int64_t vlmax = LmulValue(l) * vlen / SewBytes(sew);
        EXPECT_EQ(Vlmax({sew, l}, cfg), vlmax);
        for (int64_t k : {0, 1, 7, 1000}) {
          CsrState csr;
          EXPECT_EQ(ApplyVsetvli(vlmax + k, sew, l, cfg, &csr), vlmax);
        }
      }
    }
  }
}

TEST(RegisterGroupTest, Basics) {
  EXPECT_EQ(*RegisterGroup(8, Lmul::kM4), (std::vector<int>{8, 9, 10, 11}));
  EXPECT_EQ(*RegisterGroup(0, Lmul::kM1), (std::vector<int>{0}));
  EXPECT_FALSE(RegisterGroup(6, Lmul::kM4).ok());
  EXPECT_FALSE(RegisterGroup(32, Lmul::kM1).ok());
}

TEST(RegisterGroupTest, AlignedGroupsDisjoint) {
  for (Lmul l : {Lmul::kM1, Lmul::kM2, Lmul::kM4, Lmul::kM8}) {
    std::set<int> seen;
    for (int b = 0; b < 32; b += LmulValue(l)) {
      auto group = RegisterGroup(b, l);
      ASSERT_TRUE(group.ok());
      for (int r : *group) EXPECT_TRUE(seen.insert(r).second);
    }
    EXPECT_EQ(seen.size(), 32u);
  }
}

TEST(ParseTest, FmaOperands) {
  auto p = ParseProgram("vfmacc.vv v8, v4, v0\n");
  ASSERT_TRUE(p.ok()) << p.status();
  const Instruction& in = p->pes[0].code[0];
  EXPECT_EQ(in.op, Opcode::kVfmaccVV);
  EXPECT_EQ(ClassOf(in.op), InstrClass::kFma);
  EXPECT_EQ(in.vd, 8);
  EXPECT_EQ(in.VectorSources(), (std::vector<int>{4, 0, 8}));
}

TEST(ParseTest, Vsetvli) {
  auto p = ParseProgram("vsetvli t0, a0, e64, m4\n");
  ASSERT_TRUE(p.ok()) << p.status();
  const Instruction& in = p->pes[0].code[0];
  EXPECT_EQ(in.op, Opcode::kVsetvli);
  EXPECT_EQ(in.eew, ElementWidth::kE64);
  EXPECT_EQ(in.lmul, Lmul::kM4);
}

TEST(ParseTest, Errors) {
  struct Case {
    const char* text;
    const char* needle;
  };
  for (const Case& c : {
           Case{"vle64.v v0, (buf)\n", "line 1"},
           Case{"addi a0, a0, 1\nvfoo.vv v0, v1, v2\n", "line 2"},
           Case{"vfadd.vv v32, v1, v2\n", "31"},
           Case{"vsetvli t0, a0, e64, m4\nvfadd.vv v6, v4, v0\n",
                "multiple of LMUL"},
           Case{"la a0, missing\n", "line 1"},
           Case{"vfadd.vv v0, v1\n", "line 1"},
       }) {
    auto p = ParseProgram(c.text);
    ASSERT_FALSE(p.ok()) << c.text;
    EXPECT_NE(p.status().message().find(c.needle), absl::string_view::npos)
        << p.status().message();
  }
}

constexpr char kSample[] = R"(
.data
.align 3
a: .double 1.5, -2.0
n: .dword 16
b: .byte 1, 2, 3
.text
.pe 0
  la a0, a
  li a1, 16
  vsetvli t0, a1, e64, m4
loop:
  vle64.v v0, (a0)
  fld ft0, 8(a0)
  vfmacc.vf v8, ft0, v0
  vfmacc.vv v12, v4, v0
  vfredsum.vs v16, v8, v20
  vslidedown.vi v4, v0, 3
  vse64.v v8, (a0)
  vlse64.v v4, (a0), a1
  vluxei64.v v4, (a0), v8
  addi a1, a1, -1
  bnez a1, loop
.pe 1
  li a2, 3
  vsetvli t0, a2, e16, m2
  vfwmacc-sdotp v0, v2, v4
  vfwmacc-sdotp v0, fa0, v4
  vle16.v v2, (a0)
)";

TEST(ParseTest, RoundTrip) {
  auto p = ParseProgram(kSample);
  ASSERT_TRUE(p.ok()) << p.status();
  EXPECT_EQ(p->pes.size(), 2u);
  EXPECT_EQ(p->symbols.at("n"), 16u);
  std::string text = PrintProgram(*p);
  auto q = ParseProgram(text);
  ASSERT_TRUE(q.ok()) << q.status() << "\n" << text;
  EXPECT_EQ(*p, *q);
  EXPECT_EQ(PrintProgram(*q), text);
}

// Random straight-line programs survive print/parse unchanged.
TEST(ParseTest, RandomRoundTrip) {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    std::string src = ".data\nx: .dword 1, 2, 3, 4\n.text\n";
    src += "vsetvli t0, a0, e64, m2\n";
    for (int i = 0; i < 20; ++i) {
      const int a = 2 * (rng() % 16), b = 2 * (rng() % 16),
                c = 2 * (rng() % 16);
      switch (rng() % 6) {
        case 0:
          src += "vfadd.vv v" + std::to_string(a) + ", v" +
                 std::to_string(b) + ", v" + std::to_string(c) + "\n";
          break;
        case 1:
          src += "vfmacc.vv v" + std::to_string(a) + ", v" +
                 std::to_string(b) + ", v" + std::to_string(c) + "\n";
          break;
        case 2:
          src += "vle64.v v" + std::to_string(a) + ", (a1)\n";
          break;
        case 3:
          src += "addi a" + std::to_string(rng() % 8) + ", a1, " +
                 std::to_string(static_cast<int>(rng() % 100) - 50) + "\n";
          break;
        case 4:
          src += "la a2, x\n";
          break;
        default:
          src += "vfmul.vf v" + std::to_string(a) + ", v" +
                 std::to_string(b) + ", fa1\n";
      }
    }
    auto p = ParseProgram(src);
    ASSERT_TRUE(p.ok()) << p.status() << "\n" << src;
    auto q = ParseProgram(PrintProgram(*p));
    ASSERT_TRUE(q.ok()) << q.status();
    EXPECT_EQ(*p, *q);
  }
}

}  // namespace
}  // namespace vcluster
