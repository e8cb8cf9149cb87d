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

#include "vcluster/assembler.h"

#include <array>
#include <charconv>
#include <bit>
#include <cctype>
#include <cstring>
#include <optional>
#include <map>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace vcluster {
namespace {

bool ParseHex(absl::string_view s, uint64_t* out) {
  if (s.empty()) return false;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), *out, 16);
  return ec == std::errc() && end == s.data() + s.size();
}

}  // namespace
namespace {

struct Token {
  absl::string_view text;
  int col = 0;  // 1-based
};

absl::Status ErrorAt(int line, int col, absl::string_view msg) {
  return absl::InvalidArgumentError(
      absl::StrFormat("line %d, col %d: %s", line, col, msg));
}

constexpr std::array<absl::string_view, 32> kXAbi = {
    "zero", "ra", "sp", "gp", "tp",  "t0",  "t1", "t2", "s0", "s1", "a0",
    "a1",   "a2", "a3", "a4", "a5",  "a6",  "a7", "s2", "s3", "s4", "s5",
    "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};

constexpr std::array<absl::string_view, 32> kFAbi = {
    "ft0", "ft1", "ft2",  "ft3",  "ft4", "ft5", "ft6",  "ft7",
    "fs0", "fs1", "fa0",  "fa1",  "fa2", "fa3", "fa4",  "fa5",
    "fa6", "fa7", "fs2",  "fs3",  "fs4", "fs5", "fs6",  "fs7",
    "fs8", "fs9", "fs10", "fs11", "ft8", "ft9", "ft10", "ft11"};

// Numbered register `prefix<N>`; returns -2 for an index above 31.
std::optional<int> NumberedReg(absl::string_view s, char prefix) {
  if (s.size() < 2 || s[0] != prefix) return std::nullopt;
  int v = 0;
  if (!absl::SimpleAtoi(s.substr(1), &v)) return std::nullopt;
  if (!std::isdigit(static_cast<unsigned char>(s[1]))) return std::nullopt;
  if (v < 0 || v > 31) return -2;
  return v;
}

std::optional<int> LookupAbi(absl::string_view s,
                             const std::array<absl::string_view, 32>& names) {
  for (int i = 0; i < 32; ++i) {
    if (names[i] == s) return i;
  }
  return std::nullopt;
}

bool IsIdentifier(absl::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' ||
        s[0] == '.')) {
    return false;
  }
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
          c == '.')) {
      return false;
    }
  }
  return true;
}

struct Mnemonic {
  Opcode op;
  ElementWidth eew = ElementWidth::kE64;
};

const std::map<absl::string_view, Mnemonic>& MnemonicTable() {
  static const auto* table = new std::map<absl::string_view,
                                                    Mnemonic>{
      {"vsetvli", {Opcode::kVsetvli}},
      {"vle8.v", {Opcode::kVle, ElementWidth::kE8}},
      {"vle16.v", {Opcode::kVle, ElementWidth::kE16}},
      {"vle32.v", {Opcode::kVle, ElementWidth::kE32}},
      {"vle64.v", {Opcode::kVle, ElementWidth::kE64}},
      {"vse8.v", {Opcode::kVse, ElementWidth::kE8}},
      {"vse16.v", {Opcode::kVse, ElementWidth::kE16}},
      {"vse32.v", {Opcode::kVse, ElementWidth::kE32}},
      {"vse64.v", {Opcode::kVse, ElementWidth::kE64}},
      {"vlse64.v", {Opcode::kVlse64}},
      {"vsse64.v", {Opcode::kVsse64}},
      {"vluxei64.v", {Opcode::kVluxei64}},
      {"vsuxei64.v", {Opcode::kVsuxei64}},
      {"vfadd.vv", {Opcode::kVfaddVV}},
      {"vfsub.vv", {Opcode::kVfsubVV}},
      {"vfmul.vv", {Opcode::kVfmulVV}},
      {"vfmul.vf", {Opcode::kVfmulVF}},
      {"vfmacc.vv", {Opcode::kVfmaccVV}},
      {"vfmacc.vf", {Opcode::kVfmaccVF}},
      {"vfwmacc-sdotp", {Opcode::kVfwmaccSdotpVV}},
      {"vfredsum.vs", {Opcode::kVfredsumVS}},
      {"vadd.vv", {Opcode::kVaddVV}},
      {"vmul.vv", {Opcode::kVmulVV}},
      {"vslideup.vi", {Opcode::kVslideupVI}},
      {"vslidedown.vi", {Opcode::kVslidedownVI}},
      {"li", {Opcode::kLi}},
      {"la", {Opcode::kLa}},
      {"add", {Opcode::kAdd}},
      {"addi", {Opcode::kAddi}},
      {"sub", {Opcode::kSub}},
      {"mul", {Opcode::kMul}},
      {"slli", {Opcode::kSlli}},
      {"bnez", {Opcode::kBnez}},
      {"blt", {Opcode::kBlt}},
      {"j", {Opcode::kJ}},
      {"ld", {Opcode::kLd}},
      {"sd", {Opcode::kSd}},
      {"fld", {Opcode::kFld}},
      {"flw", {Opcode::kFlw}},
      {"flh", {Opcode::kFlh}},
      {"fsd", {Opcode::kFsd}},
  };
  return *table;
}

// Splits `s` (starting at 1-based column `col`) on commas, trimming blanks.
std::vector<Token> SplitOperands(absl::string_view s, int col) {
  std::vector<Token> out;
  size_t start = 0;
  auto push = [&](size_t b, size_t e) {
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    out.push_back(Token{s.substr(b, e - b), col + static_cast<int>(b)});
  };
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',') {
      push(start, i);
      start = i + 1;
    }
  }
  if (start < s.size() || !out.empty()) push(start, s.size());
  if (out.size() == 1 && out[0].text.empty()) out.clear();
  return out;
}

struct PendingSymbol {
  int pe;
  size_t index;
  int line;
  int col;
};

class Parser {
 public:
  explicit Parser(const MachineConfig& cfg) : cfg_(cfg) {}

  absl::StatusOr<Program> Run(absl::string_view text) {
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
      size_t nl = text.find('\n', pos);
      if (nl == absl::string_view::npos) nl = text.size();
      ++line_no;
      absl::Status st = ParseLine(text.substr(pos, nl - pos), line_no);
      if (!st.ok()) return st;
      pos = nl + 1;
    }
    absl::Status st = Resolve();
    if (!st.ok()) return st;
    if (static_cast<int64_t>(program_.data.size()) > cfg_.l1_bytes()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "data image of %d bytes exceeds L1 capacity of %d bytes",
          program_.data.size(), cfg_.l1_bytes()));
    }
    if (program_.pes.empty()) program_.pes.resize(1);
    return std::move(program_);
  }

 private:
  absl::Status ParseLine(absl::string_view raw, int line) {
    size_t hash = raw.find('#');
    absl::string_view s = raw.substr(0, hash);
    size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    // Leading label.
    size_t colon = s.find(':', b);
    if (colon != absl::string_view::npos) {
      absl::string_view name = absl::StripAsciiWhitespace(s.substr(b, colon - b));
      if (IsIdentifier(name) && name[0] != '.') {
        absl::Status st = DefineLabel(name, line, static_cast<int>(b) + 1);
        if (!st.ok()) return st;
        b = colon + 1;
        while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b])))
          ++b;
      }
    }
    if (b >= s.size()) return absl::OkStatus();
    size_t e = b;
    while (e < s.size() && !std::isspace(static_cast<unsigned char>(s[e]))) ++e;
    Token head{s.substr(b, e - b), static_cast<int>(b) + 1};
    std::vector<Token> ops =
        SplitOperands(s.substr(e), static_cast<int>(e) + 1);
    if (head.text[0] == '.') return ParseDirective(head, ops, line);
    return ParseInstruction(head, ops, line);
  }

  absl::Status DefineLabel(absl::string_view name, int line, int col) {
    std::string key(name);
    if (in_data_) {
      if (program_.symbols.count(key) != 0) {
        return ErrorAt(line, col, absl::StrCat("duplicate symbol '", key, "'"));
      }
      program_.symbols[key] = program_.data.size();
      return absl::OkStatus();
    }
    PeProgram& pe = CurrentPe();
    if (pe.labels.count(key) != 0) {
      return ErrorAt(line, col, absl::StrCat("duplicate label '", key, "'"));
    }
    pe.labels[key] = static_cast<int>(pe.code.size());
    return absl::OkStatus();
  }

  PeProgram& CurrentPe() {
    if (static_cast<int>(program_.pes.size()) <= pe_) {
      program_.pes.resize(pe_ + 1);
    }
    return program_.pes[pe_];
  }

  absl::Status ParseDirective(const Token& head, const std::vector<Token>& ops,
                              int line) {
    absl::string_view d = head.text;
    if (d == ".data") {
      in_data_ = true;
      return ExpectCount(head, ops, 0, line);
    }
    if (d == ".text") {
      in_data_ = false;
      return ExpectCount(head, ops, 0, line);
    }
    if (d == ".pe") {
      absl::Status st = ExpectCount(head, ops, 1, line);
      if (!st.ok()) return st;
      auto v = Imm(ops[0], line);
      if (!v.ok()) return v.status();
      if (*v < 0 || *v >= 16) return ErrorAt(line, ops[0].col, "PE index out of range");
      in_data_ = false;
      pe_ = static_cast<int>(*v);
      CurrentPe();
      return absl::OkStatus();
    }
    if (!in_data_) {
      return ErrorAt(line, head.col,
                     absl::StrCat("directive '", d, "' outside .data"));
    }
    auto& data = program_.data;
    if (d == ".align") {
      absl::Status st = ExpectCount(head, ops, 1, line);
      if (!st.ok()) return st;
      auto v = Imm(ops[0], line);
      if (!v.ok()) return v.status();
      if (*v < 0 || *v > 16) return ErrorAt(line, ops[0].col, "bad alignment");
      const size_t a = size_t{1} << *v;
      while (data.size() % a != 0) data.push_back(0);
      return absl::OkStatus();
    }
    if (d == ".zero") {
      absl::Status st = ExpectCount(head, ops, 1, line);
      if (!st.ok()) return st;
      auto v = Imm(ops[0], line);
      if (!v.ok()) return v.status();
      if (*v < 0 || *v > cfg_.l1_bytes()) {
        return ErrorAt(line, ops[0].col, "bad .zero size");
      }
      data.resize(data.size() + *v, 0);
      return absl::OkStatus();
    }
    if (d == ".dword" || d == ".byte") {
      if (ops.empty()) return ErrorAt(line, head.col, "missing values");
      for (const Token& t : ops) {
        auto v = Imm(t, line);
        if (!v.ok()) return v.status();
        const uint64_t u = static_cast<uint64_t>(*v);
        const int n = d == ".dword" ? 8 : 1;
        for (int i = 0; i < n; ++i) data.push_back((u >> (8 * i)) & 0xff);
      }
      return absl::OkStatus();
    }
    if (d == ".double") {
      if (ops.empty()) return ErrorAt(line, head.col, "missing values");
      for (const Token& t : ops) {
        double x = 0;
        if (!absl::SimpleAtod(t.text, &x)) {
          return ErrorAt(line, t.col,
                         absl::StrCat("bad floating-point value '", t.text, "'"));
        }
        const uint64_t u = std::bit_cast<uint64_t>(x);
        for (int i = 0; i < 8; ++i) data.push_back((u >> (8 * i)) & 0xff);
      }
      return absl::OkStatus();
    }
    return ErrorAt(line, head.col, absl::StrCat("unknown directive '", d, "'"));
  }

  absl::Status ExpectCount(const Token& head, const std::vector<Token>& ops,
                           size_t n, int line) {
    if (ops.size() != n) {
      return ErrorAt(line, head.col,
                     absl::StrFormat("'%s' expects %d operand(s), got %d",
                                     head.text, n, ops.size()));
    }
    return absl::OkStatus();
  }

  absl::StatusOr<int64_t> Imm(const Token& t, int line) {
    absl::string_view s = t.text;
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
      neg = s[0] == '-';
      s.remove_prefix(1);
    }
    uint64_t v = 0;
    bool ok = false;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
      ok = ParseHex(s.substr(2), &v);
    } else if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) {
      ok = absl::SimpleAtoi(s, &v);
    }
    if (!ok) {
      return ErrorAt(line, t.col,
                     absl::StrCat("expected an integer, got '", t.text, "'"));
    }
    int64_t r = static_cast<int64_t>(v);
    return neg ? -r : r;
  }

  absl::StatusOr<int> Reg(const Token& t, int line, char kind) {
    std::optional<int> r;
    if (kind == 'x') {
      r = NumberedReg(t.text, 'x');
      if (!r) r = LookupAbi(t.text, kXAbi);
      if (!r && t.text == "fp") r = 8;
    } else if (kind == 'f') {
      r = NumberedReg(t.text, 'f');
      if (!r) r = LookupAbi(t.text, kFAbi);
    } else {
      r = NumberedReg(t.text, 'v');
    }
    if (r && *r == -2) {
      return ErrorAt(line, t.col,
                     absl::StrCat("register index > 31 in '", t.text, "'"));
    }
    if (!r) {
      const char* what = kind == 'x'   ? "integer register"
                         : kind == 'f' ? "floating-point register"
                                       : "vector register";
      return ErrorAt(line, t.col,
                     absl::StrCat("expected ", what, ", got '", t.text, "'"));
    }
    return *r;
  }

  // `imm(reg)` or `(reg)`.
  absl::Status MemOperand(const Token& t, int line, int* base, int64_t* off) {
    size_t lp = t.text.find('(');
    size_t rp = t.text.rfind(')');
    if (lp == absl::string_view::npos || rp != t.text.size() - 1 || rp < lp) {
      return ErrorAt(line, t.col,
                     absl::StrCat("expected memory operand 'off(reg)', got '",
                                  t.text, "'"));
    }
    *off = 0;
    if (lp > 0) {
      auto v = Imm(Token{t.text.substr(0, lp), t.col}, line);
      if (!v.ok()) return v.status();
      *off = *v;
    }
    Token inner{absl::StripAsciiWhitespace(t.text.substr(lp + 1, rp - lp - 1)),
                t.col + static_cast<int>(lp) + 1};
    auto r = Reg(inner, line, 'x');
    if (!r.ok()) {
      return ErrorAt(line, inner.col,
                     absl::StrCat("expected base register, got '", inner.text,
                                  "'"));
    }
    *base = *r;
    return absl::OkStatus();
  }

  absl::Status Symbol(const Token& t, int line, Instruction* in) {
    if (!IsIdentifier(t.text)) {
      return ErrorAt(line, t.col, absl::StrCat("bad label '", t.text, "'"));
    }
    in->symbol = std::string(t.text);
    pending_.push_back(PendingSymbol{pe_, CurrentPe().code.size(), line, t.col});
    return absl::OkStatus();
  }

  // Checks a vector operand against the statically tracked LMUL.
  absl::Status Aligned(const Token& t, int line, int reg, int emul) {
    if (reg % emul != 0) {
      return ErrorAt(line, t.col,
                     absl::StrFormat("register group base v%d is not a "
                                     "multiple of LMUL %d",
                                     reg, emul));
    }
    return absl::OkStatus();
  }

  absl::Status ParseInstruction(const Token& head, const std::vector<Token>& ops,
                                int line) {
    if (in_data_) {
      return ErrorAt(line, head.col, "instruction inside .data section");
    }
    const auto& table = MnemonicTable();
    auto it = table.find(head.text);
    if (it == table.end()) {
      return ErrorAt(line, head.col,
                     absl::StrCat("unknown mnemonic '", head.text, "'"));
    }
    Instruction in;
    in.op = it->second.op;
    in.eew = it->second.eew;
    in.line = line;
    const int ell = LmulValue(static_lmul_);
    absl::Status st;

#define VC_TRY(expr)                    \
  do {                                  \
    absl::Status _s = (expr);           \
    if (!_s.ok()) return _s;            \
  } while (0)
#define VC_ASSIGN(lhs, expr)            \
  do {                                  \
    auto _r = (expr);                   \
    if (!_r.ok()) return _r.status();   \
    lhs = *_r;                          \
  } while (0)

    switch (in.op) {
      case Opcode::kVsetvli: {
        if (ops.size() != 4 && ops.size() != 6) {
          return ErrorAt(line, head.col,
                         "vsetvli expects rd, rs1, eN, mN[, ta, ma]");
        }
        VC_ASSIGN(in.rd, Reg(ops[0], line, 'x'));
        VC_ASSIGN(in.rs1, Reg(ops[1], line, 'x'));
        absl::string_view e = ops[2].text, m = ops[3].text;
        int bits = 0, ell_v = 0;
        if (e.size() < 2 || e[0] != 'e' || !absl::SimpleAtoi(e.substr(1), &bits)) {
          return ErrorAt(line, ops[2].col, "expected element width eN");
        }
        if (m.size() < 2 || m[0] != 'm' || !absl::SimpleAtoi(m.substr(1), &ell_v)) {
          return ErrorAt(line, ops[3].col, "expected LMUL mN");
        }
        auto w = ElementWidthFromBits(bits);
        if (!w.ok()) return ErrorAt(line, ops[2].col, w.status().message());
        auto l = LmulFromValue(ell_v);
        if (!l.ok()) return ErrorAt(line, ops[3].col, l.status().message());
        in.eew = *w;
        in.lmul = *l;
        static_lmul_ = *l;
        static_sew_ = *w;
        break;
      }
      case Opcode::kVle:
      case Opcode::kVse: {
        VC_TRY(ExpectCount(head, ops, 2, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        int64_t off = 0;
        VC_TRY(MemOperand(ops[1], line, &in.rs1, &off));
        if (off != 0) return ErrorAt(line, ops[1].col, "vector memory ops take no offset");
        const int emul =
            std::max(1, ell * SewBits(in.eew) / SewBits(static_sew_));
        VC_TRY(Aligned(ops[0], line, in.vd, std::min(emul, 8)));
        break;
      }
      case Opcode::kVlse64:
      case Opcode::kVsse64: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        int64_t off = 0;
        VC_TRY(MemOperand(ops[1], line, &in.rs1, &off));
        if (off != 0) return ErrorAt(line, ops[1].col, "vector memory ops take no offset");
        VC_ASSIGN(in.rs2, Reg(ops[2], line, 'x'));
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        break;
      }
      case Opcode::kVluxei64:
      case Opcode::kVsuxei64: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        int64_t off = 0;
        VC_TRY(MemOperand(ops[1], line, &in.rs1, &off));
        if (off != 0) return ErrorAt(line, ops[1].col, "vector memory ops take no offset");
        VC_ASSIGN(in.vs2, Reg(ops[2], line, 'v'));
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        VC_TRY(Aligned(ops[2], line, in.vs2, ell));
        break;
      }
      case Opcode::kVfaddVV:
      case Opcode::kVfsubVV:
      case Opcode::kVfmulVV:
      case Opcode::kVaddVV:
      case Opcode::kVmulVV: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        VC_ASSIGN(in.vs2, Reg(ops[1], line, 'v'));
        VC_ASSIGN(in.vs1, Reg(ops[2], line, 'v'));
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        VC_TRY(Aligned(ops[1], line, in.vs2, ell));
        VC_TRY(Aligned(ops[2], line, in.vs1, ell));
        break;
      }
      case Opcode::kVfmulVF: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        VC_ASSIGN(in.vs2, Reg(ops[1], line, 'v'));
        VC_ASSIGN(in.rs1, Reg(ops[2], line, 'f'));
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        VC_TRY(Aligned(ops[1], line, in.vs2, ell));
        break;
      }
      case Opcode::kVfmaccVV:
      case Opcode::kVfwmaccSdotpVV:
      case Opcode::kVfwmaccSdotpVF: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        if (in.op == Opcode::kVfwmaccSdotpVV && !ops[1].text.empty() &&
            ops[1].text[0] != 'v') {
          in.op = Opcode::kVfwmaccSdotpVF;
          VC_ASSIGN(in.rs1, Reg(ops[1], line, 'f'));
        } else {
          VC_ASSIGN(in.vs1, Reg(ops[1], line, 'v'));
          VC_TRY(Aligned(ops[1], line, in.vs1, ell));
        }
        VC_ASSIGN(in.vs2, Reg(ops[2], line, 'v'));
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        VC_TRY(Aligned(ops[2], line, in.vs2, ell));
        break;
      }
      case Opcode::kVfmaccVF: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        VC_ASSIGN(in.rs1, Reg(ops[1], line, 'f'));
        VC_ASSIGN(in.vs2, Reg(ops[2], line, 'v'));
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        VC_TRY(Aligned(ops[2], line, in.vs2, ell));
        break;
      }
      case Opcode::kVfredsumVS: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        VC_ASSIGN(in.vs2, Reg(ops[1], line, 'v'));
        VC_ASSIGN(in.vs1, Reg(ops[2], line, 'v'));
        VC_TRY(Aligned(ops[1], line, in.vs2, ell));
        break;
      }
      case Opcode::kVslideupVI:
      case Opcode::kVslidedownVI: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.vd, Reg(ops[0], line, 'v'));
        VC_ASSIGN(in.vs2, Reg(ops[1], line, 'v'));
        VC_ASSIGN(in.imm, Imm(ops[2], line));
        if (in.imm < 0) return ErrorAt(line, ops[2].col, "negative slide amount");
        VC_TRY(Aligned(ops[0], line, in.vd, ell));
        VC_TRY(Aligned(ops[1], line, in.vs2, ell));
        if (in.op == Opcode::kVslideupVI && in.vd < in.vs2 + ell &&
            in.vs2 < in.vd + ell) {
          return ErrorAt(line, ops[0].col,
                         "vslideup destination overlaps its source");
        }
        break;
      }
      case Opcode::kLi: {
        VC_TRY(ExpectCount(head, ops, 2, line));
        VC_ASSIGN(in.rd, Reg(ops[0], line, 'x'));
        VC_ASSIGN(in.imm, Imm(ops[1], line));
        break;
      }
      case Opcode::kLa: {
        VC_TRY(ExpectCount(head, ops, 2, line));
        VC_ASSIGN(in.rd, Reg(ops[0], line, 'x'));
        VC_TRY(Symbol(ops[1], line, &in));
        break;
      }
      case Opcode::kAdd:
      case Opcode::kSub:
      case Opcode::kMul: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.rd, Reg(ops[0], line, 'x'));
        VC_ASSIGN(in.rs1, Reg(ops[1], line, 'x'));
        VC_ASSIGN(in.rs2, Reg(ops[2], line, 'x'));
        break;
      }
      case Opcode::kAddi:
      case Opcode::kSlli: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.rd, Reg(ops[0], line, 'x'));
        VC_ASSIGN(in.rs1, Reg(ops[1], line, 'x'));
        VC_ASSIGN(in.imm, Imm(ops[2], line));
        break;
      }
      case Opcode::kBnez: {
        VC_TRY(ExpectCount(head, ops, 2, line));
        VC_ASSIGN(in.rs1, Reg(ops[0], line, 'x'));
        VC_TRY(Symbol(ops[1], line, &in));
        break;
      }
      case Opcode::kBlt: {
        VC_TRY(ExpectCount(head, ops, 3, line));
        VC_ASSIGN(in.rs1, Reg(ops[0], line, 'x'));
        VC_ASSIGN(in.rs2, Reg(ops[1], line, 'x'));
        VC_TRY(Symbol(ops[2], line, &in));
        break;
      }
      case Opcode::kJ: {
        VC_TRY(ExpectCount(head, ops, 1, line));
        VC_TRY(Symbol(ops[0], line, &in));
        break;
      }
      case Opcode::kLd:
      case Opcode::kFld:
      case Opcode::kFlw:
      case Opcode::kFlh: {
        VC_TRY(ExpectCount(head, ops, 2, line));
        VC_ASSIGN(in.rd, Reg(ops[0], line, in.op == Opcode::kLd ? 'x' : 'f'));
        VC_TRY(MemOperand(ops[1], line, &in.rs1, &in.imm));
        break;
      }
      case Opcode::kSd:
      case Opcode::kFsd: {
        VC_TRY(ExpectCount(head, ops, 2, line));
        VC_ASSIGN(in.rs2, Reg(ops[0], line, in.op == Opcode::kSd ? 'x' : 'f'));
        VC_TRY(MemOperand(ops[1], line, &in.rs1, &in.imm));
        break;
      }
    }
#undef VC_TRY
#undef VC_ASSIGN
    CurrentPe().code.push_back(std::move(in));
    return absl::OkStatus();
  }

  absl::Status Resolve() {
    for (const PendingSymbol& p : pending_) {
      Instruction& in = program_.pes[p.pe].code[p.index];
      if (in.op == Opcode::kLa) {
        auto it = program_.symbols.find(in.symbol);
        if (it == program_.symbols.end()) {
          return ErrorAt(p.line, p.col,
                         absl::StrCat("unresolved symbol '", in.symbol, "'"));
        }
        in.imm = static_cast<int64_t>(it->second);
      } else {
        const auto& labels = program_.pes[p.pe].labels;
        auto it = labels.find(in.symbol);
        if (it == labels.end()) {
          return ErrorAt(p.line, p.col,
                         absl::StrCat("unresolved label '", in.symbol, "'"));
        }
        in.imm = it->second;
      }
    }
    return absl::OkStatus();
  }

  const MachineConfig& cfg_;
  Program program_;
  std::vector<PendingSymbol> pending_;
  bool in_data_ = false;
  int pe_ = 0;
  Lmul static_lmul_ = Lmul::kM1;
  ElementWidth static_sew_ = ElementWidth::kE64;
};

std::string X(int r) { return std::string(kXAbi[r]); }
std::string F(int r) { return std::string(kFAbi[r]); }
std::string V(int r) { return absl::StrCat("v", r); }

}  // namespace

absl::StatusOr<Program> ParseProgram(absl::string_view text,
                                     const MachineConfig& cfg) {
  return Parser(cfg).Run(text);
}

std::string FormatInstruction(const Instruction& in) {
  const std::string m(MnemonicOf(in.op, in.eew));
  switch (in.op) {
    case Opcode::kVsetvli:
      return absl::StrFormat("%s %s, %s, e%d, m%d", m, X(in.rd), X(in.rs1),
                             SewBits(in.eew), LmulValue(in.lmul));
    case Opcode::kVle:
    case Opcode::kVse:
      return absl::StrFormat("%s %s, (%s)", m, V(in.vd), X(in.rs1));
    case Opcode::kVlse64:
    case Opcode::kVsse64:
      return absl::StrFormat("%s %s, (%s), %s", m, V(in.vd), X(in.rs1),
                             X(in.rs2));
    case Opcode::kVluxei64:
    case Opcode::kVsuxei64:
      return absl::StrFormat("%s %s, (%s), %s", m, V(in.vd), X(in.rs1),
                             V(in.vs2));
    case Opcode::kVfaddVV:
    case Opcode::kVfsubVV:
    case Opcode::kVfmulVV:
    case Opcode::kVaddVV:
    case Opcode::kVmulVV:
    case Opcode::kVfredsumVS:
      return absl::StrFormat("%s %s, %s, %s", m, V(in.vd), V(in.vs2),
                             V(in.vs1));
    case Opcode::kVfmulVF:
      return absl::StrFormat("%s %s, %s, %s", m, V(in.vd), V(in.vs2),
                             F(in.rs1));
    case Opcode::kVfmaccVV:
    case Opcode::kVfwmaccSdotpVV:
      return absl::StrFormat("%s %s, %s, %s", m, V(in.vd), V(in.vs1),
                             V(in.vs2));
    case Opcode::kVfmaccVF:
    case Opcode::kVfwmaccSdotpVF:
      return absl::StrFormat("%s %s, %s, %s", m, V(in.vd), F(in.rs1),
                             V(in.vs2));
    case Opcode::kVslideupVI:
    case Opcode::kVslidedownVI:
      return absl::StrFormat("%s %s, %s, %d", m, V(in.vd), V(in.vs2), in.imm);
    case Opcode::kLi:
      return absl::StrFormat("%s %s, %d", m, X(in.rd), in.imm);
    case Opcode::kLa:
      return absl::StrFormat("%s %s, %s", m, X(in.rd), in.symbol);
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
      return absl::StrFormat("%s %s, %s, %s", m, X(in.rd), X(in.rs1),
                             X(in.rs2));
    case Opcode::kAddi:
    case Opcode::kSlli:
      return absl::StrFormat("%s %s, %s, %d", m, X(in.rd), X(in.rs1), in.imm);
    case Opcode::kBnez:
      return absl::StrFormat("%s %s, %s", m, X(in.rs1), in.symbol);
    case Opcode::kBlt:
      return absl::StrFormat("%s %s, %s, %s", m, X(in.rs1), X(in.rs2),
                             in.symbol);
    case Opcode::kJ:
      return absl::StrFormat("%s %s", m, in.symbol);
    case Opcode::kLd:
      return absl::StrFormat("%s %s, %d(%s)", m, X(in.rd), in.imm, X(in.rs1));
    case Opcode::kFld:
    case Opcode::kFlw:
    case Opcode::kFlh:
      return absl::StrFormat("%s %s, %d(%s)", m, F(in.rd), in.imm, X(in.rs1));
    case Opcode::kSd:
      return absl::StrFormat("%s %s, %d(%s)", m, X(in.rs2), in.imm, X(in.rs1));
    case Opcode::kFsd:
      return absl::StrFormat("%s %s, %d(%s)", m, F(in.rs2), in.imm, X(in.rs1));
  }
  return m;
}

std::string PrintProgram(const Program& program) {
  std::string out;
  const auto& data = program.data;
  if (!data.empty() || !program.symbols.empty()) {
    std::multimap<uint64_t, std::string> by_addr;
    for (const auto& [name, addr] : program.symbols) by_addr.emplace(addr, name);
    absl::StrAppend(&out, ".data\n");
    auto it = by_addr.begin();
    size_t pos = 0;
    while (pos <= data.size()) {
      while (it != by_addr.end() && it->first == pos) {
        absl::StrAppend(&out, it->second, ":\n");
        ++it;
      }
      if (pos == data.size()) break;
      // Largest run up to the next symbol, emitted as dwords where aligned.
      const size_t next =
          it == by_addr.end() ? data.size()
                              : std::min<size_t>(it->first, data.size());
      while (pos < next) {
        if (pos % 8 == 0 && pos + 8 <= next) {
          uint64_t w = 0;
          for (int i = 0; i < 8; ++i) w |= uint64_t{data[pos + i]} << (8 * i);
          absl::StrAppendFormat(&out, "  .dword 0x%016x\n", w);
          pos += 8;
        } else {
          absl::StrAppendFormat(&out, "  .byte 0x%02x\n", data[pos]);
          pos += 1;
        }
      }
    }
  }
  for (size_t p = 0; p < program.pes.size(); ++p) {
    const PeProgram& pe = program.pes[p];
    absl::StrAppendFormat(&out, ".pe %d\n", p);
    std::multimap<int, std::string> labels;
    for (const auto& [name, idx] : pe.labels) labels.emplace(idx, name);
    auto lit = labels.begin();
    for (size_t i = 0; i <= pe.code.size(); ++i) {
      while (lit != labels.end() && lit->first == static_cast<int>(i)) {
        absl::StrAppend(&out, lit->second, ":\n");
        ++lit;
      }
      if (i < pe.code.size()) {
        absl::StrAppend(&out, "  ", FormatInstruction(pe.code[i]), "\n");
      }
    }
  }
  return out;
}

}  // namespace vcluster
