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

#include "vcluster/spm.h"

#include <algorithm>
#include <charconv>
#include <cstring>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"

namespace vcluster {
namespace {

bool ParseHex(absl::string_view s, uint64_t* out) {
  if (s.empty()) return false;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), *out, 16);
  return ec == std::errc() && end == s.data() + s.size();
}

}  // namespace

absl::StatusOr<BankAddress> MapAddress(uint64_t addr, const SpmConfig& cfg,
                                       bool word_access) {
  if (addr >= static_cast<uint64_t>(cfg.total_bytes())) {
    return absl::OutOfRangeError(absl::StrFormat(
        "address 0x%x outside the %d-byte L1", addr, cfg.total_bytes()));
  }
  if (word_access && addr % SpmConfig::kWordBytes != 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("misaligned word access at 0x%x", addr));
  }
  const uint64_t word = addr / SpmConfig::kWordBytes;
  return BankAddress{static_cast<int>(word % cfg.banks),
                     static_cast<int64_t>(word / cfg.banks),
                     static_cast<int>(addr % SpmConfig::kWordBytes)};
}

L1Arbiter::L1Arbiter(const SpmConfig& cfg, int num_initiators)
    : cfg_(cfg),
      num_initiators_(num_initiators),
      last_granted_(cfg.banks, num_initiators - 1) {}

std::vector<bool> L1Arbiter::Arbitrate(std::span<const L1Request> requests) {
  std::vector<bool> grant(requests.size(), false);
  // Winner per bank: smallest round-robin distance from last winner.
  std::vector<int> best(cfg_.banks, -1);
  std::vector<int> best_dist(cfg_.banks, 0);
  for (size_t i = 0; i < requests.size(); ++i) {
    const L1Request& r = requests[i];
    const int bank = static_cast<int>((r.addr / SpmConfig::kWordBytes) %
                                      cfg_.banks);
    const int dist = (r.initiator - last_granted_[bank] - 1 +
                      2 * num_initiators_) %
                     num_initiators_;
    if (best[bank] < 0 || dist < best_dist[bank]) {
      best[bank] = static_cast<int>(i);
      best_dist[bank] = dist;
    }
  }
  for (int b = 0; b < cfg_.banks; ++b) {
    if (best[b] < 0) continue;
    grant[best[b]] = true;
    last_granted_[b] = requests[best[b]].initiator;
  }
  for (bool g : grant) {
    if (!g) ++conflicts_;
  }
  return grant;
}

SharedL1::SharedL1(const SpmConfig& cfg, int num_initiators,
                   L1EnergyModel energy)
    : cfg_(cfg),
      arbiter_(cfg, num_initiators),
      energy_(energy),
      mem_(cfg.total_bytes(), 0) {}

uint64_t SharedL1::LoadWord(uint64_t addr) const {
  uint64_t v = 0;
  std::memcpy(&v, mem_.data() + addr, sizeof(v));
  return v;
}

void SharedL1::StoreWord(uint64_t addr, uint64_t value, uint8_t strobe) {
  for (int i = 0; i < 8; ++i) {
    if ((strobe >> i) & 1) mem_[addr + i] = (value >> (8 * i)) & 0xff;
  }
}

std::vector<bool> SharedL1::Cycle(int64_t cycle,
                                  std::span<const L1Request> requests) {
  std::vector<bool> grant = arbiter_.Arbitrate(requests);
  int64_t granted = 0;
  for (size_t i = 0; i < requests.size(); ++i) {
    if (!grant[i]) continue;
    ++granted;
    const L1Request& r = requests[i];
    L1Response resp{r.initiator, r.tag, 0, r.write};
    if (r.write) {
      StoreWord(r.addr, r.wdata, r.strobe);
      ++writes_;
    } else {
      resp.rdata = LoadWord(r.addr);
      ++reads_;
    }
    pending_.push_back(Pending{cycle + 1, resp});
  }
  max_grants_ = std::max(max_grants_, granted);
  return grant;
}

std::vector<L1Response> SharedL1::PopResponses(int64_t cycle) {
  std::vector<L1Response> out;
  while (!pending_.empty() && pending_.front().ready <= cycle) {
    out.push_back(pending_.front().response);
    pending_.pop_front();
  }
  return out;
}

std::string FormatHexImage(std::span<const uint8_t> bytes, uint64_t base) {
  std::string out = absl::StrFormat("@%08x\n", base);
  const size_t words = (bytes.size() + 7) / 8;
  for (size_t w = 0; w < words; ++w) {
    uint64_t v = 0;
    for (size_t i = 0; i < 8 && w * 8 + i < bytes.size(); ++i) {
      v |= uint64_t{bytes[w * 8 + i]} << (8 * i);
    }
    absl::StrAppendFormat(&out, "%016x%c", v, (w % 4 == 3) ? '\n' : ' ');
  }
  if (words % 4 != 0) out.back() = '\n';
  return out;
}

absl::Status ParseHexImage(absl::string_view text, std::span<uint8_t> memory) {
  uint64_t addr = 0;
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_no;
    line = absl::StripAsciiWhitespace(line);
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '@') {
      if (!ParseHex(line.substr(1), &addr)) {
        return absl::InvalidArgumentError(
            absl::StrFormat("image line %d: bad base address", line_no));
      }
      if (addr % 8 != 0) {
        return absl::InvalidArgumentError(
            absl::StrFormat("image line %d: base not 8-byte aligned", line_no));
      }
      continue;
    }
    for (absl::string_view tok : absl::StrSplit(line, ' ', absl::SkipEmpty())) {
      uint64_t v = 0;
      if (tok.size() > 16 || !ParseHex(tok, &v)) {
        return absl::InvalidArgumentError(
            absl::StrFormat("image line %d: bad word '%s'", line_no, tok));
      }
      if (addr + 8 > memory.size()) {
        return absl::OutOfRangeError(
            absl::StrFormat("image line %d: word at 0x%x outside memory",
                            line_no, addr));
      }
      for (int i = 0; i < 8; ++i) memory[addr + i] = (v >> (8 * i)) & 0xff;
      addr += 8;
    }
  }
  return absl::OkStatus();
}

absl::Status LoadBinaryImage(std::span<const uint8_t> image, uint64_t base,
                             std::span<uint8_t> memory) {
  if (base > memory.size() || image.size() > memory.size() - base) {
    return absl::OutOfRangeError("binary image does not fit in L1");
  }
  std::memcpy(memory.data() + base, image.data(), image.size());
  return absl::OkStatus();
}

}  // namespace vcluster
