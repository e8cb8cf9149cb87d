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

#include "vcluster/vrf.h"

#include <algorithm>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace vcluster {

absl::StatusOr<VrfLayout::Location> VrfLayout::LocateChunk(int base,
                                                           Lmul lmul,
                                                           int chunk) const {
  auto group = RegisterGroup(base, lmul);
  if (!group.ok()) return group.status();
  const int chunks = LmulValue(lmul) * chunks_per_reg();
  if (chunk < 0 || chunk >= chunks) {
    return absl::OutOfRangeError(absl::StrFormat(
        "chunk %d outside register group v%d (m%d holds %d chunks)", chunk,
        base, LmulValue(lmul), chunks));
  }
  return LocateSlot(base * chunks_per_reg() + chunk);
}

VrfLayout::Location VrfLayout::LocateSlot(int slot) const {
  const int per_reg = chunks_per_reg();
  const int within = slot % per_reg;
  return Location{within % kBanks, slot / per_reg,
                  (within / kBanks) * chunk_bytes_};
}

ArbitrationResult ArbitrateVrf(std::span<const VrfPortRequest> requests) {
  std::vector<int> order(requests.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return requests[a].unit < requests[b].unit;
  });
  int reads[VrfLayout::kBanks] = {0, 0};
  int writes[VrfLayout::kBanks] = {0, 0};
  std::vector<bool> grant(requests.size(), false);
  for (int i : order) {
    const VrfPortRequest& r = requests[i];
    if (r.kind == VrfAccessKind::kRead) {
      if (reads[r.bank] < VrfLayout::kReadPorts) {
        ++reads[r.bank];
        grant[i] = true;
      }
    } else if (writes[r.bank] < VrfLayout::kWritePorts) {
      ++writes[r.bank];
      grant[i] = true;
    }
  }
  ArbitrationResult result;
  for (size_t i = 0; i < requests.size(); ++i) {
    (grant[i] ? result.granted : result.stalled).push_back(static_cast<int>(i));
  }
  return result;
}

VrfState::VrfState(const VrfLayout& layout) : layout_(layout) {
  for (auto& bank : banks_) bank.assign(layout_.bank_bytes(), 0);
}

uint8_t* VrfState::At(int bank, int row, int offset) {
  return banks_[bank].data() + row * layout_.row_bytes() + offset;
}

const uint8_t* VrfState::At(int bank, int row, int offset) const {
  return banks_[bank].data() + row * layout_.row_bytes() + offset;
}

std::span<const uint8_t> VrfState::Read(const VrfLayout::Location& loc) const {
  return {At(loc.bank, loc.row, loc.offset),
          static_cast<size_t>(layout_.chunk_bytes())};
}

void VrfState::Write(const VrfLayout::Location& loc,
                     std::span<const uint8_t> bytes, uint64_t strobe) {
  uint8_t* dst = At(loc.bank, loc.row, loc.offset);
  const size_t n = std::min<size_t>(bytes.size(), layout_.chunk_bytes());
  for (size_t i = 0; i < n; ++i) {
    if ((strobe >> i) & 1) dst[i] = bytes[i];
  }
}

uint8_t VrfState::GroupByte(int base, int64_t i) const {
  const int cw = layout_.chunk_bytes();
  auto loc = layout_.LocateSlot(base * layout_.chunks_per_reg() +
                                static_cast<int>(i / cw));
  return *At(loc.bank, loc.row, loc.offset + static_cast<int>(i % cw));
}

void VrfState::SetGroupByte(int base, int64_t i, uint8_t v) {
  const int cw = layout_.chunk_bytes();
  auto loc = layout_.LocateSlot(base * layout_.chunks_per_reg() +
                                static_cast<int>(i / cw));
  *At(loc.bank, loc.row, loc.offset + static_cast<int>(i % cw)) = v;
}

absl::StatusOr<double> AccessEnergy(VrfAccessKind kind, double width_bytes,
                                    double capacity_bytes,
                                    const ScmEnergyModel& model) {
  if (!(width_bytes > 0) || !(capacity_bytes > 0)) {
    return absl::InvalidArgumentError(
        "SCM access width and capacity must be positive");
  }
  if (capacity_bytes < width_bytes) {
    return absl::InvalidArgumentError(
        "SCM capacity must be at least one access wide");
  }
  const ScmCoefficients& k =
      kind == VrfAccessKind::kRead ? model.read : model.write;
  return k.a * width_bytes + k.b * width_bytes * capacity_bytes +
         k.c * capacity_bytes;
}

}  // namespace vcluster
