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

#include <algorithm>
#include <bit>
#include <cstring>
#include <utility>

#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "vcluster/assembler.h"

namespace vcluster {

void EventLog::Log(int64_t cycle, absl::string_view unit,
                   absl::string_view event, absl::string_view detail) {
  if (out_ == nullptr) return;
  *out_ << absl::StrCat(cycle, ",", unit, ",", event, ",", detail, "\n");
}

namespace {

VectorUnit UnitOf(Opcode op) {
  switch (ClassOf(op)) {
    case InstrClass::kLoad:
    case InstrClass::kStore:
      return VectorUnit::kVlsu;
    case InstrClass::kSlide:
      return VectorUnit::kVsldu;
    default:
      return VectorUnit::kVau;
  }
}

uint64_t StrobeMask(int bytes) {
  return bytes >= 64 ? ~uint64_t{0} : (uint64_t{1} << bytes) - 1;
}

int CeilDiv(int64_t a, int64_t b) { return static_cast<int>((a + b - 1) / b); }

bool IsStore(Opcode op) { return ClassOf(op) == InstrClass::kStore; }

}  // namespace

struct Pe::VecOp {
  int64_t id = 0;
  int pc = 0;
  Instruction in;
  VectorUnit unit = VectorUnit::kVau;
  VType vtype;
  int64_t vl = 0;
  uint64_t scalar = 0;  // f-register operand bits
  uint64_t base = 0;
  int64_t stride = 0;
  ElementWidth ew = ElementWidth::kE64;  // element width of the data stream
  int64_t bytes = 0;                     // active bytes of the data group
  int n_chunks = 0;

  std::vector<int> dst_slot;        // per chunk; -1 when not written
  std::vector<int64_t> written_at;  // per chunk; -1 while pending
  int dst_remaining = 0;
  std::vector<int16_t> slot_dst;    // slot -> chunk, -1 when not a target
  std::vector<int16_t> slot_reads;  // slot -> reads still to perform
  int reads_remaining = 0;
  std::vector<int64_t> expected;    // slot -> producer the checker expects

  InstrRecord rec;

  // VAU progress.
  int next_chunk = 0;
  std::unique_ptr<LaneReducer> reducer;
  double seed = 0;
  int64_t tail_ready = -1;
  bool result_queued = false;

  // VLSU progress.
  int64_t words = 0;
  std::vector<int64_t> next_word;  // per port
  int64_t words_generated = 0;
  int64_t words_granted = 0;
  int wb_chunk = 0;
  std::map<int, std::vector<uint8_t>> data_buf;
  std::map<int, std::vector<uint8_t>> index_buf;
  int next_data_read = 0;
  int next_index_read = 0;

  // VSLDU progress.
  int src_lo = 0, src_hi = 0, next_src = 0;
  int dst_lo = 0, dst_hi = 0, next_dst = 0;
  std::map<int, std::vector<uint8_t>> slide_buf;

  bool Finished() const { return dst_remaining == 0 && reads_remaining == 0 &&
                                 words_granted == words; }
  bool IsLoad() const { return ClassOf(in.op) == InstrClass::kLoad; }
  bool NeedsData() const { return IsStore(in.op); }
  bool NeedsIndex() const { return AddrModeOf(in.op) == AddrMode::kIndexed; }
};

struct Pe::VauWrite {
  int64_t due;
  VecOp* op;
  int chunk;
  std::vector<uint8_t> data;
  uint64_t strobe;
};

struct Pe::RobEntry {
  int64_t op_id;
  int64_t word;
  uint64_t seq;
  bool filled = false;
  uint64_t data = 0;
};

struct Pe::PendingLoad {
  int rd;
  bool is_float;
  int size;
  int offset;
};

Pe::Pe(int index, const MachineConfig& cfg, const PeProgram* program,
       EventLog* log)
    : index_(index),
      cfg_(cfg),
      program_(program),
      log_(log),
      layout_(cfg),
      vrf_(layout_),
      per_reg_(layout_.chunks_per_reg()),
      num_slots_(kNumVectorRegs * layout_.chunks_per_reg()),
      rob_(cfg.vlsu_ports),
      ports_(cfg.ports_per_pe()),
      port_seq_(cfg.ports_per_pe(), 0),
      last_writer_(num_slots_, -1),
      current_writer_(num_slots_, -1),
      slot_written_at_(num_slots_, -1) {
  csr_.vtype = VType{ElementWidth::kE64, Lmul::kM1};
}

Pe::~Pe() = default;
Pe::Pe(Pe&&) noexcept = default;

absl::Status Pe::Fault(const VecOp* op, absl::string_view what) const {
  const int pc = op ? op->pc : pc_;
  std::string text;
  if (program_ != nullptr && pc >= 0 &&
      pc < static_cast<int>(program_->code.size())) {
    text = FormatInstruction(program_->code[pc]);
  }
  return absl::FailedPreconditionError(absl::StrFormat(
      "pe %d pc %d (%s): %s", index_, pc, text, what));
}

bool Pe::CanRead(const VecOp& op, int slot, int64_t cycle) const {
  for (auto it = inflight_.begin(); it != inflight_.end() && it->first < op.id;
       ++it) {
    const VecOp& y = *it->second;
    const int c = y.slot_dst[slot];
    if (c >= 0 && (y.written_at[c] < 0 || y.written_at[c] >= cycle)) {
      return false;
    }
  }
  return true;
}

bool Pe::CanWrite(const VecOp& op, int slot) const {
  for (auto it = inflight_.begin(); it != inflight_.end() && it->first < op.id;
       ++it) {
    const VecOp& y = *it->second;
    const int c = y.slot_dst[slot];
    if (c >= 0 && y.written_at[c] < 0) return false;
    if (y.slot_reads[slot] > 0) return false;
  }
  return true;
}

void Pe::NoteRead(VecOp& op, int slot, int64_t cycle) {
  ++stats_.vrf_reads;
  ++stats_.chaining_checks;
  const int64_t want = op.expected[slot];
  if (current_writer_[slot] != want ||
      (want >= 0 && slot_written_at_[slot] >= cycle)) {
    ++stats_.chaining_violations;
  }
  if (op.slot_reads[slot] > 0) {
    --op.slot_reads[slot];
    --op.reads_remaining;
  }
  ++progress_;
}

void Pe::NoteWrite(VecOp& op, int chunk, int64_t cycle) {
  const int slot = op.dst_slot[chunk];
  op.written_at[chunk] = cycle;
  --op.dst_remaining;
  current_writer_[slot] = op.id;
  slot_written_at_[slot] = cycle;
  ++stats_.vrf_writes;
  ++progress_;
}

void Pe::Deliver(int port, const L1Response& r) {
  ++progress_;
  if (port == cfg_.vlsu_ports) {
    if (r.write) return;
    PendingLoad p = scalar_loads_.front();
    scalar_loads_.pop_front();
    uint64_t v = r.rdata >> (8 * p.offset);
    if (p.size < 8) v &= (uint64_t{1} << (8 * p.size)) - 1;
    if (p.is_float) {
      f_[p.rd] = v;
      --f_busy_[p.rd];
    } else {
      if (p.rd != 0) x_[p.rd] = v;
      --x_busy_[p.rd];
    }
    return;
  }
  if (r.write) return;
  for (RobEntry& e : rob_[port]) {
    if (e.seq == r.tag) {
      e.filled = true;
      e.data = r.rdata;
      return;
    }
  }
}

void Pe::Granted(int port) {
  const L1Request& r = *ports_[port];
  ++progress_;
  if (port == cfg_.vlsu_ports) {
    if (r.write) --scalar_stores_;
  } else {
    // The op id rides in the upper tag bits for VLSU requests.
    auto it = inflight_.find(static_cast<int64_t>(r.tag >> 24));
    if (it != inflight_.end()) ++it->second->words_granted;
  }
  ports_[port].reset();
}

bool Pe::Done() const {
  if (pc_ < static_cast<int>(program_->code.size())) return false;
  if (!inflight_.empty() || !scalar_loads_.empty() || scalar_stores_ > 0) {
    return false;
  }
  for (const auto& p : ports_) {
    if (p) return false;
  }
  return true;
}

absl::Status Pe::Step(int64_t cycle) {
  if (absl::Status s = VrfPhase(cycle); !s.ok()) return s;
  if (absl::Status s = MemoryPhase(cycle); !s.ok()) return s;
  Retire(cycle);
  ControllerIssue(cycle);
  return ScalarStep(cycle);
}

// All VRF traffic of one cycle: the units post requests, one arbitration
// decides, and each unit applies what it was granted.
absl::Status Pe::VrfPhase(int64_t cycle) {
  const int cw = layout_.chunk_bytes();
  std::vector<VrfPortRequest> reqs;
  auto post = [&](VrfAccessKind kind, int slot, uint64_t strobe,
                  VrfUnit unit) {
    VrfLayout::Location loc = layout_.LocateSlot(slot);
    reqs.push_back({kind, loc.bank, loc.row, strobe, unit});
    return static_cast<int>(reqs.size()) - 1;
  };

  // VAU: retire finished reductions into the write queue, then post due
  // writes and the next chunk's operand reads.
  VecOp* vop = vau_.empty() ? nullptr : vau_.front();
  if (vop && ClassOf(vop->in.op) == InstrClass::kReduction &&
      vop->tail_ready >= 0 && !vop->result_queued && cycle >= vop->tail_ready &&
      CanWrite(*vop, vop->dst_slot[0])) {
    std::vector<uint8_t> data(cw, 0);
    StoreFloat(data, 0, vop->vtype.sew, vop->reducer->Finish(vop->seed));
    vau_writes_.push_back(
        {cycle, vop, 0, std::move(data), StrobeMask(SewBytes(vop->vtype.sew))});
    vop->result_queued = true;
  }
  std::vector<std::pair<int, VauWrite*>> vau_write_reqs;
  for (VauWrite& w : vau_writes_) {
    if (w.due > cycle) break;
    vau_write_reqs.push_back(
        {post(VrfAccessKind::kWrite, w.op->dst_slot[w.chunk], w.strobe,
              VrfUnit::kVau),
         &w});
  }
  std::vector<int> vau_srcs;
  std::vector<int> vau_read_idx;
  bool vau_try = false;
  bool vau_tail = false;
  if (vop) {
    const InstrClass cls = ClassOf(vop->in.op);
    if (vop->next_chunk < vop->n_chunks) {
      const int c = vop->next_chunk;
      const Instruction& in = vop->in;
      auto g = [&](int base) { return GroupSlot(base, c); };
      switch (in.op) {
        case Opcode::kVfmaccVV:
        case Opcode::kVfwmaccSdotpVV:
          vau_srcs = {g(in.vs1), g(in.vs2), g(in.vd)};
          break;
        case Opcode::kVfmaccVF:
        case Opcode::kVfwmaccSdotpVF:
          vau_srcs = {g(in.vs2), g(in.vd)};
          break;
        case Opcode::kVfmulVF:
          vau_srcs = {g(in.vs2)};
          break;
        case Opcode::kVfredsumVS:
          vau_srcs = {g(in.vs2)};
          if (c == 0) vau_srcs.push_back(GroupSlot(in.vs1, 0));
          break;
        default:
          vau_srcs = {g(in.vs2), g(in.vs1)};
      }
      bool ok = cls != InstrClass::kIntArith || cycle >= ipu_ready_;
      for (int s : vau_srcs) ok = ok && CanRead(*vop, s, cycle);
      if (cls != InstrClass::kReduction) {
        ok = ok && CanWrite(*vop, vop->dst_slot[c]);
      }
      if (ok) {
        vau_try = true;
        for (int s : vau_srcs) {
          vau_read_idx.push_back(post(VrfAccessKind::kRead, s, 0,
                                      VrfUnit::kVau));
        }
      }
    } else if (cls == InstrClass::kReduction && !vop->result_queued) {
      vau_tail = true;
    }
  }

  // VSLDU: read the next source chunk and write the next destination chunk
  // once the source bytes it needs are buffered.
  VecOp* sop = vsldu_.empty() ? nullptr : vsldu_.front();
  int sld_read = -1, sld_write = -1;
  std::vector<uint8_t> sld_data;
  uint64_t sld_strobe = 0;
  if (sop) {
    const int64_t ob = sop->in.imm * SewBytes(sop->vtype.sew);
    const bool down = sop->in.op == Opcode::kVslidedownVI;
    if (sop->next_src < sop->src_hi) {
      const int s = GroupSlot(sop->in.vs2, sop->next_src);
      if (CanRead(*sop, s, cycle)) {
        sld_read = post(VrfAccessKind::kRead, s, 0, VrfUnit::kVsldu);
      }
    }
    if (sop->next_dst < sop->dst_hi) {
      const int c = sop->next_dst;
      const int64_t lo = int64_t{c} * cw;
      const int64_t hi = std::min<int64_t>(lo + cw, sop->bytes);
      // Source byte range feeding this chunk.
      int64_t need_lo, need_hi;
      if (down) {
        need_lo = lo + ob;
        need_hi = std::min<int64_t>(hi + ob, sop->bytes);
      } else {
        need_lo = std::max<int64_t>(lo, ob) - ob;
        need_hi = hi - ob;
      }
      const int need_chunk_hi =
          need_hi > need_lo ? CeilDiv(need_hi, cw) : 0;
      const bool have = need_chunk_hi <= sop->next_src ||
                        need_chunk_hi <= sop->src_lo;
      if (have && CanWrite(*sop, sop->dst_slot[c])) {
        sld_data.assign(cw, 0);
        for (int64_t i = lo; i < hi; ++i) {
          int64_t src;
          if (down) {
            src = i + ob;
            if (src >= sop->bytes) {
              sld_strobe |= uint64_t{1} << (i - lo);
              continue;
            }
          } else {
            if (i < ob) continue;
            src = i - ob;
          }
          sld_data[i - lo] = sop->slide_buf.at(src / cw)[src % cw];
          sld_strobe |= uint64_t{1} << (i - lo);
        }
        sld_write = post(VrfAccessKind::kWrite, sop->dst_slot[c], sld_strobe,
                         VrfUnit::kVsldu);
      }
    }
  }

  // VLSU: in-order chunk writeback from the ROB, plus store-data and index
  // reads for the ops that still generate requests.
  const int words_per_chunk = cw / 8;
  const int wb_width = std::max(1, cfg_.vlsu_ports / cfg_.fpus_per_pe);
  struct WbPlan {
    VecOp* op;
    int chunk;
    int req;
    std::vector<uint8_t> data;
  };
  std::vector<WbPlan> wb;
  {
    int planned = 0;
    for (VecOp* op : vlsu_) {
      if (planned >= wb_width) break;
      if (!op->IsLoad()) continue;
      int c = op->wb_chunk;
      bool blocked = false;
      while (c < op->n_chunks && planned < wb_width) {
        const int64_t k0 = int64_t{c} * words_per_chunk;
        const int64_t k1 = std::min<int64_t>(k0 + words_per_chunk, op->words);
        std::vector<uint8_t> data(cw, 0);
        bool ready = true;
        for (int64_t k = k0; k < k1 && ready; ++k) {
          const RobEntry* hit = nullptr;
          for (const RobEntry& e : rob_[k % cfg_.vlsu_ports]) {
            if (e.op_id == op->id && e.word == k) {
              hit = &e;
              break;
            }
          }
          if (hit == nullptr || !hit->filled) {
            ready = false;
          } else {
            std::memcpy(data.data() + (k - k0) * 8, &hit->data, 8);
          }
        }
        if (!ready || !CanWrite(*op, op->dst_slot[c])) {
          blocked = true;
          break;
        }
        const int active = static_cast<int>(
            std::min<int64_t>(cw, op->bytes - int64_t{c} * cw));
        wb.push_back({op, c,
                      post(VrfAccessKind::kWrite, op->dst_slot[c],
                           StrobeMask(active), VrfUnit::kVlsu),
                      std::move(data)});
        ++planned;
        ++c;
      }
      if (blocked || c < op->n_chunks) break;  // writeback stays in order
    }
  }
  struct ReadPlan {
    VecOp* op;
    bool index;
    int chunk;
    int req;
  };
  std::vector<ReadPlan> vlsu_reads;
  for (bool index : {false, true}) {
    for (VecOp* op : vlsu_) {
      if (op->words_generated == op->words) continue;
      if (index ? !op->NeedsIndex() : !op->NeedsData()) continue;
      int& next = index ? op->next_index_read : op->next_data_read;
      if (next >= op->n_chunks) continue;
      int64_t lowest = op->words;
      for (int p = 0; p < cfg_.vlsu_ports; ++p) {
        if (op->next_word[p] < op->words) {
          lowest = std::min(lowest, op->next_word[p]);
        }
      }
      const int needed = static_cast<int>(lowest / words_per_chunk);
      if (next > needed + 1) continue;
      const int base = index ? op->in.vs2 : op->in.vd;
      const int s = GroupSlot(base, next);
      if (!CanRead(*op, s, cycle)) break;
      vlsu_reads.push_back(
          {op, index, next, post(VrfAccessKind::kRead, s, 0, VrfUnit::kVlsu)});
      break;
    }
  }

  ArbitrationResult arb = ArbitrateVrf(reqs);
  std::vector<bool> granted(reqs.size(), false);
  for (int g : arb.granted) granted[g] = true;
  stats_.vrf_port_stalls += arb.stalled.size();

  // Apply VAU writes (in due order; a stalled write holds back later ones).
  size_t retired_writes = 0;
  for (auto& [req, w] : vau_write_reqs) {
    if (!granted[req]) break;
    vrf_.Write(layout_.LocateSlot(w->op->dst_slot[w->chunk]), w->data,
               w->strobe);
    NoteWrite(*w->op, w->chunk, cycle);
    ++retired_writes;
  }
  for (size_t i = 0; i < retired_writes; ++i) vau_writes_.pop_front();

  if (vau_tail) {
    ++stats_.vau_busy;
    ++vop->rec.vau_cycles;
  }
  if (vau_try) {
    bool all = true;
    for (int r : vau_read_idx) all = all && granted[r];
    if (all) {
      const int c = vop->next_chunk;
      std::vector<std::vector<uint8_t>> ops;
      for (int s : vau_srcs) {
        auto bytes = vrf_.Read(layout_.LocateSlot(s));
        ops.emplace_back(bytes.begin(), bytes.end());
        NoteRead(*vop, s, cycle);
      }
      const int eb = SewBytes(vop->ew);
      const int per_chunk = cw / eb;
      const int elems = static_cast<int>(
          std::min<int64_t>(per_chunk, vop->vl - int64_t{c} * per_chunk));
      const Instruction& in = vop->in;
      const InstrClass cls = ClassOf(in.op);
      if (cls == InstrClass::kReduction) {
        if (c == 0) vop->seed = LoadFloat(ops[1], 0, vop->ew);
        vop->reducer->Add(ops[0], elems);
        stats_.fpu_lane_ops += elems * eb / 8.0;
        if (c + 1 == vop->n_chunks) {
          int levels = 0;
          while ((1 << levels) < per_chunk) ++levels;
          vop->tail_ready = cycle + cfg_.fpu_latency * (1 + levels);
        }
      } else {
        ArithOperands a;
        switch (in.op) {
          case Opcode::kVfmaccVV:
          case Opcode::kVfwmaccSdotpVV:
            a.vs1 = ops[0];
            a.vs2 = ops[1];
            a.vd = ops[2];
            break;
          case Opcode::kVfmaccVF:
          case Opcode::kVfwmaccSdotpVF:
            a.vs2 = ops[0];
            a.vd = ops[1];
            break;
          case Opcode::kVfmulVF:
            a.vs2 = ops[0];
            break;
          default:
            a.vs2 = ops[0];
            a.vs1 = ops[1];
        }
        a.scalar = vop->scalar;
        std::vector<uint8_t> out(cw, 0);
        auto n = ExecuteArith(in.op, vop->ew, elems, a, out);
        if (!n.ok()) return Fault(vop, n.status().message());
        const bool fma = cls == InstrClass::kFma ||
                         cls == InstrClass::kWideningSdotp;
        if (fma) {
          stats_.fma_ops += elems;
          stats_.fma_ops_weighted += elems * SewBits(vop->ew) / 64.0;
        }
        if (cls != InstrClass::kIntArith) {
          stats_.fpu_lane_ops += elems * eb / 8.0;
        } else {
          ipu_ready_ = cycle + std::max(1, cw / 8);
        }
        vau_writes_.push_back({cycle + cfg_.fpu_latency, vop, c,
                               std::move(out), StrobeMask(*n)});
      }
      ++stats_.vau_busy;
      ++vop->rec.vau_cycles;
      if (vop->rec.first_op < 0) vop->rec.first_op = cycle;
      vop->rec.last_op = cycle;
      if (log_->enabled()) {
        log_->Log(cycle, absl::StrCat("vau", index_), "chunk",
                  absl::StrCat(MnemonicOf(in.op, in.eew), " #", vop->id,
                               " c", c));
      }
      ++vop->next_chunk;
    }
  } else if (cycle < ipu_ready_ && vop &&
             ClassOf(vop->in.op) == InstrClass::kIntArith) {
    ++stats_.vau_busy;  // IPU still serializing the previous chunk
  }
  // The VAU moves on as soon as the last chunk has issued; its writes drain
  // through the pipeline while the next instruction starts.
  if (vop && vop->next_chunk >= vop->n_chunks &&
      (ClassOf(vop->in.op) != InstrClass::kReduction || vop->result_queued ||
       vop->n_chunks == 0)) {
    vau_.pop_front();
  }

  // VSLDU.
  if (sop) {
    ++stats_.vsldu_busy;
    if (sld_read >= 0 && granted[sld_read]) {
      const int s = GroupSlot(sop->in.vs2, sop->next_src);
      auto bytes = vrf_.Read(layout_.LocateSlot(s));
      sop->slide_buf[sop->next_src].assign(bytes.begin(), bytes.end());
      NoteRead(*sop, s, cycle);
      if (sop->rec.first_op < 0) sop->rec.first_op = cycle;
      sop->rec.last_op = cycle;
      ++sop->next_src;
    }
    if (sld_write >= 0 && granted[sld_write]) {
      vrf_.Write(layout_.LocateSlot(sop->dst_slot[sop->next_dst]), sld_data,
                 sld_strobe);
      NoteWrite(*sop, sop->next_dst, cycle);
      if (sop->rec.first_op < 0) sop->rec.first_op = cycle;
      sop->rec.last_op = cycle;
      ++sop->next_dst;
    }
    if (sop->next_src >= sop->src_hi && sop->next_dst >= sop->dst_hi) {
      vsldu_.pop_front();
    }
  }

  // VLSU writeback: commit the granted prefix.
  for (WbPlan& p : wb) {
    if (!granted[p.req]) break;
    VecOp* op = p.op;
    vrf_.Write(layout_.LocateSlot(op->dst_slot[p.chunk]), p.data,
               reqs[p.req].strobe);
    NoteWrite(*op, p.chunk, cycle);
    op->rec.last_op = cycle;
    const int64_t k0 = int64_t{p.chunk} * words_per_chunk;
    const int64_t k1 = std::min<int64_t>(k0 + words_per_chunk, op->words);
    for (int64_t k = k0; k < k1; ++k) {
      auto& q = rob_[k % cfg_.vlsu_ports];
      q.erase(std::find_if(q.begin(), q.end(), [&](const RobEntry& e) {
        return e.op_id == op->id && e.word == k;
      }));
    }
    op->wb_chunk = p.chunk + 1;
    if (log_->enabled()) {
      log_->Log(cycle, absl::StrCat("vlsu", index_), "writeback",
                absl::StrCat("#", op->id, " c", p.chunk));
    }
  }
  for (const ReadPlan& r : vlsu_reads) {
    if (!granted[r.req]) continue;
    const int base = r.index ? r.op->in.vs2 : r.op->in.vd;
    const int s = GroupSlot(base, r.chunk);
    auto bytes = vrf_.Read(layout_.LocateSlot(s));
    (r.index ? r.op->index_buf : r.op->data_buf)[r.chunk].assign(bytes.begin(),
                                                                bytes.end());
    NoteRead(*r.op, s, cycle);
    ++(r.index ? r.op->next_index_read : r.op->next_data_read);
  }
  return absl::OkStatus();
}

// Request generation on the VLSU ports. Each port walks its own word
// subsequence (word k belongs to port k mod P) through the VLSU's ops in
// order, reserving a ROB entry per load word.
absl::Status Pe::MemoryPhase(int64_t cycle) {
  const int cw = layout_.chunk_bytes();
  const int words_per_chunk = cw / 8;
  const int nports = cfg_.vlsu_ports;
  const uint64_t l1 = static_cast<uint64_t>(cfg_.l1_bytes());
  if (!vlsu_.empty()) ++stats_.vlsu_busy;
  for (int p = 0; p < nports; ++p) {
    if (ports_[p]) continue;
    bool older_store_pending = false;
    bool older_pending = false;
    for (VecOp* op : vlsu_) {
      const bool store = IsStore(op->in.op);
      const bool mine = op->next_word[p] < op->words;
      if (mine) {
        if (store ? older_pending : older_store_pending) break;
        const int64_t k = op->next_word[p];
        const int chunk = static_cast<int>(k / words_per_chunk);
        if (op->IsLoad() &&
            static_cast<int>(rob_[p].size()) >= cfg_.rob_depth_per_port) {
          break;
        }
        if (op->NeedsData() && !op->data_buf.count(chunk)) break;
        if (op->NeedsIndex() && !op->index_buf.count(chunk)) break;
        uint64_t addr = 0;
        switch (AddrModeOf(op->in.op)) {
          case AddrMode::kUnitStride:
            addr = op->base + 8 * k;
            break;
          case AddrMode::kStrided:
            addr = op->base + op->stride * k;
            break;
          case AddrMode::kIndexed: {
            uint64_t off;
            std::memcpy(&off,
                        op->index_buf.at(chunk).data() +
                            (k % words_per_chunk) * 8,
                        8);
            addr = op->base + off;
            break;
          }
          case AddrMode::kNone:
            break;
        }
        if (addr % 8 != 0 || addr + 8 > l1) {
          return Fault(op, absl::StrFormat(
                               "vector access to 0x%x outside L1 or "
                               "misaligned",
                               addr));
        }
        L1Request r;
        r.initiator = index_ * num_ports() + p;
        r.addr = addr;
        r.tag = (static_cast<uint64_t>(op->id) << 24) |
                (port_seq_[p]++ & 0xffffff);
        if (store) {
          r.write = true;
          const int64_t off = 8 * k - int64_t{chunk} * cw;
          std::memcpy(&r.wdata, op->data_buf.at(chunk).data() + off, 8);
          r.strobe = static_cast<uint8_t>(
              StrobeMask(static_cast<int>(std::min<int64_t>(8, op->bytes - 8 * k))));
        } else {
          rob_[p].push_back({op->id, k, r.tag});
        }
        ports_[p] = r;
        if (log_->enabled()) {
          log_->Log(cycle, absl::StrCat("vlsu", index_, ".p", p),
                    store ? "store" : "load",
                    absl::StrFormat("#%d w%d 0x%x", op->id, k, addr));
        }
        op->next_word[p] += nports;
        ++op->words_generated;
        if (op->rec.first_op < 0) op->rec.first_op = cycle;
        op->rec.last_op = cycle;
        ++progress_;
        // Drop buffered chunks every port has moved past.
        int64_t lowest = op->words;
        for (int q = 0; q < nports; ++q) {
          if (op->next_word[q] < op->words) {
            lowest = std::min(lowest, op->next_word[q]);
          }
        }
        const int keep = static_cast<int>(lowest / words_per_chunk);
        for (auto* buf : {&op->data_buf, &op->index_buf}) {
          while (!buf->empty() && buf->begin()->first < keep) {
            buf->erase(buf->begin());
          }
        }
        break;
      }
      if (store) older_store_pending |= op->words_granted < op->words;
      older_pending |= op->words_granted < op->words;
    }
  }
  return absl::OkStatus();
}

void Pe::Retire(int64_t cycle) {
  for (auto it = inflight_.begin(); it != inflight_.end();) {
    VecOp& op = *it->second;
    const bool in_unit =
        std::find(vau_.begin(), vau_.end(), &op) != vau_.end() ||
        std::find(vsldu_.begin(), vsldu_.end(), &op) != vsldu_.end() ||
        std::find(queue_.begin(), queue_.end(), &op) != queue_.end() ||
        std::any_of(vau_writes_.begin(), vau_writes_.end(),
                    [&](const VauWrite& w) { return w.op == &op; });
    if (op.rec.issued >= 0 && !in_unit && op.Finished()) {
      op.rec.completed = cycle;
      history_.push_back(op.rec);
      if (op.unit == VectorUnit::kVlsu) {
        vlsu_.erase(std::find(vlsu_.begin(), vlsu_.end(), &op));
        --vector_mem_inflight_;
      }
      if (log_->enabled()) {
        log_->Log(cycle, absl::StrCat("ctrl", index_), "complete",
                  absl::StrCat(MnemonicOf(op.in.op, op.in.eew), " #", op.id));
      }
      ++progress_;
      it = inflight_.erase(it);
    } else {
      ++it;
    }
  }
}

void Pe::ControllerIssue(int64_t cycle) {
  if (queue_.empty()) return;
  VecOp* op = queue_.front();
  bool ok = false;
  switch (op->unit) {
    case VectorUnit::kVau:
      ok = vau_.size() < 2;
      if (ok) vau_.push_back(op);
      break;
    case VectorUnit::kVsldu:
      ok = vsldu_.size() < 2;
      if (ok) vsldu_.push_back(op);
      break;
    case VectorUnit::kVlsu: {
      int generating = 0;
      for (VecOp* v : vlsu_) generating += v->words_generated < v->words;
      ok = generating < 2;
      if (ok) vlsu_.push_back(op);
      break;
    }
  }
  if (!ok) return;
  op->rec.issued = cycle;
  queue_.pop_front();
  ++progress_;
  if (log_->enabled()) {
    log_->Log(cycle, absl::StrCat("ctrl", index_), "issue",
              absl::StrCat(MnemonicOf(op->in.op, op->in.eew), " #", op->id));
  }
}

absl::StatusOr<std::unique_ptr<Pe::VecOp>> Pe::Accept(const Instruction& in,
                                                      int64_t cycle) {
  auto op = std::make_unique<VecOp>();
  op->id = next_id_++;
  op->pc = pc_;
  op->in = in;
  op->unit = UnitOf(in.op);
  op->vtype = csr_.vtype;
  op->vl = csr_.vl;
  op->rec.id = op->id;
  op->rec.pc = pc_;
  op->rec.op = in.op;
  op->rec.accepted = cycle;
  if (in.rs1 >= 0) {
    if (ReadsFloatScalar(in.op)) {
      op->scalar = f_[in.rs1];
    } else {
      op->base = x_[in.rs1];
    }
  }
  if (in.rs2 >= 0) op->stride = static_cast<int64_t>(x_[in.rs2]);

  const int cw = layout_.chunk_bytes();
  const InstrClass cls = ClassOf(in.op);
  const ElementWidth sew = csr_.vtype.sew;
  op->ew = (cls == InstrClass::kLoad || cls == InstrClass::kStore) ? in.eew
                                                                    : sew;
  if ((AddrModeOf(in.op) == AddrMode::kStrided ||
       AddrModeOf(in.op) == AddrMode::kIndexed) &&
      sew != ElementWidth::kE64) {
    return Fault(op.get(), "strided and indexed accesses need SEW=64");
  }
  const bool narrow = sew == ElementWidth::kE8 || sew == ElementWidth::kE16;
  if ((cls == InstrClass::kArithVV || cls == InstrClass::kArithVF ||
       cls == InstrClass::kFma || cls == InstrClass::kReduction) &&
      narrow) {
    return Fault(op.get(), absl::StrFormat(
                               "floating-point op unsupported at e%d",
                               SewBits(sew)));
  }
  if (cls == InstrClass::kWideningSdotp && (!narrow || op->vl % 2 != 0)) {
    return Fault(op.get(),
                 "sum of dot products needs e8/e16 and an even vl");
  }
  op->bytes = op->vl * SewBytes(op->ew);
  op->n_chunks = CeilDiv(op->bytes, cw);

  std::vector<std::pair<int, int>> dests;  // (chunk, slot)
  std::vector<int> reads;
  auto group_slot = [&](int base, int chunk) -> absl::StatusOr<int> {
    const int s = GroupSlot(base, chunk);
    if (base < 0 || s >= num_slots_) {
      return Fault(op.get(), "register group extends past v31");
    }
    return s;
  };
#define VC_SLOT(var, base, chunk)                 \
  int var;                                        \
  {                                               \
    auto _s = group_slot(base, chunk);            \
    if (!_s.ok()) return _s.status();             \
    var = *_s;                                    \
  }
  switch (op->unit) {
    case VectorUnit::kVau:
      if (cls == InstrClass::kReduction) {
        for (int c = 0; c < op->n_chunks; ++c) {
          VC_SLOT(s, in.vs2, c);
          reads.push_back(s);
        }
        if (op->vl > 0) {
          VC_SLOT(s1, in.vs1, 0);
          VC_SLOT(d, in.vd, 0);
          reads.push_back(s1);
          dests.push_back({0, d});
        }
        op->reducer = std::make_unique<LaneReducer>(cw / SewBytes(sew), sew);
      } else {
        std::vector<int> srcs = in.VectorSources();
        for (int c = 0; c < op->n_chunks; ++c) {
          for (int r : srcs) {
            VC_SLOT(s, r, c);
            reads.push_back(s);
          }
          VC_SLOT(d, in.vd, c);
          dests.push_back({c, d});
        }
      }
      break;
    case VectorUnit::kVlsu: {
      if (AddrModeOf(in.op) == AddrMode::kUnitStride && op->base % 8 != 0) {
        return Fault(op.get(),
                     absl::StrFormat("unit-stride base 0x%x not 8-byte aligned",
                                     op->base));
      }
      op->words = CeilDiv(op->bytes, 8);
      op->next_word.resize(cfg_.vlsu_ports);
      for (int p = 0; p < cfg_.vlsu_ports; ++p) op->next_word[p] = p;
      for (int c = 0; c < op->n_chunks; ++c) {
        VC_SLOT(s, in.vd, c);
        if (op->IsLoad()) {
          dests.push_back({c, s});
        } else {
          reads.push_back(s);
        }
        if (op->NeedsIndex()) {
          VC_SLOT(ix, in.vs2, c);
          reads.push_back(ix);
        }
      }
      break;
    }
    case VectorUnit::kVsldu: {
      const int64_t ob = in.imm * SewBytes(sew);
      const bool down = in.op == Opcode::kVslidedownVI;
      if (ob < op->bytes) {
        if (down) {
          op->src_lo = static_cast<int>(ob / cw);
          op->src_hi = op->n_chunks;
          op->dst_lo = 0;
        } else {
          op->src_lo = 0;
          op->src_hi = CeilDiv(op->bytes - ob, cw);
          op->dst_lo = static_cast<int>(ob / cw);
        }
        op->dst_hi = op->n_chunks;
      } else if (down) {
        op->dst_lo = 0;
        op->dst_hi = op->n_chunks;  // all-zero result
      }
      op->next_src = op->src_lo;
      op->next_dst = op->dst_lo;
      for (int c = op->src_lo; c < op->src_hi; ++c) {
        VC_SLOT(s, in.vs2, c);
        reads.push_back(s);
      }
      for (int c = op->dst_lo; c < op->dst_hi; ++c) {
        VC_SLOT(d, in.vd, c);
        dests.push_back({c, d});
      }
      break;
    }
  }
#undef VC_SLOT

  op->dst_slot.assign(op->n_chunks, -1);
  op->written_at.assign(op->n_chunks, -2);
  op->slot_dst.assign(num_slots_, -1);
  op->slot_reads.assign(num_slots_, 0);
  op->expected.assign(num_slots_, -1);
  for (int s : reads) {
    ++op->slot_reads[s];
    ++op->reads_remaining;
    op->expected[s] = last_writer_[s];
  }
  for (auto [c, s] : dests) {
    op->dst_slot[c] = s;
    op->written_at[c] = -1;
    op->slot_dst[s] = static_cast<int16_t>(c);
    ++op->dst_remaining;
    last_writer_[s] = op->id;
  }
  return op;
}

absl::Status Pe::ScalarStep(int64_t cycle) {
  if (pc_ >= static_cast<int>(program_->code.size())) return absl::OkStatus();
  const Instruction& in = program_->code[pc_];
  auto xbusy = [&](int r) { return r > 0 && x_busy_[r] > 0; };
  // Operand interlocks on pending scalar loads.
  if (IsVector(in.op)) {
    if (in.rs1 >= 0 && (ReadsFloatScalar(in.op) ? f_busy_[in.rs1] > 0
                                                 : xbusy(in.rs1))) {
      return absl::OkStatus();
    }
    if (in.rs2 >= 0 && xbusy(in.rs2)) return absl::OkStatus();
    if (in.op == Opcode::kVsetvli && in.rd >= 0 && xbusy(in.rd)) {
      return absl::OkStatus();
    }
  } else {
    const bool fsrc = in.op == Opcode::kFsd;
    if (in.rs1 >= 0 && xbusy(in.rs1)) return absl::OkStatus();
    if (in.rs2 >= 0 && (fsrc ? f_busy_[in.rs2] > 0 : xbusy(in.rs2))) {
      return absl::OkStatus();
    }
    if (in.rd >= 0 &&
        (WritesFloatScalar(in.op) ? f_busy_[in.rd] > 0 : xbusy(in.rd))) {
      return absl::OkStatus();
    }
  }

  auto retire = [&](int next_pc) {
    pc_ = next_pc;
    ++stats_.instructions;
    ++progress_;
    return absl::OkStatus();
  };
  auto wx = [&](int rd, uint64_t v) {
    if (rd > 0) x_[rd] = v;
  };

  if (in.op == Opcode::kVsetvli) {
    int64_t avl;
    if (in.rs1 > 0) {
      avl = static_cast<int64_t>(x_[in.rs1]);
    } else {
      avl = in.rd > 0 ? INT64_MAX : csr_.vl;
    }
    ApplyVsetvli(std::max<int64_t>(avl, 0), in.eew, in.lmul, cfg_, &csr_);
    wx(in.rd, static_cast<uint64_t>(csr_.vl));
    return retire(pc_ + 1);
  }
  if (IsVector(in.op)) {
    if (static_cast<int>(queue_.size()) >= cfg_.controller_queue) {
      ++stats_.dispatch_stalls;
      return absl::OkStatus();
    }
    if (IsVectorMemory(in.op) &&
        (!scalar_loads_.empty() || scalar_stores_ > 0 ||
         ports_[cfg_.vlsu_ports])) {
      ++stats_.dispatch_stalls;
      return absl::OkStatus();
    }
    auto op = Accept(in, cycle);
    if (!op.ok()) return op.status();
    VecOp* raw = op->get();
    if (raw->unit == VectorUnit::kVlsu) ++vector_mem_inflight_;
    inflight_[raw->id] = std::move(*op);
    queue_.push_back(raw);
    ++stats_.vector_accepted;
    if (log_->enabled()) {
      log_->Log(cycle, absl::StrCat("ctrl", index_), "accept",
                absl::StrCat(MnemonicOf(in.op, in.eew), " #", raw->id));
    }
    return retire(pc_ + 1);
  }
  if (IsScalarMemory(in.op)) {
    if (vector_mem_inflight_ > 0 || ports_[cfg_.vlsu_ports]) {
      return absl::OkStatus();
    }
    const uint64_t addr = x_[in.rs1] + in.imm;
    int size = 8;
    if (in.op == Opcode::kFlw) size = 4;
    if (in.op == Opcode::kFlh) size = 2;
    if (addr % size != 0 || addr + size > static_cast<uint64_t>(cfg_.l1_bytes())) {
      return Fault(nullptr, absl::StrFormat(
                                "scalar access to 0x%x outside L1 or misaligned",
                                addr));
    }
    L1Request r;
    r.initiator = index_ * num_ports() + cfg_.vlsu_ports;
    r.addr = addr & ~uint64_t{7};
    r.tag = port_seq_[cfg_.vlsu_ports]++;
    if (in.op == Opcode::kSd || in.op == Opcode::kFsd) {
      r.write = true;
      r.wdata = in.op == Opcode::kSd ? x_[in.rs2] : f_[in.rs2];
      ++scalar_stores_;
    } else {
      const bool fp = WritesFloatScalar(in.op);
      scalar_loads_.push_back({in.rd, fp, size, static_cast<int>(addr & 7)});
      if (fp) {
        ++f_busy_[in.rd];
      } else {
        ++x_busy_[in.rd];
      }
    }
    ports_[cfg_.vlsu_ports] = r;
    return retire(pc_ + 1);
  }
  switch (in.op) {
    case Opcode::kLi:
    case Opcode::kLa:
      wx(in.rd, static_cast<uint64_t>(in.imm));
      break;
    case Opcode::kAdd:
      wx(in.rd, x_[in.rs1] + x_[in.rs2]);
      break;
    case Opcode::kSub:
      wx(in.rd, x_[in.rs1] - x_[in.rs2]);
      break;
    case Opcode::kMul:
      wx(in.rd, x_[in.rs1] * x_[in.rs2]);
      break;
    case Opcode::kAddi:
      wx(in.rd, x_[in.rs1] + static_cast<uint64_t>(in.imm));
      break;
    case Opcode::kSlli:
      wx(in.rd, x_[in.rs1] << (in.imm & 63));
      break;
    case Opcode::kBnez:
      return retire(x_[in.rs1] != 0 ? static_cast<int>(in.imm) : pc_ + 1);
    case Opcode::kBlt:
      return retire(static_cast<int64_t>(x_[in.rs1]) <
                            static_cast<int64_t>(x_[in.rs2])
                        ? static_cast<int>(in.imm)
                        : pc_ + 1);
    case Opcode::kJ:
      return retire(static_cast<int>(in.imm));
    default:
      return Fault(nullptr, "instruction not executable by the scalar core");
  }
  return retire(pc_ + 1);
}

}  // namespace vcluster
