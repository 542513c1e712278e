// Copyright 2026 The mi6sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "mi6/llc.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace mi6 {
namespace {

std::string hex(uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

bool any(const std::vector<bool>& v) {
  return std::find(v.begin(), v.end(), true) != v.end();
}

}  // namespace

Llc::Llc(const SimConfig& cfg, const Variant& variant)
    : cfg_(cfg),
      variant_(variant),
      n_(cfg.n_cores),
      banks_(variant.has(Flag::kMiss) ? cfg.miss_banks : 1),
      latency_(cfg.llc_pipeline_latency + (variant.has(Flag::kArb) ? 8 : 0)),
      seed_(derive_seed(cfg.seed, "llc")),
      dq_("llc.dq", effective_llc_mshrs(cfg, variant)) {
  const uint32_t total = effective_llc_mshrs(cfg, variant);
  slice_ = variant.has(Flag::kMshrPartition) ? total / n_ : total;
  if (slice_ == 0) throw ConfigError("LLC MSHR slice is empty");
  Line blank;
  blank.owners.assign(n_, Msi::kI);
  lines_.assign(size_t{cfg.llc_sets} * cfg.llc_ways, blank);
  Mshr m;
  m.dg_send.assign(n_, false);
  m.dg_await.assign(n_, false);
  mshrs_.assign(total, m);
  dg_in_pipeline_.assign(n_, 0);
  if (variant.has(Flag::kSplitUq)) {
    for (uint32_t c = 0; c < n_; ++c) uq_.emplace_back("llc.uq" + std::to_string(c), slice_);
  } else {
    uq_.emplace_back("llc.uq", total);
  }
  core_stats_.assign(n_, LlcCoreStats{});
}

size_t Llc::set_base(LineAddress a) const {
  return size_t{llc_index(a, cfg_, variant_)} * cfg_.llc_ways;
}

Llc::Line* Llc::find(LineAddress a) {
  const size_t base = set_base(a);
  for (uint32_t w = 0; w < cfg_.llc_ways; ++w) {
    Line& l = lines_[base + w];
    if (l.valid && l.tag == a) return &l;
  }
  return nullptr;
}

const Llc::Line* Llc::find(LineAddress a) const { return const_cast<Llc*>(this)->find(a); }

Fifo<uint32_t>& Llc::uq_for(uint32_t core) { return uq_.size() == 1 ? uq_[0] : uq_[core]; }

std::optional<uint32_t> Llc::mshr_owner(uint32_t i) const {
  if (mshrs_[i].phase == MshrPhase::kFree) return std::nullopt;
  return mshrs_[i].core;
}

size_t Llc::busy_mshrs() const {
  return static_cast<size_t>(std::count_if(mshrs_.begin(), mshrs_.end(), [](const Mshr& m) {
    return m.phase != MshrPhase::kFree;
  }));
}

size_t Llc::uq_occupancy() const {
  size_t n = 0;
  for (const auto& q : uq_) n += q.occupancy();
  return n;
}

bool Llc::idle() const {
  return busy_mshrs() == 0 && pipeline_.empty() && dq_.occupancy() == 0 && uq_occupancy() == 0;
}

std::optional<uint32_t> Llc::allocatable(uint32_t core, LineAddress addr) const {
  for (const auto& m : mshrs_) {
    if (m.phase != MshrPhase::kFree && m.addr == addr) return std::nullopt;
  }
  uint32_t lo = 0;
  uint32_t hi = static_cast<uint32_t>(mshrs_.size());
  if (variant_.has(Flag::kMshrPartition)) {
    lo = core * slice_;
    hi = lo + slice_;
  }
  const uint64_t bank = addr.value & (banks_ - 1);
  for (uint32_t i = lo; i < hi; ++i) {
    if (mshrs_[i].phase == MshrPhase::kFree && i % banks_ == bank) return i;
  }
  return std::nullopt;
}

std::optional<Candidate> Llc::merge_per_core(const std::vector<Candidate>& pending) {
  std::optional<Candidate> best;
  for (const auto& c : pending) {
    if (!best || std::tie(c.kind, c.age, c.mshr) < std::tie(best->kind, best->age, best->mshr)) {
      best = c;
    }
  }
  return best;
}

std::optional<Candidate> Llc::select(uint64_t now, uint32_t n_cores, bool round_robin,
                                     const std::vector<std::optional<Candidate>>& merged) {
  if (round_robin) return merged[now % n_cores];
  std::optional<Candidate> best;
  for (const auto& c : merged) {
    if (!c) continue;
    if (!best || c->kind < best->kind || (c->kind == best->kind && c->core < best->core)) best = c;
  }
  return best;
}

void Llc::free_mshr(uint32_t i) {
  Mshr& m = mshrs_[i];
  m.phase = MshrPhase::kFree;
  m.way.reset();
  std::fill(m.dg_send.begin(), m.dg_send.end(), false);
  std::fill(m.dg_await.begin(), m.dg_await.end(), false);
  m.victim_dg = false;
  m.needs_writeback = false;
  m.wb_sent = false;
  m.retry_bit = false;
  m.retry_pending = false;
  m.miss_counted = false;
  m.dram_ready = false;
  m.wb_data = LineData{};
  m.dram_data = LineData{};
  m.resp_data = LineData{};
}

// ---------------------------------------------------------------------------

void Llc::step(uint64_t now, std::vector<CoreLink>& links, Fifo<DramRequest>& to_dram,
               Fifo<DramResponse>& from_dram, EventLog& log) {
  absorb_purge(now, links);
  absorb_dram(from_dram);
  pipeline_exit(now, log);
  std::vector<bool> claimed(n_, false);
  downgrade_scan(now, links, claimed, log);
  uq_drain(now, links, claimed, log);
  dq_drain(now, to_dram, log);
  arbitrate(now, links, log);

  stats_.max_dq_occupancy = std::max<uint64_t>(stats_.max_dq_occupancy, dq_.occupancy());
  stats_.max_busy_mshrs = std::max<uint64_t>(stats_.max_busy_mshrs, busy_mshrs());
  if (variant_.all_strong() && 2 * mshrs_.size() <= cfg_.dram_max_inflight &&
      dq_.occupancy() > 2) {
    throw SimError(now, me(), "DQ occupancy " + std::to_string(dq_.occupancy()) +
                                  " exceeds 2 under partitioned LLC");
  }
}

void Llc::commit() {
  for (auto& q : uq_) q.commit();
  dq_.commit();
}

void Llc::absorb_purge(uint64_t now, std::vector<CoreLink>& links) {
  for (uint32_t c = 0; c < n_; ++c) {
    Fifo<DowngradeResponse>& port = links[c].purge_evict;
    if (port.empty()) continue;
    // Keep purge evictions behind this core's older downgrade responses.
    if (links[c].downgrade_resp.occupancy() != 0 || dg_in_pipeline_[c] != 0) continue;
    EventLog quiet;
    while (!port.empty()) apply_downgrade(port.dequeue(), now, false, quiet);
  }
}

void Llc::absorb_dram(Fifo<DramResponse>& from_dram) {
  while (!from_dram.empty()) {
    DramResponse r = from_dram.dequeue();
    Mshr& m = mshrs_.at(r.mshr);
    if (m.phase != MshrPhase::kWaitDram || m.addr != r.addr) {
      throw SimError(0, me(), "DRAM response for MSHR " + std::to_string(r.mshr) +
                                  " not waiting on " + hex(r.addr.value));
    }
    m.dram_ready = true;
    m.dram_data = r.data;
  }
}

void Llc::pipeline_exit(uint64_t now, EventLog& log) {
  while (!pipeline_.empty() && pipeline_.front().exit_at <= now) {
    PipeItem item = pipeline_.front();
    pipeline_.pop_front();
    if (item.exit_at < now) throw SimError(now, me(), "pipeline item overdue");
    switch (item.kind) {
      case ItemKind::kUpgrade:
      case ItemKind::kRetry:
        lookup_request(item.mshr, now, log);
        break;
      case ItemKind::kDramResponse: {
        Mshr& m = mshrs_[item.mshr];
        Line& l = lines_[*m.way];
        l.valid = true;
        l.dirty = false;
        l.tag = m.addr;
        l.data = m.dram_data;
        std::fill(l.owners.begin(), l.owners.end(), Msi::kI);
        log.add(now, me(), "fill", std::to_string(item.mshr));
        grant(item.mshr, now, log);
        break;
      }
      case ItemKind::kDowngradeResponse:
        --dg_in_pipeline_[item.dg.core];
        apply_downgrade(item.dg, now, true, log);
        break;
    }
  }
}

void Llc::lookup_request(uint32_t i, uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  if (m.way) {
    const Line& l = lines_[*m.way];
    if (l.valid && l.tag == m.addr) hit_path(i, now, log);
    else if (l.valid) victim_path(i, now, log);
    else enqueue_dq(i, now, log);
    return;
  }
  const size_t base = set_base(m.addr);
  for (uint32_t w = 0; w < cfg_.llc_ways; ++w) {
    Line& l = lines_[base + w];
    if (!(l.valid && l.tag == m.addr)) continue;
    if (l.locked_by && *l.locked_by != i) {
      m.phase = MshrPhase::kWaitRetry;
      mark_retry(m);
      log.add(now, me(), "retry_locked", std::to_string(i));
      return;
    }
    l.locked_by = i;
    m.way = base + w;
    hit_path(i, now, log);
    return;
  }
  if (!m.miss_counted) {
    m.miss_counted = true;
    ++core_stats_[m.core].llc_misses;
  }
  std::vector<uint32_t> open;
  for (uint32_t w = 0; w < cfg_.llc_ways; ++w) {
    if (!lines_[base + w].locked_by) open.push_back(w);
  }
  if (open.empty()) {
    m.phase = MshrPhase::kWaitRetry;
    mark_retry(m);
    log.add(now, me(), "retry_set_locked", std::to_string(i));
    return;
  }
  uint32_t way = open[0];
  auto invalid = std::find_if(open.begin(), open.end(),
                              [&](uint32_t w) { return !lines_[base + w].valid; });
  if (invalid != open.end()) {
    way = *invalid;
  } else {
    way = open[hash_words(seed_, now, base / cfg_.llc_ways) % open.size()];
  }
  m.way = base + way;
  lines_[*m.way].locked_by = i;
  if (lines_[*m.way].valid) victim_path(i, now, log);
  else enqueue_dq(i, now, log);
}

void Llc::hit_path(uint32_t i, uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  const Line& l = lines_[*m.way];
  const Msi to = m.want == Msi::kM ? Msi::kI : Msi::kS;
  bool needed = false;
  for (uint32_t j = 0; j < n_; ++j) {
    const bool need = j != m.core && l.owners[j] > to;
    m.dg_send[j] = need;
    m.dg_await[j] = need;
    needed |= need;
  }
  if (!needed) {
    grant(i, now, log);
    return;
  }
  m.dg_addr = m.addr;
  m.dg_to = to;
  m.victim_dg = false;
  m.phase = MshrPhase::kWaitDowngrade;
  log.add(now, me(), "need_downgrade", std::to_string(i));
}

void Llc::victim_path(uint32_t i, uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  const Line& l = lines_[*m.way];
  bool needed = false;
  for (uint32_t j = 0; j < n_; ++j) {
    const bool need = l.owners[j] != Msi::kI;
    m.dg_send[j] = need;
    m.dg_await[j] = need;
    needed |= need;
  }
  if (!needed) {
    complete_replacement(i, now, log);
    return;
  }
  m.dg_addr = l.tag;
  m.dg_to = Msi::kI;
  m.victim_dg = true;
  m.phase = MshrPhase::kWaitDowngrade;
  log.add(now, me(), "back_invalidate", std::to_string(i) + ":" + hex(l.tag.value));
}

void Llc::complete_replacement(uint32_t i, uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  Line& l = lines_[*m.way];
  if (l.dirty) {
    m.needs_writeback = true;
    m.wb_sent = false;
    m.wb_addr = l.tag;
    m.wb_data = l.data;
  }
  log.add(now, me(), "evict", hex(l.tag.value) + (l.dirty ? ":dirty" : ":clean"));
  l.valid = false;
  l.dirty = false;
  l.data = LineData{};
  std::fill(l.owners.begin(), l.owners.end(), Msi::kI);
  enqueue_dq(i, now, log);
}

void Llc::enqueue_dq(uint32_t i, uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  m.retry_bit = variant_.has(Flag::kDqRetry) && m.needs_writeback;
  m.phase = MshrPhase::kInDq;
  dq_.enqueue(i);
  log.add(now, me(), "dq_enq", std::to_string(i));
}

void Llc::grant(uint32_t i, uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  Line& l = lines_[*m.way];
  if (!l.valid || l.tag != m.addr) throw SimError(now, me(), "grant without resident line");
  l.owners[m.core] = std::max(l.owners[m.core], m.want);
  m.resp_data = l.data;
  m.phase = MshrPhase::kInUq;
  uq_for(m.core).enqueue(i);
  log.add(now, me(), "uq_enq", std::to_string(i));
}

void Llc::apply_downgrade(const DowngradeResponse& r, uint64_t now, bool via_pipeline,
                          EventLog& log) {
  Line* l = find(r.addr);
  if (!l) {
    throw SimError(now, me(), "downgrade response from core " + std::to_string(r.core) +
                                  " for absent line " + hex(r.addr.value));
  }
  Msi& owner = l->owners[r.core];
  if (!r.has_data && r.to == Msi::kI && owner == Msi::kM) {
    // A clean eviction overtaken by this core's own S->M upgrade.
    log.add(now, me(), "stale_evict", hex(r.addr.value));
    return;
  }
  if (r.has_data) {
    if (owner != Msi::kM) {
      throw SimError(now, me(), "dirty data from non-owner core " + std::to_string(r.core));
    }
    l->data = r.data;
    l->dirty = true;
  }
  owner = std::min(owner, r.to);
  log.add(now, me(), "dg_resp", std::to_string(r.core) + ":" + hex(r.addr.value));

  for (uint32_t i = 0; i < mshrs_.size(); ++i) {
    Mshr& m = mshrs_[i];
    if (m.phase != MshrPhase::kWaitDowngrade || m.dg_addr != r.addr) continue;
    if (!m.dg_await[r.core] || owner > m.dg_to) continue;
    m.dg_await[r.core] = false;
    m.dg_send[r.core] = false;
    if (any(m.dg_await)) continue;
    if (!via_pipeline) {
      m.phase = MshrPhase::kWaitRetry;
      mark_retry(m);
    } else if (m.victim_dg) {
      complete_replacement(i, now, log);
    } else {
      grant(i, now, log);
    }
  }
}

bool Llc::scanner_try(uint32_t i, std::vector<CoreLink>& links, std::vector<bool>& claimed,
                      uint64_t now, EventLog& log) {
  Mshr& m = mshrs_[i];
  uint32_t j = 0;
  while (j < n_ && !m.dg_send[j]) ++j;
  if (j == n_) return false;
  if (claimed[j] || !links[j].to_l1.can_enqueue()) return false;
  ToL1 msg;
  msg.kind = ToL1::Kind::kDowngradeRequest;
  msg.addr = m.dg_addr;
  msg.state = m.dg_to;
  links[j].to_l1.enqueue(msg);
  claimed[j] = true;
  m.dg_send[j] = false;
  log.add(now, me(), "dg_req", std::to_string(i) + "->" + std::to_string(j));
  return true;
}

void Llc::downgrade_scan(uint64_t now, std::vector<CoreLink>& links, std::vector<bool>& claimed,
                         EventLog& log) {
  auto wants_send = [&](const Mshr& m) {
    return m.phase == MshrPhase::kWaitDowngrade && any(m.dg_send);
  };
  if (!variant_.has(Flag::kDupDowngrade)) {
    for (uint32_t i = 0; i < mshrs_.size(); ++i) {
      if (wants_send(mshrs_[i])) {
        scanner_try(i, links, claimed, now, log);  // a blocked head stalls the scanner
        return;
      }
    }
    return;
  }
  for (uint32_t c = 0; c < n_; ++c) {
    for (uint32_t i = 0; i < mshrs_.size(); ++i) {
      if (mshrs_[i].core == c && wants_send(mshrs_[i])) {
        scanner_try(i, links, claimed, now, log);
        break;
      }
    }
  }
}

void Llc::uq_drain(uint64_t now, std::vector<CoreLink>& links, std::vector<bool>& claimed,
                   EventLog& log) {
  auto send = [&](Fifo<uint32_t>& q) {
    if (q.empty()) return;
    const uint32_t i = q.front();
    Mshr& m = mshrs_[i];
    const uint32_t c = m.core;
    if (claimed[c] || !links[c].to_l1.can_enqueue()) return;
    ToL1 msg;
    msg.kind = ToL1::Kind::kUpgradeResponse;
    msg.addr = m.addr;
    msg.state = m.want;
    msg.data = m.resp_data;
    links[c].to_l1.enqueue(msg);
    claimed[c] = true;
    q.dequeue();
    if (m.way) lines_[*m.way].locked_by.reset();
    log.add(now, me(), "up_resp", std::to_string(i) + "->" + std::to_string(c));
    free_mshr(i);
  };
  for (auto& q : uq_) send(q);
}

void Llc::dq_drain(uint64_t now, Fifo<DramRequest>& to_dram, EventLog& log) {
  if (dq_.empty() || !to_dram.can_enqueue()) return;
  const uint32_t i = dq_.front();
  Mshr& m = mshrs_[i];
  if (m.needs_writeback && !m.wb_sent) {
    to_dram.enqueue(DramRequest{true, m.wb_addr, i, m.core, m.wb_data});
    m.wb_sent = true;
    log.add(now, me(), "dq_wb", std::to_string(i));
    if (!m.retry_bit) return;  // the read follows next cycle from the head
    dq_.dequeue();
    m.needs_writeback = false;
    m.wb_sent = false;
    m.retry_bit = false;
    m.phase = MshrPhase::kWaitRetry;
    mark_retry(m);
    ++core_stats_[m.core].dq_retries;
    return;
  }
  to_dram.enqueue(DramRequest{false, m.addr, i, m.core, LineData{}});
  dq_.dequeue();
  m.needs_writeback = false;
  m.wb_sent = false;
  m.phase = MshrPhase::kWaitDram;
  log.add(now, me(), "dq_read", std::to_string(i));
}

void Llc::arbitrate(uint64_t now, std::vector<CoreLink>& links, EventLog& log) {
  std::vector<std::vector<Candidate>> pend(n_);
  for (uint32_t i = 0; i < mshrs_.size(); ++i) {
    const Mshr& m = mshrs_[i];
    if (m.phase == MshrPhase::kFree) continue;
    if (m.dram_ready) pend[m.core].push_back({CandidateKind::kDramResponse, m.core, i});
    if (m.retry_pending) pend[m.core].push_back({CandidateKind::kRetry, m.core, i, m.retry_seq});
  }
  bool upgrades_blocked = false;
  bool first_upgrade = true;
  for (uint32_t c = 0; c < n_; ++c) {
    if (!links[c].downgrade_resp.empty()) {
      pend[c].push_back({CandidateKind::kDowngradeResponse, c, 0});
    }
    if (links[c].upgrade_req.empty()) continue;
    std::optional<uint32_t> slot;
    if (links[c].purge_evict.occupancy() == 0) {
      slot = allocatable(c, links[c].upgrade_req.front().addr);
    }
    if (slot) {
      pend[c].push_back({CandidateKind::kUpgradeRequest, c, *slot});
    } else {
      ++core_stats_[c].mshr_stall_cycles;
      // One overwhelmed bank stalls the whole banked MSHR structure.
      if (first_upgrade && variant_.has(Flag::kMiss)) upgrades_blocked = true;
    }
    first_upgrade = false;
  }
  std::vector<std::optional<Candidate>> merged(n_);
  for (uint32_t c = 0; c < n_; ++c) {
    if (upgrades_blocked) {
      std::erase_if(pend[c], [](const Candidate& k) {
        return k.kind == CandidateKind::kUpgradeRequest;
      });
    }
    merged[c] = merge_per_core(pend[c]);
  }

  const bool rr = variant_.has(Flag::kRrArbiter);
  const std::optional<Candidate> sel = select(now, n_, rr, merged);
  bool others = false;
  for (uint32_t c = 0; c < n_; ++c) {
    if (!merged[c]) continue;
    others = true;
    if (!sel || sel->core != c) ++core_stats_[c].arbiter_wait_cycles;
  }
  if (rr && !sel && others) ++stats_.idle_grants;
  if (!sel) return;

  if (!pipeline_.empty() && pipeline_.back().exit_at >= now + latency_) {
    throw SimError(now, me(), "pipeline refused a grant");
  }
  PipeItem item;
  item.exit_at = now + latency_;
  item.mshr = sel->mshr;
  const uint32_t c = sel->core;
  ++core_stats_[c].grants;
  switch (sel->kind) {
    case CandidateKind::kDramResponse:
      item.kind = ItemKind::kDramResponse;
      mshrs_[sel->mshr].dram_ready = false;
      mshrs_[sel->mshr].phase = MshrPhase::kInPipeline;
      break;
    case CandidateKind::kDowngradeResponse:
      item.kind = ItemKind::kDowngradeResponse;
      item.dg = links[c].downgrade_resp.dequeue();
      ++dg_in_pipeline_[c];
      break;
    case CandidateKind::kRetry:
      item.kind = ItemKind::kRetry;
      mshrs_[sel->mshr].retry_pending = false;
      mshrs_[sel->mshr].phase = MshrPhase::kInPipeline;
      break;
    case CandidateKind::kUpgradeRequest: {
      item.kind = ItemKind::kUpgrade;
      const UpgradeRequest req = links[c].upgrade_req.dequeue();
      Mshr& m = mshrs_[sel->mshr];
      m.phase = MshrPhase::kInPipeline;
      m.core = c;
      m.addr = req.addr;
      m.want = req.want;
      log.add(now, me(), "mshr_alloc", std::to_string(sel->mshr) + ":" + std::to_string(c));
      break;
    }
  }
  log.add(now, me(), "grant", std::to_string(c) + ":" + std::to_string(static_cast<int>(sel->kind)));
  pipeline_.push_back(item);
}

// ---------------------------------------------------------------------------

std::optional<DirectoryView> Llc::lookup(LineAddress a) const {
  const Line* l = find(a);
  if (!l) return std::nullopt;
  return DirectoryView{true, l->dirty, l->owners, l->locked_by, l->data};
}

std::vector<LineAddress> Llc::resident_lines(SetIndex set) const {
  std::vector<LineAddress> out;
  for (uint32_t w = 0; w < cfg_.llc_ways; ++w) {
    const Line& l = lines_[size_t{set} * cfg_.llc_ways + w];
    if (l.valid) out.push_back(l.tag);
  }
  return out;
}

std::optional<LineData> Llc::peek(LineAddress a) const {
  for (auto it = pipeline_.rbegin(); it != pipeline_.rend(); ++it) {
    if (it->kind == ItemKind::kDowngradeResponse && it->dg.has_data && it->dg.addr == a) {
      return it->dg.data;
    }
  }
  if (const Line* l = find(a)) return l->data;
  for (const auto& m : mshrs_) {
    if (m.phase != MshrPhase::kFree && m.needs_writeback && !m.wb_sent && m.wb_addr == a) {
      return m.wb_data;
    }
  }
  return std::nullopt;
}

void Llc::update_word(LineAddress a, size_t word, uint64_t value) {
  for (auto& item : pipeline_) {
    if (item.kind == ItemKind::kDowngradeResponse && item.dg.addr == a) item.dg.data[word] = value;
  }
  if (Line* l = find(a)) l->data[word] = value;
  for (auto& m : mshrs_) {
    if (m.phase == MshrPhase::kFree) continue;
    if (m.addr == a) {
      m.dram_data[word] = value;
      m.resp_data[word] = value;
    }
    if (m.needs_writeback && m.wb_addr == a) m.wb_data[word] = value;
  }
}

bool Llc::region_busy(RegionId r) const {
  for (const auto& m : mshrs_) {
    if (m.phase == MshrPhase::kFree) continue;
    if (dram_region(m.addr, cfg_) == r) return true;
    if (m.needs_writeback && dram_region(m.wb_addr, cfg_) == r) return true;
    if (m.way && lines_[*m.way].valid && dram_region(lines_[*m.way].tag, cfg_) == r) return true;
  }
  for (const auto& item : pipeline_) {
    if (item.kind == ItemKind::kDowngradeResponse && dram_region(item.dg.addr, cfg_) == r) {
      return true;
    }
  }
  return false;
}

size_t Llc::scrub_region(RegionId r, uint64_t now) {
  if (region_busy(r)) {
    throw SimError(now, me(), "scrub of region " + std::to_string(r.value) +
                                  " while the LLC still references it");
  }
  size_t n = 0;
  for (auto& l : lines_) {
    if (!l.valid || dram_region(l.tag, cfg_) != r) continue;
    l.valid = false;
    l.dirty = false;
    l.data = LineData{};
    std::fill(l.owners.begin(), l.owners.end(), Msi::kI);
    ++n;
  }
  return n;
}

void Llc::check_invariants(uint64_t now) const {
  for (size_t idx = 0; idx < lines_.size(); ++idx) {
    const Line& l = lines_[idx];
    if (!l.valid) continue;
    const auto m = std::count(l.owners.begin(), l.owners.end(), Msi::kM);
    const auto s = std::count(l.owners.begin(), l.owners.end(), Msi::kS);
    if (m > 1 || (m == 1 && s > 0)) {
      throw SimError(now, me(), "MSI breach on line " + hex(l.tag.value));
    }
    if (llc_index(l.tag, cfg_, variant_) != idx / cfg_.llc_ways) {
      throw SimError(now, me(), "line " + hex(l.tag.value) + " resident in the wrong set");
    }
  }
  if (variant_.has(Flag::kMshrPartition)) {
    for (uint32_t i = 0; i < mshrs_.size(); ++i) {
      const Mshr& m = mshrs_[i];
      if (m.phase != MshrPhase::kFree && i / slice_ != m.core) {
        throw SimError(now, me(), "MSHR " + std::to_string(i) + " outside its owner's slice");
      }
    }
  }
  for (const auto& q : uq_) {
    if (q.occupancy() > q.capacity()) throw SimError(now, me(), "UQ over capacity");
  }
}

void Llc::inject_downgrade(uint32_t i, uint32_t core, LineAddress addr, uint32_t target) {
  Mshr& m = mshrs_.at(i);
  if (m.phase != MshrPhase::kFree) throw std::logic_error("inject into busy MSHR");
  m.phase = MshrPhase::kWaitDowngrade;
  m.core = core;
  m.addr = addr;
  m.dg_addr = addr;
  m.dg_to = Msi::kI;
  m.dg_send.at(target) = true;
  m.dg_await.at(target) = true;
}

void Llc::inject_response(uint32_t i, uint32_t core, LineAddress addr) {
  Mshr& m = mshrs_.at(i);
  if (m.phase != MshrPhase::kFree) throw std::logic_error("inject into busy MSHR");
  m.phase = MshrPhase::kInUq;
  m.core = core;
  m.addr = addr;
  m.want = Msi::kS;
  uq_for(core).enqueue(i);
}

}  // namespace mi6
