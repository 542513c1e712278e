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


#include "mi6/machine.hpp"

#include <sstream>

namespace mi6 {

std::string stats_csv_header() {
  return "variant,core,cycles,memops,llc_misses,l1_misses,mshr_stall_cycles,"
         "arbiter_wait_cycles,dq_retries,purge_stalls,faults\n";
}

std::string stats_csv_row(const CoreStatsRow& r) {
  std::ostringstream os;
  os << r.variant << ',' << r.core << ',' << r.cycles << ',' << r.memops << ','
     << r.llc_misses << ',' << r.l1_misses << ',' << r.mshr_stall_cycles << ','
     << r.arbiter_wait_cycles << ',' << r.dq_retries << ',' << r.purge_stalls << ','
     << r.faults << '\n';
  return os.str();
}

Machine::Machine(const SimConfig& cfg, const Variant& variant, MachineOptions opts)
    : cfg_(cfg),
      variant_(variant),
      opts_(opts),
      log_(opts.event_log),
      llc_(cfg, variant),
      dram_(cfg),
      to_dram_("llc.to_dram", 2),
      from_dram_("dram.to_llc", cfg.dram_max_inflight) {
  if (auto bad = structural_violations(cfg, variant); !bad.empty()) {
    throw ConfigError(bad.front());
  }
  for (uint32_t c = 0; c < cfg.n_cores; ++c) {
    cores_.emplace_back(c, cfg, variant);
    links_.emplace_back(c, cfg);
  }
}

void Machine::start(uint32_t c, Trace trace, RegionBits bits) {
  check_trace_range(trace, cfg_);
  cores_.at(c).set_bitvector(std::move(bits));
  cores_.at(c).assign_trace(std::move(trace), now());
}

void Machine::tick() {
  const uint64_t t = now();
  auto* performs = opts_.record_performs ? &performs_ : nullptr;
  for (uint32_t c = 0; c < cores_.size(); ++c) cores_[c].step(t, links_[c], log_, performs);
  llc_.step(t, links_, to_dram_, from_dram_, log_);
  dram_.step(t, to_dram_, from_dram_, log_);
  if (hook_) hook_(t);
  for (auto& l : links_) l.commit();
  llc_.commit();
  to_dram_.commit();
  from_dram_.commit();
  if (opts_.invariant_period != 0 && t % opts_.invariant_period == 0) llc_.check_invariants(t);
  clock_.tick();
}

bool Machine::cores_done() const {
  for (const auto& c : cores_) {
    if (c.busy()) return false;
  }
  return true;
}

bool Machine::run(uint64_t max_cycles) {
  while (!cores_done() || (busy_hook_ && busy_hook_())) {
    if (now() >= max_cycles) return false;
    tick();
  }
  return true;
}

uint64_t Machine::peek_word(uint64_t byte_addr) const {
  const LineAddress a = cfg_.line_of(byte_addr);
  const size_t w = (byte_addr >> 3) & (kWordsPerLine - 1);
  for (const auto& c : cores_) {
    if (c.l1_state(a) == Msi::kM) return (*c.l1_data(a))[w];
  }
  std::optional<uint64_t> found;
  for (const auto& l : links_) {
    auto scan = [&](const DowngradeResponse& r) {
      if (r.has_data && r.addr == a) found = r.data[w];
    };
    l.downgrade_resp.for_each(scan);
    l.purge_evict.for_each(scan);
  }
  if (found) return *found;
  if (auto d = llc_.peek(a)) return (*d)[w];
  to_dram_.for_each([&](const DramRequest& r) {
    if (r.is_write && r.addr == a) found = r.data[w];
  });
  if (found) return *found;
  return dram_.read_line(a)[w];
}

void Machine::poke_word(uint64_t byte_addr, uint64_t value) {
  const LineAddress a = cfg_.line_of(byte_addr);
  const size_t w = (byte_addr >> 3) & (kWordsPerLine - 1);
  for (auto& c : cores_) c.l1_write_word(a, w, value);
  for (auto& l : links_) {
    auto upd = [&](DowngradeResponse& r) {
      if (r.addr == a) r.data[w] = value;
    };
    l.downgrade_resp.for_each(upd);
    l.purge_evict.for_each(upd);
    l.to_l1.for_each([&](ToL1& m) {
      if (m.addr == a && m.kind == ToL1::Kind::kUpgradeResponse) m.data[w] = value;
    });
  }
  llc_.update_word(a, w, value);
  to_dram_.for_each([&](DramRequest& r) {
    if (r.is_write && r.addr == a) r.data[w] = value;
  });
  from_dram_.for_each([&](DramResponse& r) {
    if (r.addr == a) r.data[w] = value;
  });
  dram_.update_word(a, w, value);
  LineData line = dram_.read_line(a);
  line[w] = value;
  dram_.write_line(a, line);
}

bool Machine::region_busy(RegionId r) const {
  for (const auto& c : cores_) {
    if (c.l1_has_mshr_in(r)) return true;
  }
  bool busy = false;
  auto scan = [&](const auto& m) { busy |= dram_region(m.addr, cfg_) == r; };
  for (const auto& l : links_) {
    l.upgrade_req.for_each(scan);
    l.downgrade_resp.for_each(scan);
    l.purge_evict.for_each(scan);
    l.to_l1.for_each(scan);
  }
  to_dram_.for_each(scan);
  from_dram_.for_each(scan);
  return busy || llc_.region_busy(r);
}

void Machine::erase_region(RegionId r) {
  if (region_busy(r)) {
    throw SimError(now(), "machine", "erase of region " + std::to_string(r.value) +
                                         " while traffic references it");
  }
  llc_.scrub_region(r, now());
  for (auto& c : cores_) c.l1_invalidate_region(r);
  dram_.erase_region(r);
}

std::vector<CoreStatsRow> Machine::stats_rows() const {
  std::vector<CoreStatsRow> rows;
  for (uint32_t c = 0; c < cores_.size(); ++c) {
    const Core& core = cores_[c];
    const LlcCoreStats& l = llc_.core_stats(c);
    CoreStatsRow r;
    r.variant = variant_.name();
    r.core = c;
    r.cycles = core.finished() ? core.finish_cycle() : now();
    r.memops = core.stats().memops;
    r.llc_misses = l.llc_misses;
    r.l1_misses = core.stats().l1_misses;
    r.mshr_stall_cycles = l.mshr_stall_cycles;
    r.arbiter_wait_cycles = l.arbiter_wait_cycles;
    r.dq_retries = l.dq_retries;
    r.purge_stalls = core.stats().purge_stall_cycles;
    r.faults = core.stats().faults;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace mi6
