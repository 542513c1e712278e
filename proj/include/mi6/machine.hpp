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


// The whole simulated machine: cores, their links, the LLC and DRAM, ticked
// in a fixed order.

#ifndef MI6_MACHINE_HPP_
#define MI6_MACHINE_HPP_

#include <functional>
#include <string>
#include <vector>

#include "mi6/config.hpp"
#include "mi6/core.hpp"
#include "mi6/dram.hpp"
#include "mi6/engine.hpp"
#include "mi6/llc.hpp"
#include "mi6/messages.hpp"

namespace mi6 {

struct CoreStatsRow {
  std::string variant;
  uint32_t core = 0;
  uint64_t cycles = 0;
  uint64_t memops = 0;
  uint64_t llc_misses = 0;
  uint64_t l1_misses = 0;
  uint64_t mshr_stall_cycles = 0;
  uint64_t arbiter_wait_cycles = 0;
  uint64_t dq_retries = 0;
  uint64_t purge_stalls = 0;
  uint64_t faults = 0;
};

std::string stats_csv_header();
std::string stats_csv_row(const CoreStatsRow& r);

struct MachineOptions {
  bool event_log = false;
  bool record_performs = false;
  // Full directory scan every this many cycles; 0 disables.
  uint64_t invariant_period = 0;
};

class Machine {
 public:
  Machine(const SimConfig& cfg, const Variant& variant, MachineOptions opts = {});

  const SimConfig& config() const { return cfg_; }
  const Variant& variant() const { return variant_; }
  uint64_t now() const { return clock_.now(); }

  Core& core(uint32_t c) { return cores_.at(c); }
  const Core& core(uint32_t c) const { return cores_.at(c); }
  uint32_t n_cores() const { return static_cast<uint32_t>(cores_.size()); }
  Llc& llc() { return llc_; }
  const Llc& llc() const { return llc_; }
  Dram& dram() { return dram_; }
  const Dram& dram() const { return dram_; }
  EventLog& log() { return log_; }
  const std::vector<PerformEvent>& performs() const { return performs_; }

  // Starts `trace` on core `c` now with the given region permissions.
  void start(uint32_t c, Trace trace, RegionBits bits);

  // Called once per cycle after DRAM, before FIFO commit.
  void set_event_hook(std::function<void(uint64_t)> hook) { hook_ = std::move(hook); }
  // Extra work that keeps run() going (pending scripted events).
  void set_busy_hook(std::function<bool()> busy) { busy_hook_ = std::move(busy); }

  void tick();
  bool cores_done() const;
  // Ticks until every core is idle and nothing is scheduled. Returns false
  // when the cycle limit is hit first.
  bool run(uint64_t max_cycles);

  // Coherent functional view of one 8-byte word, including data in flight.
  uint64_t peek_word(uint64_t byte_addr) const;
  // Write-update of every copy of the word.
  void poke_word(uint64_t byte_addr, uint64_t value);
  // True while any miss, message or DRAM request references the region.
  bool region_busy(RegionId r) const;
  // Zero a region everywhere. Throws SimError while the region is busy.
  void erase_region(RegionId r);

  std::vector<CoreStatsRow> stats_rows() const;

 private:
  SimConfig cfg_;
  Variant variant_;
  MachineOptions opts_;
  Clock clock_;
  EventLog log_;
  std::vector<Core> cores_;
  std::vector<CoreLink> links_;
  Llc llc_;
  Dram dram_;
  Fifo<DramRequest> to_dram_;
  Fifo<DramResponse> from_dram_;
  std::vector<PerformEvent> performs_;
  std::function<void(uint64_t)> hook_;
  std::function<bool()> busy_hook_;
};

}  // namespace mi6

#endif  // MI6_MACHINE_HPP_
