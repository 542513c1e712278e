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

// Trace-driven core: an in-flight window standing in for the out-of-order
// engine, a private L1 data cache with MSHRs, a permission-caching TLB and
// the purge engine.

#ifndef MI6_CORE_HPP_
#define MI6_CORE_HPP_

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mi6/config.hpp"
#include "mi6/engine.hpp"
#include "mi6/messages.hpp"

namespace mi6 {

struct TraceOp {
  enum class Kind : uint8_t { kLoad, kStore, kCompute };
  Kind kind = Kind::kCompute;
  uint64_t addr = 0;    // byte physical address (loads and stores)
  uint64_t cycles = 0;  // compute ops only, >= 1

  static TraceOp load(uint64_t a) { return {Kind::kLoad, a, 0}; }
  static TraceOp store(uint64_t a) { return {Kind::kStore, a, 0}; }
  static TraceOp compute(uint64_t c) { return {Kind::kCompute, 0, c}; }
  bool is_memory() const { return kind != Kind::kCompute; }
  bool operator==(const TraceOp&) const = default;
};

using Trace = std::vector<TraceOp>;

class TraceError : public std::runtime_error {
 public:
  TraceError(int line, int column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Grammar, one op per line: `C <decimal>`, `L 0x<hex>`, `S 0x<hex>`;
// `#` starts a comment.
Trace parse_trace(std::string_view text);
Trace load_trace(const std::string& path);
std::string format_trace(const Trace& trace);

// Throws TraceError naming the first op outside DRAM.
void check_trace_range(const Trace& trace, const SimConfig& cfg);

using RegionBits = std::vector<bool>;

enum class Access : uint8_t { kAllowed, kFault };

Access check_access(LineAddress addr, const RegionBits& bv, const SimConfig& cfg);

// Per memory op: what the enclave itself can measure.
struct OpRecord {
  uint32_t index = 0;  // position in the trace
  uint64_t issue = 0;
  uint64_t completion = 0;
  bool fault = false;
  bool is_store = false;
  uint64_t value = 0;  // loaded or stored word
  bool operator==(const OpRecord&) const = default;
};

// A load or store taking effect, in global simulation order.
struct PerformEvent {
  uint64_t cycle = 0;
  uint32_t core = 0;
  uint32_t op = 0;
  bool is_store = false;
  uint64_t word_addr = 0;
  uint64_t value = 0;
};

struct CoreStats {
  uint64_t memops = 0;
  uint64_t l1_misses = 0;
  uint64_t faults = 0;
  uint64_t tlb_walks = 0;
  uint64_t purges = 0;
  uint64_t purge_stall_cycles = 0;
  uint64_t max_inflight_memops = 0;
};

enum class CoreMode : uint8_t { kNormal, kDraining, kPurging };

// Permission cache: a fully associative L1 and a set-associative L2, both
// LRU. An empty L2 set fills ways in index order, so a cleared TLB carries
// no replacement history.
class PermissionTlb {
 public:
  PermissionTlb(uint32_t l1_entries, uint32_t l2_sets, uint32_t l2_ways);

  bool lookup(uint64_t page);
  void insert(uint64_t page);
  void clear();
  bool contains(uint64_t page) const;
  std::string serialize() const;

 private:
  struct Way {
    bool valid = false;
    uint64_t page = 0;
  };
  uint32_t l1_cap_;
  uint32_t l2_sets_;
  uint32_t l2_ways_;
  std::vector<uint64_t> l1_;            // LRU first
  std::vector<Way> l2_;                 // sets x ways
  std::vector<std::vector<uint32_t>> l2_order_;  // per set, LRU way first
};

struct SwitchPlan {
  bool replace_trace = false;
  Trace next_trace;
  std::optional<RegionBits> bitvector;
};

class Core {
 public:
  Core(uint32_t id, const SimConfig& cfg, const Variant& variant);

  uint32_t id() const { return id_; }

  // Starts `trace` immediately; observables restart.
  void assign_trace(Trace trace, uint64_t now);

  void step(uint64_t now, CoreLink& link, EventLog& log,
            std::vector<PerformEvent>* performs);

  // Context switch: stop issuing, drain the window, purge, then apply `plan`.
  // Throws if a switch or purge is already underway.
  void request_switch(SwitchPlan plan);
  // Starts the purge immediately; requires an empty window.
  uint64_t begin_purge(uint64_t now);

  // Stall cycles of one purge: the slowest of the four parallel engines.
  static uint64_t purge_duration(const SimConfig& cfg);

  Access page_walk_check(uint64_t page);
  void tlb_shootdown();
  bool tlb_has(uint64_t page) const { return tlb_.contains(page); }

  void set_bitvector(RegionBits bv) { bitvector_ = std::move(bv); }
  const RegionBits& bitvector() const { return bitvector_; }

  void stall_until(uint64_t cycle) { stall_until_ = std::max(stall_until_, cycle); }
  void nonspec_until(uint64_t cycle) {
    nonspec_until_ = std::max(nonspec_until_, cycle);
  }
  bool nonspec_at(uint64_t now) const;

  CoreMode mode() const { return mode_; }
  bool has_trace() const { return has_trace_; }
  bool finished() const { return finished_; }
  bool busy() const;
  uint64_t finish_cycle() const { return finish_cycle_; }
  uint64_t last_purge_done() const { return purge_done_at_; }
  uint64_t trace_start() const { return trace_start_; }
  size_t window_size() const { return window_.size(); }
  size_t inflight_memops() const;
  size_t busy_mshrs() const;

  const std::vector<OpRecord>& records() const { return records_; }
  const CoreStats& stats() const { return stats_; }

  // L1 introspection.
  std::optional<Msi> l1_state(LineAddress a) const;
  std::optional<LineData> l1_data(LineAddress a) const;
  // Monitor-privileged accesses that bypass the protocol.
  bool l1_write_word(LineAddress a, size_t word, uint64_t value);
  void l1_invalidate_region(RegionId r);
  bool l1_has_mshr_in(RegionId r) const;

  // Microarchitectural state only: excludes observables, stats, clock,
  // trace position and the architectural region bitvector.
  std::string serialize_state() const;

 private:
  struct L1Line {
    bool valid = false;
    Msi state = Msi::kI;
    LineAddress tag;
    LineData data{};
  };
  struct L1Mshr {
    bool busy = false;
    LineAddress addr;
    Msi want = Msi::kI;
    size_t record = 0;
  };
  struct WindowEntry {
    size_t record = 0;
    uint64_t complete_at = 0;
    bool pending = false;
  };
  struct Walk {
    uint64_t page = 0;
    uint64_t done_at = 0;
  };

  uint32_t l1_set(LineAddress a) const;
  L1Line* find_line(LineAddress a);
  const L1Line* find_line(LineAddress a) const;
  L1Mshr* find_mshr(LineAddress a);
  void reset_microarch();
  void handle_incoming(uint64_t now, CoreLink& link, EventLog& log,
                       std::vector<PerformEvent>* performs);
  void retire(uint64_t now);
  void issue(uint64_t now, CoreLink& link, EventLog& log,
             std::vector<PerformEvent>* performs);
  void purge_progress(uint64_t now, CoreLink& link, EventLog& log);
  uint64_t perform(uint64_t now, size_t record, L1Line& line,
                   std::vector<PerformEvent>* performs);
  uint64_t store_value(uint32_t op_index) const;

  uint32_t id_;
  SimConfig cfg_;
  Variant variant_;
  uint64_t l1_seed_;

  Trace trace_;
  bool has_trace_ = false;
  size_t next_op_ = 0;
  uint64_t trace_generation_ = 0;
  uint64_t trace_start_ = 0;
  bool finished_ = false;
  uint64_t finish_cycle_ = 0;
  std::vector<OpRecord> records_;

  std::deque<WindowEntry> window_;
  std::vector<L1Line> l1_;
  std::vector<L1Mshr> mshrs_;
  PermissionTlb tlb_;
  std::vector<uint8_t> bp_table_;
  std::optional<Walk> walk_;
  uint64_t compute_until_ = 0;
  uint64_t compute_left_ = 0;
  uint64_t stall_until_ = 0;
  uint64_t nonspec_until_ = 0;
  RegionBits bitvector_;

  CoreMode mode_ = CoreMode::kNormal;
  std::optional<SwitchPlan> switch_plan_;
  uint64_t purge_done_at_ = 0;
  size_t purge_cursor_ = 0;

  CoreStats stats_;
};

}  // namespace mi6

#endif  // MI6_CORE_HPP_
