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


// Directory-based MSI last-level cache: entry arbiter, fixed-latency access
// pipeline, MSHR file, UQ/DQ and the Downgrade-L1 scanners. Variant flags
// select between the shared-structure shape and the partitioned one.

#ifndef MI6_LLC_HPP_
#define MI6_LLC_HPP_

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mi6/config.hpp"
#include "mi6/engine.hpp"
#include "mi6/messages.hpp"

namespace mi6 {

struct LlcCoreStats {
  uint64_t llc_misses = 0;
  uint64_t mshr_stall_cycles = 0;
  uint64_t arbiter_wait_cycles = 0;
  uint64_t dq_retries = 0;
  uint64_t grants = 0;
};

struct LlcStats {
  uint64_t idle_grants = 0;  // round-robin slots left unused while others waited
  uint64_t max_dq_occupancy = 0;
  uint64_t max_busy_mshrs = 0;
};

enum class MshrPhase : uint8_t {
  kFree,
  kInPipeline,
  kWaitDowngrade,
  kInDq,
  kWaitDram,
  kWaitRetry,
  kInUq,
};

// Arbiter candidate kinds in fixed priority order (lower wins).
enum class CandidateKind : uint8_t { kDramResponse, kDowngradeResponse, kRetry, kUpgradeRequest };

struct Candidate {
  CandidateKind kind = CandidateKind::kUpgradeRequest;
  uint32_t core = 0;
  uint32_t mshr = 0;  // DRAM responses and retries
  uint64_t age = 0;   // retries: order in which they became pending
};

struct DirectoryView {
  bool valid = false;
  bool dirty = false;
  std::vector<Msi> owners;
  std::optional<uint32_t> locked_by;
  LineData data{};
};

class Llc {
 public:
  Llc(const SimConfig& cfg, const Variant& variant);

  void step(uint64_t now, std::vector<CoreLink>& links, Fifo<DramRequest>& to_dram,
            Fifo<DramResponse>& from_dram, EventLog& log);
  void commit();

  // Pure arbitration helpers, exposed for tests.
  static std::optional<Candidate> merge_per_core(const std::vector<Candidate>& pending);
  static std::optional<Candidate> select(uint64_t now, uint32_t n_cores, bool round_robin,
                                         const std::vector<std::optional<Candidate>>& merged);

  // Lowest free MSHR index `core` may take for `addr`, if any.
  std::optional<uint32_t> allocatable(uint32_t core, LineAddress addr) const;

  uint32_t mshr_count() const { return static_cast<uint32_t>(mshrs_.size()); }
  uint32_t slice_size() const { return slice_; }
  std::optional<uint32_t> mshr_owner(uint32_t i) const;
  MshrPhase mshr_phase(uint32_t i) const { return mshrs_[i].phase; }
  size_t busy_mshrs() const;
  size_t dq_occupancy() const { return dq_.occupancy(); }
  size_t uq_occupancy() const;
  bool idle() const;

  const LlcCoreStats& core_stats(uint32_t c) const { return core_stats_[c]; }
  const LlcStats& stats() const { return stats_; }

  // Directory introspection.
  std::optional<DirectoryView> lookup(LineAddress a) const;
  std::vector<LineAddress> resident_lines(SetIndex set) const;

  // Monitor-privileged functional access.
  std::optional<LineData> peek(LineAddress a) const;
  void update_word(LineAddress a, size_t word, uint64_t value);
  // True while an MSHR or an in-flight response references the region.
  bool region_busy(RegionId r) const;
  // Invalidates and zeroes every resident line of the region. Throws
  // SimError when the region is busy.
  size_t scrub_region(RegionId r, uint64_t now);

  // Coherence and partitioning checks; throws SimError on a breach.
  void check_invariants(uint64_t now) const;

  // Test seams. Put a free MSHR straight into the downgrade-wait phase with
  // one request to send, or into the UQ with a response for `core`.
  void inject_downgrade(uint32_t i, uint32_t core, LineAddress addr, uint32_t target);
  void inject_response(uint32_t i, uint32_t core, LineAddress addr);

 private:
  struct Line {
    bool valid = false;
    bool dirty = false;
    LineAddress tag;
    LineData data{};
    std::vector<Msi> owners;
    std::optional<uint32_t> locked_by;
  };

  struct Mshr {
    MshrPhase phase = MshrPhase::kFree;
    uint32_t core = 0;
    LineAddress addr;
    Msi want = Msi::kS;
    std::optional<uint32_t> way;  // flat index into lines_
    // Downgrades outstanding for either the request line or the victim.
    LineAddress dg_addr;
    Msi dg_to = Msi::kI;
    bool victim_dg = false;
    std::vector<bool> dg_send;
    std::vector<bool> dg_await;
    bool needs_writeback = false;
    bool wb_sent = false;
    LineAddress wb_addr;
    LineData wb_data{};
    bool retry_bit = false;
    bool retry_pending = false;
    uint64_t retry_seq = 0;
    bool miss_counted = false;
    bool dram_ready = false;
    LineData dram_data{};
    LineData resp_data{};
  };

  enum class ItemKind : uint8_t { kUpgrade, kRetry, kDramResponse, kDowngradeResponse };
  struct PipeItem {
    uint64_t exit_at = 0;
    ItemKind kind = ItemKind::kUpgrade;
    uint32_t mshr = 0;
    DowngradeResponse dg;
  };

  size_t set_base(LineAddress a) const;
  Line* find(LineAddress a);
  const Line* find(LineAddress a) const;
  std::string me() const { return "llc"; }

  void absorb_purge(uint64_t now, std::vector<CoreLink>& links);
  void absorb_dram(Fifo<DramResponse>& from_dram);
  void pipeline_exit(uint64_t now, EventLog& log);
  void downgrade_scan(uint64_t now, std::vector<CoreLink>& links, std::vector<bool>& claimed,
                      EventLog& log);
  void uq_drain(uint64_t now, std::vector<CoreLink>& links, std::vector<bool>& claimed,
                EventLog& log);
  void dq_drain(uint64_t now, Fifo<DramRequest>& to_dram, EventLog& log);
  void arbitrate(uint64_t now, std::vector<CoreLink>& links, EventLog& log);

  bool scanner_try(uint32_t i, std::vector<CoreLink>& links, std::vector<bool>& claimed,
                   uint64_t now, EventLog& log);
  void lookup_request(uint32_t i, uint64_t now, EventLog& log);
  void hit_path(uint32_t i, uint64_t now, EventLog& log);
  void victim_path(uint32_t i, uint64_t now, EventLog& log);
  void complete_replacement(uint32_t i, uint64_t now, EventLog& log);
  // Retries of one core re-enter oldest first, so a retry that keeps
  // failing cannot starve the entry it is waiting on.
  void mark_retry(Mshr& m) {
    m.retry_pending = true;
    m.retry_seq = ++retry_counter_;
  }
  void enqueue_dq(uint32_t i, uint64_t now, EventLog& log);
  void grant(uint32_t i, uint64_t now, EventLog& log);
  void apply_downgrade(const DowngradeResponse& r, uint64_t now, bool via_pipeline,
                       EventLog& log);
  void free_mshr(uint32_t i);
  Fifo<uint32_t>& uq_for(uint32_t core);

  SimConfig cfg_;
  Variant variant_;
  uint32_t n_;
  uint32_t slice_;
  uint32_t banks_;
  uint32_t latency_;
  uint64_t seed_;

  std::vector<Line> lines_;
  std::vector<Mshr> mshrs_;
  std::deque<PipeItem> pipeline_;
  std::vector<uint32_t> dg_in_pipeline_;  // per core
  std::vector<Fifo<uint32_t>> uq_;      // one (shared) or one per core
  Fifo<uint32_t> dq_;

  std::vector<LlcCoreStats> core_stats_;
  LlcStats stats_;
  uint64_t retry_counter_ = 0;
};

}  // namespace mi6

#endif  // MI6_LLC_HPP_
