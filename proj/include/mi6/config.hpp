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

#ifndef MI6_CONFIG_HPP_
#define MI6_CONFIG_HPP_

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mi6 {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cache-line-granular physical address (byte address >> log2(line_bytes)).
struct LineAddress {
  uint64_t value = 0;
  auto operator<=>(const LineAddress&) const = default;
};

// Index of one of the equal, contiguous DRAM regions.
struct RegionId {
  uint32_t value = 0;
  auto operator<=>(const RegionId&) const = default;
};

using SetIndex = uint32_t;

// Machine geometry. Defaults reproduce the insecure baseline machine
// (2 GiB / 120-cycle / 24-request DRAM, 1 MiB 16-way LLC, 32 KiB 8-way L1).
struct SimConfig {
  uint32_t n_cores = 1;
  uint32_t line_bytes = 64;
  uint32_t l1_sets = 64;
  uint32_t l1_ways = 8;
  uint32_t l1_mshrs = 8;
  uint32_t l1_hit_latency = 2;
  uint32_t llc_sets = 1024;
  uint32_t llc_ways = 16;
  uint32_t llc_mshrs_total = 16;
  uint32_t llc_pipeline_latency = 4;
  uint32_t dram_latency = 120;
  uint32_t dram_max_inflight = 24;
  uint32_t n_regions = 64;
  uint64_t dram_bytes = uint64_t{2} << 30;
  uint32_t page_bytes = 4096;
  uint32_t page_walk_latency = 20;
  uint32_t l1_tlb_entries = 32;
  uint32_t l2_tlb_sets = 256;
  uint32_t l2_tlb_ways = 4;
  uint32_t bp_table_entries = 4096;
  uint32_t bp_flush_rate = 8;
  uint32_t l1_flush_rate = 1;
  uint32_t issue_window = 80;
  uint32_t issue_width = 2;
  uint32_t miss_banks = 4;
  // Low region-id bits folded into the LLC index under set partitioning.
  uint32_t part_region_bits = 2;
  uint32_t link_fifo_depth = 2;
  uint32_t monitor_regions = 1;
  uint32_t monitor_call_cycles = 200;
  uint32_t memcopy_cycles_per_line = 4;
  uint32_t mailbox_depth = 4;
  uint64_t seed = 1;

  uint32_t line_shift() const;
  uint64_t line_count() const { return dram_bytes / line_bytes; }
  uint64_t region_bytes() const { return dram_bytes / n_regions; }
  uint64_t lines_per_region() const { return line_count() / n_regions; }
  uint32_t llc_index_bits() const;
  uint64_t llc_capacity_bytes() const {
    return uint64_t{llc_sets} * llc_ways * line_bytes;
  }
  uint32_t l1_lines() const { return l1_sets * l1_ways; }

  LineAddress line_of(uint64_t byte_addr) const {
    return LineAddress{byte_addr >> line_shift()};
  }
  uint64_t byte_of(LineAddress a) const { return a.value << line_shift(); }
};

enum class Flag : uint16_t {
  kFlush = 1u << 0,
  kPart = 1u << 1,
  kMiss = 1u << 2,
  kArb = 1u << 3,
  kNonSpec = 1u << 4,
  kMshrPartition = 1u << 5,
  kSplitUq = 1u << 6,
  kDupDowngrade = 1u << 7,
  kDqRetry = 1u << 8,
  kRrArbiter = 1u << 9,
};

std::string_view flag_name(Flag f);
std::optional<Flag> flag_from_name(std::string_view name);
const std::vector<Flag>& all_flags();

// A set of secure-feature toggles. Named presets expand to fixed flag sets.
class Variant {
 public:
  Variant() = default;

  static Variant base() { return Variant(); }
  static Variant secure();
  // Accepts a preset name (base, flush, part, miss, arb, nonspec, secure,
  // fpma / f+p+m+a) or a '+'-joined flag list. Case-insensitive.
  static Variant parse(std::string_view text);

  bool has(Flag f) const { return (bits_ & static_cast<uint16_t>(f)) != 0; }
  Variant with(Flag f) const;
  Variant without(Flag f) const;
  uint16_t bits() const { return bits_; }

  // True when any of the mechanisms needed for strong timing independence
  // inside the LLC is enabled.
  bool any_strong() const;
  // True when every strong-independence mechanism is enabled.
  bool all_strong() const;

  // Canonical name: the preset name when the flag set matches one,
  // otherwise the '+'-joined lower-case flag list.
  std::string name() const;

  bool operator==(const Variant& o) const { return bits_ == o.bits_; }

 private:
  explicit Variant(uint16_t bits) : bits_(bits) {}
  uint16_t bits_ = 0;
};

RegionId dram_region(LineAddress addr, const SimConfig& cfg);
SetIndex llc_index(LineAddress addr, const SimConfig& cfg, const Variant& v);

// First line address of a region.
LineAddress region_base(RegionId r, const SimConfig& cfg);

struct MshrBudget {
  uint32_t total = 0;
  uint32_t per_core = 0;
  bool operator==(const MshrBudget&) const = default;
};

// Each MSHR may hold a writeback and a read in DRAM at once, so the total is
// capped at half of the DRAM in-flight limit.
MshrBudget mshr_budget(uint32_t dram_max_inflight, uint32_t n_cores);

// Number of LLC MSHRs the variant actually instantiates.
uint32_t effective_llc_mshrs(const SimConfig& cfg, const Variant& v);

// Structural checks only: the machine can be built and simulated.
std::vector<std::string> structural_violations(const SimConfig& cfg,
                                               const Variant& v);
// Structural checks plus the MSHR sizing rule for strong variants.
std::vector<std::string> validate_config(const SimConfig& cfg,
                                         const Variant& v);

struct ConfigFile {
  SimConfig config;
  std::optional<Variant> variant;
};

// Flat key=value lines; '#' starts a comment. Unknown keys are errors.
ConfigFile parse_config(std::string_view text);
ConfigFile load_config(const std::string& path);
std::string format_config(const SimConfig& cfg);

}  // namespace mi6

#endif  // MI6_CONFIG_HPP_
