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


// Verification harness: differential non-interference runs, one witness per
// leakage channel, a prime+probe attacker, the flat-memory coherence oracle
// and the overhead sweep.

#ifndef MI6_HARNESS_HPP_
#define MI6_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mi6/config.hpp"
#include "mi6/core.hpp"
#include "mi6/machine.hpp"

namespace mi6 {

// What an enclave can measure about itself.
struct Observables {
  std::vector<OpRecord> ops;
  uint64_t final_cycle = 0;
  bool operator==(const Observables&) const = default;
};

Observables observe(const Core& core);

struct Divergence {
  uint32_t op = 0;  // trace index; UINT32_MAX when only the final cycle differs
  uint64_t a_issue = 0;
  uint64_t a_completion = 0;
  uint64_t b_issue = 0;
  uint64_t b_completion = 0;
};

struct DifferenceReport {
  bool equal = true;
  std::optional<Divergence> first_divergence;
  std::string label;  // attacker variant or channel that diverged
};

DifferenceReport compare(const Observables& a, const Observables& b);
std::string describe(const DifferenceReport& r);

// A trace pinned to a core. Placements with the same `domain` may share
// regions; kOwnDomain makes the placement a domain of its own.
struct Placement {
  static constexpr uint32_t kOwnDomain = UINT32_MAX;
  uint32_t core = 0;
  std::vector<RegionId> regions;
  Trace trace;
  uint32_t domain = kOwnDomain;
};

struct RunResult {
  std::vector<Observables> per_core;
  std::vector<CoreStatsRow> stats;
  DramStats dram;
  LlcStats llc;
  std::string log;
  bool completed = false;
  uint64_t cycles = 0;
};

// Runs the placements on a fresh machine with permissions set directly.
// Throws std::invalid_argument when two domains share a region or a core is
// placed twice.
RunResult run_placements(const SimConfig& cfg, const Variant& variant,
                         const std::vector<Placement>& placements, uint64_t max_cycles,
                         MachineOptions opts = {});

struct NamedTrace {
  std::string name;
  Trace trace;
};

// One attacker behaviour, possibly spanning several cores of its domain.
struct AttackerRun {
  std::string name;
  std::vector<Placement> cores;
};

// Runs the victim against each attacker and against the same attacker
// placements with empty traces, comparing victim observables to the idle run.
DifferenceReport run_differential(const SimConfig& cfg, const Variant& variant,
                                  const Placement& victim,
                                  const std::vector<AttackerRun>& attackers,
                                  uint64_t max_cycles);
DifferenceReport run_differential(const SimConfig& cfg, const Variant& variant,
                                  const Placement& victim, uint32_t attacker_core,
                                  const std::vector<RegionId>& attacker_regions,
                                  const std::vector<NamedTrace>& attackers,
                                  uint64_t max_cycles);

// ---------------------------------------------------------------------------
// Trace generators. All addresses are byte addresses inside `regions`.

namespace gen {

uint64_t line_byte(const SimConfig& cfg, RegionId r, uint64_t line, uint32_t word = 0);

Trace random_mix(DetRng& rng, const SimConfig& cfg, const std::vector<RegionId>& regions,
                 size_t ops, uint64_t working_lines);
Trace streaming(const SimConfig& cfg, const std::vector<RegionId>& regions, size_t lines,
                size_t passes);
Trace thrashing(const SimConfig& cfg, const std::vector<RegionId>& regions, size_t lines,
                size_t passes);
// Lines that all index into the same LLC set as `line` under BASE indexing.
Trace conflict_loop(const SimConfig& cfg, RegionId r, size_t lines, size_t passes);
// `n` loads to distinct, cold lines with no compute between them.
Trace parallel_misses(const SimConfig& cfg, RegionId r, size_t n);
Trace prefixed(uint64_t delay, const Trace& t);

}  // namespace gen

// ---------------------------------------------------------------------------
// Strong timing independence over random pairs.

struct IndependenceCase {
  uint64_t seed = 0;
  DifferenceReport report;
};

SimConfig independence_config();
IndependenceCase independence_case(const SimConfig& cfg, const Variant& variant, uint64_t seed);

// ---------------------------------------------------------------------------
// Channel witnesses.

enum class Channel : uint8_t {
  kCacheSet,
  kMshrExhaust,
  kDramBackpressure,
  kEntryPort,
  kDowngradeLogic,
  kUqHeadline,
  kDqTwoCycle,
};

const std::vector<Channel>& all_channels();
std::string_view channel_name(Channel c);
std::optional<Channel> channel_from_name(std::string_view name);

// The configuration the "secure" side of every witness uses. Mutations of
// it (a flag removed, or MSHRs sized to d_max) model a broken build.
struct WitnessSetup {
  Variant secure = Variant::secure();
  bool correct_sizing = true;
};

struct WitnessResult {
  Channel channel = Channel::kCacheSet;
  bool insecure_diverges = false;
  bool secure_diverges = false;
  DifferenceReport insecure_report;
  DifferenceReport secure_report;
  bool pass() const { return insecure_diverges && !secure_diverges; }
};

struct WitnessScenario {
  SimConfig cfg;
  Placement victim;
  std::vector<AttackerRun> attackers;
};

// Two cores for most channels. DOWNGRADE_LOGIC and UQ_HEADLINE use four, with
// a three-core attacker domain whose stores invalidate its own sharers.
SimConfig witness_config(Channel c, bool correct_sizing);
WitnessScenario witness_scenario(Channel c, bool correct_sizing);
WitnessResult channel_witness(Channel c, const WitnessSetup& setup = {});

// ---------------------------------------------------------------------------
// Prime+probe on the LLC.

struct PrimeProbeResult {
  bool detected = false;
  int slow_touch = 0;
  int slow_skip = 0;
};

// Detection: the attacker's count of slow probes differs between a victim
// that touches the monitored set and one that does not. With
// `victim_active` false both runs skip (no signal).
PrimeProbeResult prime_probe(const Variant& variant, uint64_t seed, bool victim_active = true);

// ---------------------------------------------------------------------------
// Coherence against a flat sequentially consistent memory.

struct CoherenceReport {
  uint64_t ops = 0;
  uint64_t loads_checked = 0;
  uint64_t mismatches = 0;
  uint64_t final_mismatches = 0;
  std::string first;
};

CoherenceReport coherence_check(const Variant& variant, uint32_t n_cores, uint64_t ops_per_core,
                                uint64_t seed);

// ---------------------------------------------------------------------------
// MSHR sizing against the DRAM in-flight cap.

struct SizingReport {
  uint64_t cycles = 0;
  uint64_t backpressure = 0;
  uint64_t max_inflight = 0;
};

SizingReport sizing_random(uint32_t n_cores, uint32_t mshrs_total, uint64_t cycles, uint64_t seed);
SizingReport sizing_burst(uint32_t mshrs_total);

// ---------------------------------------------------------------------------
// Purge.

struct PurgeReport {
  uint64_t duration = 0;
  bool state_equal = false;
};

PurgeReport purge_check(const SimConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Overheads.

struct OverheadRow {
  std::string variant;
  std::string trace;
  uint64_t cycles = 0;
  uint64_t memops = 0;
  uint64_t llc_misses = 0;
  uint64_t mshr_stall_cycles = 0;
  uint64_t idle_grants = 0;
  uint64_t dq_retries = 0;
  uint64_t purge_stalls = 0;
  double normalized = 1.0;  // cycles / BASE cycles on the same trace
};

// Shrinks the LLC MSHR pool to the sizing rule for variants that need it.
SimConfig sized_for(const SimConfig& cfg, const Variant& v);

// Runs every trace alone on core 0 under every variant (BASE is always run
// for normalization). Rows are sorted by (trace, variant order).
std::vector<OverheadRow> overhead_report(const SimConfig& cfg, const std::vector<NamedTrace>& traces,
                                         const std::vector<Variant>& variants,
                                         uint64_t max_cycles = 50'000'000,
                                         unsigned workers = 0);
std::string overhead_csv(const std::vector<OverheadRow>& rows);

// ---------------------------------------------------------------------------

// Runs fn(0..n-1) on up to `workers` threads; results keep index order.
void parallel_for(size_t n, const std::function<void(size_t)>& fn, unsigned workers = 0);

}  // namespace mi6

#endif  // MI6_HARNESS_HPP_
