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


#include "mi6/harness.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <mutex>
#include <thread>

namespace mi6 {
namespace {

RegionBits bits_for(const SimConfig& cfg, const std::vector<RegionId>& regions) {
  RegionBits bits(cfg.n_regions, false);
  for (RegionId r : regions) bits.at(r.value) = true;
  return bits;
}

std::vector<RegionId> all_regions(const SimConfig& cfg) {
  std::vector<RegionId> out;
  for (uint32_t r = 0; r < cfg.n_regions; ++r) out.push_back(RegionId{r});
  return out;
}

}  // namespace

Observables observe(const Core& core) {
  return Observables{core.records(), core.finished() ? core.finish_cycle() : 0};
}

DifferenceReport compare(const Observables& a, const Observables& b) {
  DifferenceReport r;
  const size_t n = std::min(a.ops.size(), b.ops.size());
  for (size_t i = 0; i < n; ++i) {
    if (a.ops[i] == b.ops[i]) continue;
    r.equal = false;
    r.first_divergence = Divergence{a.ops[i].index, a.ops[i].issue, a.ops[i].completion,
                                    b.ops[i].issue, b.ops[i].completion};
    return r;
  }
  if (a.ops.size() != b.ops.size() || a.final_cycle != b.final_cycle) {
    r.equal = false;
    r.first_divergence = Divergence{UINT32_MAX, a.final_cycle, a.final_cycle, b.final_cycle,
                                    b.final_cycle};
  }
  return r;
}

std::string describe(const DifferenceReport& r) {
  if (r.equal) return "equal";
  std::ostringstream os;
  os << "diverges";
  if (!r.label.empty()) os << " [" << r.label << "]";
  if (r.first_divergence) {
    const Divergence& d = *r.first_divergence;
    if (d.op == UINT32_MAX) {
      os << " final cycle " << d.a_completion << " vs " << d.b_completion;
    } else {
      os << " at op " << d.op << ": " << d.a_issue << "->" << d.a_completion << " vs "
         << d.b_issue << "->" << d.b_completion;
    }
  }
  return os.str();
}

RunResult run_placements(const SimConfig& cfg, const Variant& variant,
                         const std::vector<Placement>& placements, uint64_t max_cycles,
                         MachineOptions opts) {
  std::map<uint32_t, uint64_t> region_owner;  // region -> domain key
  std::set<uint32_t> cores;
  for (const auto& p : placements) {
    if (!cores.insert(p.core).second) {
      throw std::invalid_argument("core " + std::to_string(p.core) + " placed twice");
    }
    const uint64_t key = p.domain == Placement::kOwnDomain ? (uint64_t{1} << 32) | p.core
                                                           : p.domain;
    for (RegionId r : p.regions) {
      auto [it, fresh] = region_owner.emplace(r.value, key);
      if (!fresh && it->second != key) {
        throw std::invalid_argument("region " + std::to_string(r.value) +
                                    " shared by two domains");
      }
    }
  }
  Machine m(cfg, variant, opts);
  for (const auto& p : placements) m.start(p.core, p.trace, bits_for(cfg, p.regions));
  RunResult out;
  out.completed = m.run(max_cycles);
  out.cycles = m.now();
  for (uint32_t c = 0; c < m.n_cores(); ++c) out.per_core.push_back(observe(m.core(c)));
  out.stats = m.stats_rows();
  out.dram = m.dram().stats();
  out.llc = m.llc().stats();
  out.log = m.log().text();
  return out;
}

DifferenceReport run_differential(const SimConfig& cfg, const Variant& variant,
                                  const Placement& victim,
                                  const std::vector<AttackerRun>& attackers,
                                  uint64_t max_cycles) {
  auto run_with = [&](const std::vector<Placement>& cores) {
    std::vector<Placement> ps{victim};
    ps.insert(ps.end(), cores.begin(), cores.end());
    RunResult r = run_placements(cfg, variant, ps, max_cycles);
    if (!r.completed) throw std::runtime_error("differential run hit the cycle limit");
    return r.per_core[victim.core];
  };
  if (attackers.empty()) return DifferenceReport{};
  std::vector<Placement> idle = attackers.front().cores;
  for (auto& p : idle) p.trace.clear();
  const Observables base = run_with(idle);
  for (const auto& a : attackers) {
    DifferenceReport r = compare(base, run_with(a.cores));
    if (!r.equal) {
      r.label = a.name;
      return r;
    }
  }
  return DifferenceReport{};
}

DifferenceReport run_differential(const SimConfig& cfg, const Variant& variant,
                                  const Placement& victim, uint32_t attacker_core,
                                  const std::vector<RegionId>& attacker_regions,
                                  const std::vector<NamedTrace>& attackers,
                                  uint64_t max_cycles) {
  std::vector<AttackerRun> runs;
  for (const auto& a : attackers) {
    runs.push_back({a.name, {Placement{attacker_core, attacker_regions, a.trace}}});
  }
  if (runs.empty()) runs.push_back({"idle", {Placement{attacker_core, attacker_regions, {}}}});
  return run_differential(cfg, variant, victim, runs, max_cycles);
}

// ---------------------------------------------------------------------------

namespace gen {

uint64_t line_byte(const SimConfig& cfg, RegionId r, uint64_t line, uint32_t word) {
  const uint64_t l = region_base(r, cfg).value + line % cfg.lines_per_region();
  return cfg.byte_of(LineAddress{l}) + uint64_t{word % kWordsPerLine} * 8;
}

Trace random_mix(DetRng& rng, const SimConfig& cfg, const std::vector<RegionId>& regions,
                 size_t ops, uint64_t working_lines) {
  Trace t;
  t.reserve(ops);
  std::vector<uint64_t> recent;
  for (size_t i = 0; i < ops; ++i) {
    const uint64_t roll = rng.below(100);
    if (roll < 15) {
      t.push_back(TraceOp::compute(1 + rng.below(16)));
      continue;
    }
    uint64_t line;
    if (!recent.empty() && rng.below(100) < 50) {
      line = recent[rng.below(recent.size())];
    } else {
      line = rng.below(working_lines);
      recent.push_back(line);
      if (recent.size() > 16) recent.erase(recent.begin());
    }
    const RegionId r = regions[line % regions.size()];
    const uint64_t addr = line_byte(cfg, r, line / regions.size(),
                                    static_cast<uint32_t>(rng.below(kWordsPerLine)));
    t.push_back(rng.below(100) < 30 ? TraceOp::store(addr) : TraceOp::load(addr));
  }
  return t;
}

Trace streaming(const SimConfig& cfg, const std::vector<RegionId>& regions, size_t lines,
                size_t passes) {
  Trace t;
  for (size_t p = 0; p < passes; ++p) {
    for (size_t i = 0; i < lines; ++i) {
      t.push_back(TraceOp::load(line_byte(cfg, regions[i % regions.size()], i / regions.size())));
    }
  }
  return t;
}

Trace thrashing(const SimConfig& cfg, const std::vector<RegionId>& regions, size_t lines,
                size_t passes) {
  Trace t;
  for (size_t p = 0; p < passes; ++p) {
    for (size_t i = 0; i < lines; ++i) {
      t.push_back(TraceOp::store(line_byte(cfg, regions[i % regions.size()], i / regions.size())));
    }
  }
  return t;
}

Trace conflict_loop(const SimConfig& cfg, RegionId r, size_t lines, size_t passes) {
  // Stride of one PART color share: distinct BASE sets, one PART set.
  const uint64_t stride = uint64_t{cfg.llc_sets} >> cfg.part_region_bits;
  Trace t;
  for (size_t p = 0; p < passes; ++p) {
    for (size_t i = 0; i < lines; ++i) t.push_back(TraceOp::load(line_byte(cfg, r, i * stride)));
  }
  return t;
}

Trace parallel_misses(const SimConfig& cfg, RegionId r, size_t n) {
  Trace t;
  for (size_t i = 0; i < n; ++i) t.push_back(TraceOp::load(line_byte(cfg, r, i)));
  return t;
}

Trace prefixed(uint64_t delay, const Trace& t) {
  Trace out;
  if (delay > 0) out.push_back(TraceOp::compute(delay));
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

}  // namespace gen

// ---------------------------------------------------------------------------

SimConfig independence_config() {
  SimConfig cfg;
  cfg.n_cores = 2;
  cfg.llc_mshrs_total = 12;
  return cfg;
}

IndependenceCase independence_case(const SimConfig& cfg, const Variant& variant, uint64_t seed) {
  DetRng rng(derive_seed(seed, "independence"));
  const uint32_t colors = 1u << cfg.part_region_bits;
  const uint32_t victim_color = static_cast<uint32_t>(rng.below(colors));
  std::vector<RegionId> victim_pool;
  std::vector<RegionId> attacker_pool;
  for (uint32_t r = cfg.monitor_regions; r < cfg.n_regions; ++r) {
    (r % colors == victim_color ? victim_pool : attacker_pool).push_back(RegionId{r});
  }
  auto pick = [&](std::vector<RegionId>& pool, size_t n) {
    std::vector<RegionId> out;
    for (size_t i = 0; i < n && !pool.empty(); ++i) {
      const size_t k = rng.below(pool.size());
      out.push_back(pool[k]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
  };
  const std::vector<RegionId> vr = pick(victim_pool, 1 + rng.below(2));
  const std::vector<RegionId> ar = pick(attacker_pool, 1 + rng.below(3));

  Placement victim;
  victim.core = 1;
  victim.regions = vr;
  victim.trace = gen::random_mix(rng, cfg, vr, 600 + rng.below(900), 32 + rng.below(2048));

  const uint64_t share = uint64_t{cfg.llc_sets} * cfg.llc_ways;
  std::vector<NamedTrace> attackers;
  attackers.push_back({"streaming", gen::prefixed(rng.below(64),
                                                  gen::streaming(cfg, ar, 1500 + rng.below(1500), 1))});
  attackers.push_back({"thrashing", gen::prefixed(rng.below(64),
                                                  gen::thrashing(cfg, ar, share / 2, 2))});
  DetRng arng = rng.split("attacker");
  attackers.push_back({"random", gen::random_mix(arng, cfg, ar, 2500, 8192)});

  IndependenceCase out;
  out.seed = seed;
  out.report = run_differential(cfg, variant, victim, 0, ar, attackers, 1'000'000);
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<Channel>& all_channels() {
  static const std::vector<Channel> kAll = {
      Channel::kCacheSet,       Channel::kMshrExhaust, Channel::kDramBackpressure,
      Channel::kEntryPort,      Channel::kDowngradeLogic, Channel::kUqHeadline,
      Channel::kDqTwoCycle};
  return kAll;
}

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kCacheSet: return "CACHE_SET";
    case Channel::kMshrExhaust: return "MSHR_EXHAUST";
    case Channel::kDramBackpressure: return "DRAM_BACKPRESSURE";
    case Channel::kEntryPort: return "ENTRY_PORT";
    case Channel::kDowngradeLogic: return "DOWNGRADE_LOGIC";
    case Channel::kUqHeadline: return "UQ_HEADLINE";
    case Channel::kDqTwoCycle: return "DQ_TWO_CYCLE";
  }
  return "?";
}

std::optional<Channel> channel_from_name(std::string_view name) {
  for (Channel c : all_channels()) {
    if (channel_name(c) == name) return c;
  }
  return std::nullopt;
}

// Tiny caches, a short DRAM, and 16 regions so that the low two region bits
// (the PART color) of regions 4 and 5 differ.
SimConfig witness_config(Channel c, bool correct_sizing) {
  SimConfig cfg;
  cfg.n_cores = 2;
  cfg.l1_sets = 2;
  cfg.l1_ways = 2;
  cfg.l1_mshrs = 8;
  cfg.llc_sets = 16;
  cfg.llc_ways = 2;
  cfg.dram_latency = 40;
  cfg.dram_max_inflight = 8;
  cfg.n_regions = 16;
  cfg.dram_bytes = uint64_t{16} << 20;
  cfg.l1_tlb_entries = 8;
  cfg.l2_tlb_sets = 16;
  cfg.l2_tlb_ways = 2;
  cfg.bp_table_entries = 64;
  cfg.issue_window = 16;
  cfg.miss_banks = 2;
  if (c == Channel::kDowngradeLogic || c == Channel::kUqHeadline) {
    cfg.n_cores = 4;
    cfg.dram_max_inflight = 32;
    cfg.link_fifo_depth = 1;
  }
  cfg.llc_mshrs_total = correct_sizing ? cfg.dram_max_inflight / 2 : cfg.dram_max_inflight;
  return cfg;
}

namespace {

constexpr RegionId kAttackerRegion{4};
constexpr RegionId kVictimRegion{5};
constexpr uint32_t kAttackerDomain = 0;

std::optional<Flag> channel_flag(Channel c) {
  switch (c) {
    case Channel::kCacheSet: return Flag::kPart;
    case Channel::kMshrExhaust: return Flag::kMshrPartition;
    case Channel::kDramBackpressure: return std::nullopt;  // MSHR sizing
    case Channel::kEntryPort: return Flag::kRrArbiter;
    case Channel::kDowngradeLogic: return Flag::kDupDowngrade;
    case Channel::kUqHeadline: return Flag::kSplitUq;
    case Channel::kDqTwoCycle: return Flag::kDqRetry;
  }
  return std::nullopt;
}

Trace loads(const SimConfig& cfg, RegionId r, const std::vector<uint64_t>& lines, int reps) {
  Trace t;
  for (int p = 0; p < reps; ++p) {
    for (uint64_t l : lines) t.push_back(TraceOp::load(gen::line_byte(cfg, r, l)));
  }
  return t;
}

// Misses that fill the victim's share, S->M upgrades, dirty replacements,
// re-fetches after a pause.
Trace mixed_victim(const SimConfig& cfg) {
  auto v = [&](uint64_t i) { return gen::line_byte(cfg, kVictimRegion, i); };
  Trace t;
  for (uint64_t round = 0; round < 3; ++round) {
    const uint64_t b = round * 16;
    for (uint64_t i = 0; i < 6; ++i) t.push_back(TraceOp::load(v(b + i)));
    t.push_back(TraceOp::store(v(b)));
    t.push_back(TraceOp::store(v(b + 1)));
    for (uint64_t i = 6; i < 12; ++i) t.push_back(TraceOp::load(v(b + i)));
    t.push_back(TraceOp::compute(10));
    for (uint64_t i = 0; i < 4; ++i) t.push_back(TraceOp::load(v(b + i)));
    t.push_back(TraceOp::store(v(b + 12)));
    t.push_back(TraceOp::store(v(b + 13)));
    t.push_back(TraceOp::load(v(b + 14)));
    t.push_back(TraceOp::compute(200));
    for (uint64_t i = 0; i < 6; ++i) t.push_back(TraceOp::load(v(b + i)));
  }
  return t;
}

Trace single_attacker(const SimConfig& cfg, Channel c, std::string& kind) {
  auto a = [&](uint64_t i) { return gen::line_byte(cfg, kAttackerRegion, i); };
  Trace body;
  switch (c) {
    case Channel::kCacheSet:
      // Every BASE set, four tags deep: evicts the victim's lines unless the
      // index is colored by region.
      kind = "set_sweep";
      for (int p = 0; p < 3; ++p) {
        for (uint64_t i = 0; i < 64; ++i) body.push_back(TraceOp::load(a(i)));
      }
      break;
    case Channel::kMshrExhaust:
      // Bursts of eight cold misses hold every shared MSHR for a DRAM trip.
      kind = "miss_burst";
      for (uint64_t b = 0; b < 12; ++b) {
        for (uint64_t j = 0; j < 8; ++j) body.push_back(TraceOp::load(a(b * 8 + j)));
        body.push_back(TraceOp::compute(30));
      }
      break;
    case Channel::kDramBackpressure:
    case Channel::kDqTwoCycle:
      // Store misses whose victims are dirty: a writeback plus a read per
      // MSHR, and a replacement head in the DQ for each.
      kind = "dirty_thrash";
      for (uint64_t i = 0; i < 128; ++i) body.push_back(TraceOp::store(a(i)));
      break;
    case Channel::kEntryPort:
      kind = "stream";
      for (int p = 0; p < 2; ++p) {
        for (uint64_t i = 0; i < 64; ++i) body.push_back(TraceOp::load(a(i)));
      }
      break;
    default:
      break;
  }
  return body;
}

const std::vector<uint64_t> kDelays = {0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144};

}  // namespace

WitnessScenario witness_scenario(Channel c, bool correct_sizing) {
  WitnessScenario s;
  s.cfg = witness_config(c, correct_sizing);
  const SimConfig& cfg = s.cfg;
  s.victim.core = 1;
  s.victim.regions = {kVictimRegion};

  if (c != Channel::kDowngradeLogic && c != Channel::kUqHeadline) {
    s.victim.trace = mixed_victim(cfg);
    std::string kind;
    const Trace body = single_attacker(cfg, c, kind);
    for (uint64_t d : kDelays) {
      s.attackers.push_back(
          {kind + "+" + std::to_string(d), {Placement{0, {kAttackerRegion}, gen::prefixed(d, body)}}});
    }
    return s;
  }

  // The victim sits on the last core, so its MSHRs have the highest indexes.
  s.victim.core = 3;
  auto a = [&](uint64_t i) { return gen::line_byte(cfg, kAttackerRegion, i); };
  std::vector<Trace> bodies(3);
  std::string kind;
  if (c == Channel::kDowngradeLogic) {
    // The victim replaces lines still held in its own L1, so each of its
    // misses waits on a back-invalidation.
    s.victim.trace = loads(cfg, kVictimRegion, {0, 4, 8, 1, 5, 9}, 10);
    // Three attacker cores store to and load from the same few lines, so
    // most of their misses need one or two downgrade requests.
    kind = "share_pingpong";
    for (int p = 0; p < 16; ++p) {
      for (uint64_t i = 0; i < 6; ++i) {
        for (uint32_t k = 0; k < 3; ++k) {
          const uint64_t line = (i + k * 2) % 6;
          bodies[k].push_back((i + k) % 3 == 0 ? TraceOp::store(a(line)) : TraceOp::load(a(line)));
        }
      }
    }
  } else {
    // L1 misses that hit in the LLC: a response through the UQ every few
    // cycles.
    s.victim.trace = loads(cfg, kVictimRegion, {0, 2, 4, 6}, 60);
    // Cores 0 and 1 keep invalidating what core 2 reads. Core 2's one-entry
    // response link fills and its L1 stops taking messages.
    kind = "invalidate_reader";
    for (int p = 0; p < 20; ++p) {
      for (uint64_t i = 0; i < 8; ++i) {
        bodies[0].push_back(TraceOp::store(a((i + 1) % 8)));
        bodies[1].push_back(TraceOp::store(a((i + 2) % 8)));
        bodies[2].push_back(TraceOp::load(a(i)));
      }
    }
  }
  for (uint64_t d : kDelays) {
    AttackerRun run;
    run.name = kind + "+" + std::to_string(d);
    for (uint32_t k = 0; k < 3; ++k) {
      run.cores.push_back({k, {kAttackerRegion}, gen::prefixed(d, gen::prefixed(k, bodies[k])), kAttackerDomain});
    }
    s.attackers.push_back(std::move(run));
  }
  return s;
}

WitnessResult channel_witness(Channel c, const WitnessSetup& setup) {
  const std::optional<Flag> flag = channel_flag(c);
  const Variant insecure_v = flag ? setup.secure.without(*flag) : setup.secure;
  const WitnessScenario secure = witness_scenario(c, setup.correct_sizing);
  const WitnessScenario insecure = witness_scenario(c, flag ? setup.correct_sizing : false);

  WitnessResult r;
  r.channel = c;
  r.insecure_report =
      run_differential(insecure.cfg, insecure_v, insecure.victim, insecure.attackers, 2'000'000);
  r.secure_report =
      run_differential(secure.cfg, setup.secure, secure.victim, secure.attackers, 2'000'000);
  r.insecure_diverges = !r.insecure_report.equal;
  r.secure_diverges = !r.secure_report.equal;
  return r;
}

// ---------------------------------------------------------------------------

PrimeProbeResult prime_probe(const Variant& variant, uint64_t seed, bool victim_active) {
  SimConfig cfg;
  cfg.n_cores = 2;
  cfg.l1_sets = 16;
  cfg.l1_ways = 4;
  cfg.llc_sets = 64;
  cfg.llc_ways = 4;
  cfg.llc_mshrs_total = 12;
  cfg.n_regions = 16;
  cfg.dram_bytes = uint64_t{16} << 20;
  cfg.bp_table_entries = 64;
  cfg.l2_tlb_sets = 16;
  cfg = sized_for(cfg, variant);
  DetRng rng(derive_seed(seed, "prime_probe"));
  cfg.seed = rng.next();

  const RegionId ar{static_cast<uint32_t>(4 + 4 * rng.below(3))};  // color 0
  const RegionId vr{static_cast<uint32_t>(5 + 4 * rng.below(3))};  // color 1
  const uint64_t set = rng.below(cfg.llc_sets);
  const uint64_t ways = cfg.llc_ways;

  Trace attacker;
  for (uint64_t j = 0; j < ways; ++j) {
    attacker.push_back(TraceOp::load(gen::line_byte(cfg, ar, set + j * cfg.llc_sets)));
  }
  attacker.push_back(TraceOp::compute(800));
  for (uint64_t j = 0; j < ways; ++j) {
    attacker.push_back(TraceOp::load(gen::line_byte(cfg, ar, set + j * cfg.llc_sets)));
  }
  const uint64_t target = set + cfg.llc_sets * (1 + rng.below(8));
  const uint64_t wait = 300 + rng.below(200);

  auto probe_slow = [&](bool touch) {
    Trace victim{TraceOp::compute(wait)};
    if (touch) victim.push_back(TraceOp::load(gen::line_byte(cfg, vr, target)));
    RunResult r = run_placements(cfg, variant, {{0, {ar}, attacker}, {1, {vr}, victim}}, 1'000'000);
    const auto& ops = r.per_core[0].ops;
    int slow = 0;
    for (size_t i = ops.size() - ways; i < ops.size(); ++i) {
      if (ops[i].completion - ops[i].issue > cfg.l1_hit_latency) ++slow;
    }
    return slow;
  };
  PrimeProbeResult out;
  out.slow_skip = probe_slow(false);
  out.slow_touch = victim_active ? probe_slow(true) : out.slow_skip;
  out.detected = out.slow_touch != out.slow_skip;
  return out;
}

// ---------------------------------------------------------------------------

CoherenceReport coherence_check(const Variant& variant, uint32_t n_cores, uint64_t ops_per_core,
                                uint64_t seed) {
  SimConfig cfg;
  cfg.n_cores = n_cores;
  cfg.l1_sets = 4;
  cfg.l1_ways = 2;
  cfg.l1_mshrs = 4;
  cfg.llc_sets = 16;
  cfg.llc_ways = 2;
  cfg.llc_mshrs_total = 12;
  cfg.dram_latency = 30;
  cfg.n_regions = 16;
  cfg.dram_bytes = uint64_t{16} << 20;
  cfg.bp_table_entries = 64;
  cfg.l2_tlb_sets = 16;
  cfg.issue_window = 16;
  cfg.miss_banks = 4;
  cfg = sized_for(cfg, variant);
  DetRng rng(derive_seed(seed, "coherence"));
  cfg.seed = rng.next();

  // A shared pool of lines in two regions, dense enough to collide in both
  // cache levels.
  std::vector<uint64_t> pool;
  for (uint64_t i = 0; i < 40; ++i) {
    pool.push_back(gen::line_byte(cfg, RegionId{static_cast<uint32_t>(1 + i % 2)},
                                  (i / 2) * (1 + rng.below(5))));
  }
  MachineOptions opts;
  opts.record_performs = true;
  opts.invariant_period = 64;
  Machine m(cfg, variant, opts);
  const RegionBits bits(cfg.n_regions, true);
  for (uint32_t c = 0; c < n_cores; ++c) {
    Trace t;
    for (uint64_t i = 0; i < ops_per_core; ++i) {
      const uint64_t roll = rng.below(100);
      const uint64_t addr = pool[rng.below(pool.size())] + 8 * rng.below(kWordsPerLine);
      if (roll < 8) t.push_back(TraceOp::compute(1 + rng.below(6)));
      else if (roll < 55) t.push_back(TraceOp::load(addr));
      else t.push_back(TraceOp::store(addr));
    }
    m.start(c, std::move(t), bits);
  }
  CoherenceReport rep;
  if (!m.run(200'000'000)) {
    rep.mismatches = 1;
    rep.first = "run did not finish";
    return rep;
  }
  std::map<uint64_t, uint64_t> mem;
  for (const auto& e : m.performs()) {
    ++rep.ops;
    if (e.is_store) {
      mem[e.word_addr] = e.value;
      continue;
    }
    ++rep.loads_checked;
    const uint64_t expect = mem.count(e.word_addr) ? mem[e.word_addr] : 0;
    if (e.value != expect) {
      if (rep.mismatches++ == 0) {
        std::ostringstream os;
        os << "cycle " << e.cycle << " core " << e.core << " op " << e.op << " load 0x"
           << std::hex << e.word_addr << " got 0x" << e.value << " want 0x" << expect;
        rep.first = os.str();
      }
    }
  }
  for (const auto& [addr, value] : mem) {
    if (m.peek_word(addr) != value) ++rep.final_mismatches;
  }
  m.llc().check_invariants(m.now());
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

SimConfig sizing_config(uint32_t n_cores, uint32_t mshrs_total) {
  SimConfig cfg;
  cfg.n_cores = n_cores;
  cfg.l1_sets = 8;
  cfg.l1_ways = 2;
  cfg.llc_sets = 64;
  cfg.llc_ways = 4;
  cfg.llc_mshrs_total = mshrs_total;
  cfg.n_regions = 16;
  cfg.dram_bytes = uint64_t{16} << 20;
  cfg.bp_table_entries = 64;
  cfg.l2_tlb_sets = 16;
  return cfg;
}

}  // namespace

SizingReport sizing_random(uint32_t n_cores, uint32_t mshrs_total, uint64_t cycles,
                           uint64_t seed) {
  const SimConfig cfg = sizing_config(n_cores, mshrs_total);
  DetRng rng(derive_seed(seed, "sizing"));
  std::vector<Placement> ps;
  for (uint32_t c = 0; c < n_cores; ++c) {
    const std::vector<RegionId> regions{RegionId{4 + c}, RegionId{8 + c}};
    Trace t;
    while (t.size() < cycles / 2) {
      const uint64_t kind = rng.below(3);
      const size_t n = 64 + rng.below(512);
      if (kind == 0) {
        DetRng sub = rng.split("mix" + std::to_string(t.size()));
        Trace part = gen::random_mix(sub, cfg, regions, n, 4096);
        t.insert(t.end(), part.begin(), part.end());
      } else {
        const uint64_t base = rng.below(4096);
        for (size_t i = 0; i < n; ++i) {
          const uint64_t addr = gen::line_byte(cfg, regions[i % 2], base + i);
          t.push_back(kind == 1 ? TraceOp::store(addr) : TraceOp::load(addr));
        }
      }
      if (rng.below(4) == 0) t.push_back(TraceOp::compute(1 + rng.below(200)));
    }
    ps.push_back({c, regions, std::move(t)});
  }
  RunResult r = run_placements(cfg, Variant::secure(), ps, cycles);
  return SizingReport{r.cycles, r.dram.backpressure, r.dram.max_inflight};
}

SizingReport sizing_burst(uint32_t mshrs_total) {
  const SimConfig cfg = sizing_config(2, mshrs_total);
  std::vector<Placement> ps;
  for (uint32_t c = 0; c < 2; ++c) {
    const std::vector<RegionId> regions{RegionId{4 + c}};
    // Fill the share with dirty lines, then keep replacing them.
    ps.push_back({c, regions, gen::thrashing(cfg, regions, 1024, 2)});
  }
  RunResult r = run_placements(cfg, Variant::secure(), ps, 10'000'000);
  return SizingReport{r.cycles, r.dram.backpressure, r.dram.max_inflight};
}

// ---------------------------------------------------------------------------

PurgeReport purge_check(const SimConfig& cfg_in, uint64_t seed) {
  SimConfig cfg = cfg_in;
  cfg.n_cores = 1;
  const Variant v = Variant::parse("flush");
  Machine m(cfg, v);
  DetRng rng(derive_seed(seed, "purge"));
  const std::vector<RegionId> regions{RegionId{1}, RegionId{2}};
  m.start(0, gen::random_mix(rng, cfg, regions, 4000, 4096), bits_for(cfg, all_regions(cfg)));
  const uint64_t switch_at = 2000 + rng.below(4000);
  while (m.now() < switch_at) m.tick();
  SwitchPlan plan;
  plan.replace_trace = true;
  m.core(0).request_switch(std::move(plan));
  if (!m.run(m.now() + 10'000'000)) throw std::runtime_error("purge did not finish");
  PurgeReport out;
  out.duration = m.core(0).stats().purge_stall_cycles;
  Core fresh(0, cfg, v);
  out.state_equal = m.core(0).serialize_state() == fresh.serialize_state();
  return out;
}

// ---------------------------------------------------------------------------

SimConfig sized_for(const SimConfig& cfg, const Variant& v) {
  SimConfig out = cfg;
  if (v.any_strong()) {
    const MshrBudget b = mshr_budget(cfg.dram_max_inflight, cfg.n_cores);
    out.llc_mshrs_total = std::min(cfg.llc_mshrs_total, b.per_core * cfg.n_cores);
  }
  return out;
}

std::vector<OverheadRow> overhead_report(const SimConfig& cfg, const std::vector<NamedTrace>& traces,
                                         const std::vector<Variant>& variants,
                                         uint64_t max_cycles, unsigned workers) {
  std::vector<Variant> order{Variant::base()};
  for (const auto& v : variants) {
    if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
  }
  struct Job {
    size_t trace;
    size_t variant;
  };
  std::vector<Job> jobs;
  for (size_t t = 0; t < traces.size(); ++t) {
    for (size_t v = 0; v < order.size(); ++v) jobs.push_back({t, v});
  }
  std::vector<OverheadRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](size_t j) {
    const Variant& v = order[jobs[j].variant];
    const NamedTrace& nt = traces[jobs[j].trace];
    SimConfig c = sized_for(cfg, v);
    c.n_cores = std::max<uint32_t>(c.n_cores, 1);
    RunResult r = run_placements(c, v, {{0, all_regions(c), nt.trace}}, max_cycles);
    OverheadRow row;
    row.variant = v.name();
    row.trace = nt.name;
    row.cycles = r.stats[0].cycles;
    row.memops = r.stats[0].memops;
    row.llc_misses = r.stats[0].llc_misses;
    row.mshr_stall_cycles = r.stats[0].mshr_stall_cycles;
    row.idle_grants = r.llc.idle_grants;
    row.dq_retries = r.stats[0].dq_retries;
    row.purge_stalls = r.stats[0].purge_stalls;
    rows[j] = row;
  }, workers);
  const bool base_requested =
      std::find(variants.begin(), variants.end(), Variant::base()) != variants.end();
  std::vector<OverheadRow> out;
  for (size_t t = 0; t < traces.size(); ++t) {
    const uint64_t base_cycles = rows[t * order.size()].cycles;
    for (size_t v = 0; v < order.size(); ++v) {
      if (v == 0 && !base_requested) continue;
      OverheadRow row = rows[t * order.size() + v];
      row.normalized = base_cycles == 0 ? 1.0 : static_cast<double>(row.cycles) / base_cycles;
      out.push_back(row);
    }
  }
  return out;
}

std::string overhead_csv(const std::vector<OverheadRow>& rows) {
  std::ostringstream os;
  os << "# schema=1\n";
  os << "variant,trace,cycles,memops,llc_misses,llc_misses_per_kop,mshr_stall_cycles,"
        "arbiter_idle_grants,dq_retries,purge_stalls,normalized_to_base\n";
  for (const auto& r : rows) {
    const double mpk = r.memops == 0 ? 0.0 : 1000.0 * static_cast<double>(r.llc_misses) / r.memops;
    os << r.variant << ',' << r.trace << ',' << r.cycles << ',' << r.memops << ','
       << r.llc_misses << ',' << std::fixed << std::setprecision(3) << mpk << ','
       << r.mshr_stall_cycles << ',' << r.idle_grants << ',' << r.dq_retries << ','
       << r.purge_stalls << ',' << std::setprecision(4) << r.normalized << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

void parallel_for(size_t n, const std::function<void(size_t)>& fn, unsigned workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<size_t>(workers, n));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mi6
