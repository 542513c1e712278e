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


#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mi6/harness.hpp"
#include "mi6/monitor.hpp"

namespace mi6 {
namespace {

std::vector<RegionId> regs(std::initializer_list<uint32_t> rs) {
  std::vector<RegionId> out;
  for (uint32_t r : rs) out.push_back(RegionId{r});
  return out;
}

// Loads over a shuffled set of lines, each followed by a short compute.
Trace pointer_chase(const SimConfig& cfg, RegionId r, size_t lines, uint64_t seed) {
  std::vector<uint64_t> order(lines);
  std::iota(order.begin(), order.end(), 0);
  DetRng rng(seed);
  for (size_t i = lines; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  Trace t;
  for (uint64_t l : order) {
    t.push_back(TraceOp::load(gen::line_byte(cfg, r, l * 37)));
    t.push_back(TraceOp::compute(3));
  }
  return t;
}

TEST(Compare, Reports) {
  Observables a{{{0, 1, 5, false, false, 0}, {1, 2, 9, false, false, 0}}, 10};
  Observables b = a;
  EXPECT_TRUE(compare(a, b).equal);
  EXPECT_EQ(describe(compare(a, b)), "equal");
  b.ops[1].completion = 11;
  auto r = compare(a, b);
  EXPECT_FALSE(r.equal);
  ASSERT_TRUE(r.first_divergence);
  EXPECT_EQ(r.first_divergence->op, 1u);
  EXPECT_EQ(r.first_divergence->a_completion, 9u);
  EXPECT_EQ(r.first_divergence->b_completion, 11u);
  EXPECT_NE(describe(r).find("op 1"), std::string::npos);
  b = a;
  b.final_cycle = 12;
  r = compare(a, b);
  EXPECT_FALSE(r.equal);
  EXPECT_EQ(r.first_divergence->op, UINT32_MAX);
}

TEST(Differential, SecureVictimUnaffected) {
  SimConfig cfg = independence_config();
  Placement victim;
  victim.core = 0;
  victim.regions = regs({1});
  victim.trace = pointer_chase(cfg, RegionId{1}, 300, 5);
  const std::vector<RegionId> att = regs({2, 3});
  std::vector<NamedTrace> attackers = {
      {"idle", {}},
      {"streaming", gen::streaming(cfg, att, 4096, 2)},
      {"thrashing", gen::thrashing(cfg, att, 2048, 3)},
  };
  auto r = run_differential(cfg, Variant::secure(), victim, 1, att, attackers, 50'000'000);
  EXPECT_TRUE(r.equal) << describe(r);
}

TEST(Differential, BaseLeaksThroughSharedSet) {
  const WitnessScenario s = witness_scenario(Channel::kCacheSet, true);
  auto r = run_differential(s.cfg, Variant::base(), s.victim, s.attackers, 10'000'000);
  EXPECT_FALSE(r.equal);
  EXPECT_FALSE(r.label.empty());
}

TEST(Differential, IdleCopyEqual) {
  SimConfig cfg = independence_config();
  Placement victim;
  victim.regions = regs({1});
  victim.trace = pointer_chase(cfg, RegionId{1}, 100, 1);
  for (const Variant& v : {Variant::base(), Variant::parse("fpma"), Variant::secure()}) {
    auto r = run_differential(cfg, v, victim, 1, regs({2}), {{"idle", {}}}, 10'000'000);
    EXPECT_TRUE(r.equal) << v.name();
  }
}

// Running one attacker twice gives the same victim view, for any variant.
TEST(Differential, SameAttackerTwice) {
  SimConfig cfg = independence_config();
  Placement victim;
  victim.regions = regs({1});
  victim.trace = pointer_chase(cfg, RegionId{1}, 100, 2);
  const Trace a = gen::thrashing(cfg, regs({2}), 512, 2);
  for (const Variant& v : {Variant::base(), Variant::parse("part"), Variant::secure()}) {
    Placement att{1, regs({2}), a};
    RunResult x = run_placements(cfg, v, {victim, att}, 10'000'000);
    RunResult y = run_placements(cfg, v, {victim, att}, 10'000'000);
    EXPECT_TRUE(compare(x.per_core[0], y.per_core[0]).equal) << v.name();
  }
}

TEST(Differential, OverlappingDomainsRejected) {
  SimConfig cfg = independence_config();
  Placement v{0, regs({1, 2}), {}};
  Placement a{1, regs({2}), {}};
  EXPECT_THROW(run_placements(cfg, Variant::base(), {v, a}, 100), std::invalid_argument);
  Placement twice{0, regs({3}), {}};
  EXPECT_THROW(run_placements(cfg, Variant::base(), {v, twice}, 100), std::invalid_argument);
  // Cores of one domain may share regions.
  Placement a0{0, regs({2}), {}, 7};
  Placement a1{1, regs({2}), {}, 7};
  EXPECT_NO_THROW(run_placements(cfg, Variant::base(), {a0, a1}, 100));
}

// The victim cannot tell how many cores its neighbour domain uses.
TEST(Differential, AttackerCoreCountInvisible) {
  SimConfig cfg = independence_config();
  cfg.n_cores = 4;
  Placement victim{0, regs({1}), pointer_chase(cfg, RegionId{1}, 200, 9)};
  const auto att = regs({2, 3});
  AttackerRun one{"one", {{1, att, gen::thrashing(cfg, att, 2048, 2), 0}}};
  AttackerRun three{"three", {}};
  for (uint32_t c = 1; c < 4; ++c) {
    three.cores.push_back({c, att, gen::streaming(cfg, att, 1024 * c, 2), 0});
  }
  auto r = run_differential(cfg, Variant::secure(), victim, {one, three}, 50'000'000);
  EXPECT_TRUE(r.equal) << describe(r);
  auto b = run_differential(cfg, Variant::base(), victim, {one, three}, 50'000'000);
  EXPECT_FALSE(b.equal);
}

TEST(Independence, Seeds) {
  SimConfig cfg = independence_config();
  for (uint64_t seed : {1u, 2u, 3u}) {
    auto c = independence_case(cfg, Variant::secure(), seed);
    EXPECT_TRUE(c.report.equal) << seed << ": " << describe(c.report);
  }
  bool any = false;
  for (uint64_t seed : {1u, 2u, 3u}) any |= !independence_case(cfg, Variant::base(), seed).report.equal;
  EXPECT_TRUE(any);
}

TEST(Witness, Names) {
  EXPECT_EQ(all_channels().size(), 7u);
  for (Channel c : all_channels()) EXPECT_EQ(channel_from_name(channel_name(c)), c);
  EXPECT_FALSE(channel_from_name("NOPE"));
}

class WitnessRow : public ::testing::TestWithParam<Channel> {};

TEST_P(WitnessRow, InsecureDivergesSecureDoesNot) {
  const WitnessResult w = channel_witness(GetParam());
  EXPECT_TRUE(w.insecure_diverges) << describe(w.insecure_report);
  EXPECT_FALSE(w.secure_diverges) << describe(w.secure_report);
  EXPECT_TRUE(w.pass());
}

INSTANTIATE_TEST_SUITE_P(Examples, WitnessRow,
                         ::testing::Values(Channel::kCacheSet, Channel::kMshrExhaust,
                                           Channel::kDqTwoCycle),
                         [](const auto& info) { return std::string(channel_name(info.param)); });

// Checked-in fixtures match the generated scenarios. Attacker runs are
// named <fixture>+<start delay>.
TEST(Witness, FixturesMatch) {
  for (Channel c : all_channels()) {
    const WitnessScenario s = witness_scenario(c, true);
    const std::string dir = std::string(MI6_FIXTURE_DIR) + "/" + std::string(channel_name(c));
    EXPECT_EQ(load_trace(dir + "/victim.tr"), s.victim.trace) << channel_name(c);
    for (const auto& run : s.attackers) {
      const auto plus = run.name.find('+');
      ASSERT_NE(plus, std::string::npos) << run.name;
      const uint64_t delay = std::stoull(run.name.substr(plus + 1));
      for (const auto& p : run.cores) {
        const std::string path =
            dir + "/" + run.name.substr(0, plus) + ".core" + std::to_string(p.core) + ".tr";
        EXPECT_EQ(gen::prefixed(delay, load_trace(path)), p.trace) << run.name;
      }
    }
  }
}

TEST(PrimeProbe, Examples) {
  int base_hits = 0;
  int part_hits = 0;
  int idle_hits = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    base_hits += prime_probe(Variant::base(), seed).detected;
    part_hits += prime_probe(Variant::parse("part"), seed).detected;
    idle_hits += prime_probe(Variant::base(), seed, false).detected;
  }
  EXPECT_EQ(base_hits, 5);
  EXPECT_EQ(part_hits, 0);
  EXPECT_EQ(idle_hits, 0);
}

TEST(Coherence, SmallRuns) {
  for (const Variant& v : {Variant::base(), Variant::secure()}) {
    auto r = coherence_check(v, 2, 2000, 7);
    EXPECT_EQ(r.mismatches, 0u) << r.first;
    EXPECT_EQ(r.final_mismatches, 0u);
    EXPECT_GT(r.loads_checked, 0u);
  }
}

TEST(Overhead, BaseAgainstItself) {
  SimConfig cfg;
  DetRng rng(1);
  std::vector<NamedTrace> traces = {{"mix", gen::random_mix(rng, cfg, regs({1}), 2000, 4096)}};
  auto rows = overhead_report(cfg, traces, {Variant::base(), Variant::base()});
  ASSERT_EQ(rows.size(), 1u);  // duplicates collapse
  EXPECT_EQ(rows[0].normalized, 1.0);
  EXPECT_EQ(overhead_report(cfg, traces, {Variant::base()}, 50'000'000, 1)[0].cycles,
            rows[0].cycles);
}

TEST(Overhead, NonSpecIndependentMisses) {
  SimConfig cfg;
  std::vector<NamedTrace> traces = {{"par8", gen::parallel_misses(cfg, RegionId{1}, 8)}};
  auto rows = overhead_report(cfg, traces, {Variant::base(), Variant::parse("nonspec")});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GE(rows[1].cycles, 4 * rows[0].cycles);
  EXPECT_GE(rows[1].normalized, 4.0);
}

// Traps every 3000 cycles under FLUSH; each costs one full purge.
TEST(Overhead, FlushPerSwitch) {
  SimConfig cfg;
  Machine m(cfg, Variant::parse("flush"));
  Monitor mon(m);
  mon.create_domain("a", regs({1}));
  DetRng rng(6);
  mon.schedule("a", 0, gen::random_mix(rng, cfg, regs({1}), 3000, 1024));
  std::string sched;
  for (int k = 1; k <= 5; ++k) sched += "@" + std::to_string(3000 * k) + " trap core=0\n";
  mon.load(parse_schedule(sched, ""));
  ASSERT_TRUE(m.run(10'000'000));
  const CoreStats& s = m.core(0).stats();
  EXPECT_EQ(s.purges, 6u);
  EXPECT_EQ(s.purge_stall_cycles, 6u * 512);
  auto row = m.stats_rows().at(0);
  EXPECT_EQ(row.purge_stalls, s.purge_stall_cycles);
}

TEST(Overhead, Csv) {
  OverheadRow r;
  r.variant = "part";
  r.trace = "t";
  r.cycles = 10;
  r.normalized = 1.25;
  const std::string csv = overhead_csv({r});
  EXPECT_EQ(csv.rfind("# schema=1\n", 0), 0u);
  EXPECT_NE(csv.find("part,t,10"), std::string::npos);
  EXPECT_NE(csv.find("1.25"), std::string::npos);
}

TEST(Overhead, SizedFor) {
  SimConfig cfg;
  EXPECT_EQ(sized_for(cfg, Variant::base()).llc_mshrs_total, 16u);
  EXPECT_EQ(sized_for(cfg, Variant::secure()).llc_mshrs_total, 12u);
  EXPECT_TRUE(validate_config(sized_for(cfg, Variant::secure()), Variant::secure()).empty());
}

TEST(ParallelFor, CoversAndRethrows) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), [&](size_t i) { hit[i]++; }, 4);
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, [](size_t i) {
                 if (i == 7) throw std::runtime_error("x");
               }, 3),
               std::runtime_error);
}

}  // namespace
}  // namespace mi6
