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

#include <string>

#include "mi6/core.hpp"
#include "mi6/harness.hpp"
#include "mi6/machine.hpp"

namespace mi6 {
namespace {

RegionBits only(const SimConfig& cfg, std::initializer_list<uint32_t> rs) {
  RegionBits bv(cfg.n_regions, false);
  for (uint32_t r : rs) bv[r] = true;
  return bv;
}

TEST(Trace, Parse) {
  Trace t = parse_trace("C 10\nL 0x1000\nS 0x1040");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0], TraceOp::compute(10));
  EXPECT_EQ(t[1], TraceOp::load(0x1000));
  EXPECT_EQ(t[2], TraceOp::store(0x1040));
}

TEST(Trace, EmptyAndComments) {
  EXPECT_TRUE(parse_trace("").empty());
  EXPECT_TRUE(parse_trace("# nothing\n\n   \n").empty());
  EXPECT_EQ(parse_trace("L 0x40  # a load\n").size(), 1u);
}

TEST(Trace, Errors) {
  try {
    parse_trace("L xyz");
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.line(), 1);
  }
  try {
    parse_trace("C 1\nC 0\n");
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(parse_trace("X 1"), TraceError);
  EXPECT_THROW(parse_trace("L"), TraceError);
  EXPECT_THROW(parse_trace("L 0x10 0x20"), TraceError);
  EXPECT_THROW(load_trace("/nonexistent/t.tr"), TraceError);
}

TEST(Trace, FormatRoundTrip) {
  Trace t = {TraceOp::compute(3), TraceOp::load(0xdeadbe0), TraceOp::store(0x40)};
  EXPECT_EQ(parse_trace(format_trace(t)), t);
}

TEST(Trace, RangeCheck) {
  SimConfig cfg;
  EXPECT_NO_THROW(check_trace_range({TraceOp::load(cfg.dram_bytes - 8)}, cfg));
  EXPECT_THROW(check_trace_range({TraceOp::compute(1), TraceOp::load(cfg.dram_bytes)}, cfg),
               TraceError);
}

TEST(CheckAccess, Examples) {
  SimConfig cfg;
  const RegionBits bv = only(cfg, {4, 5});
  EXPECT_EQ(check_access(region_base(RegionId{4}, cfg), bv, cfg), Access::kAllowed);
  EXPECT_EQ(check_access(LineAddress{region_base(RegionId{5}, cfg).value + 17}, bv, cfg),
            Access::kAllowed);
  EXPECT_EQ(check_access(region_base(RegionId{7}, cfg), bv, cfg), Access::kFault);
  const RegionBits all(cfg.n_regions, true);
  for (uint64_t l = 0; l < cfg.line_count(); l += cfg.line_count() / 97) {
    EXPECT_EQ(check_access(LineAddress{l}, all, cfg), Access::kAllowed);
  }
}

// A faulting op completes at once and never reaches the LLC.
TEST(CheckAccess, FaultEmitsNothing) {
  SimConfig cfg;
  Placement p;
  p.regions = {RegionId{4}, RegionId{5}};
  p.trace = {TraceOp::load(gen::line_byte(cfg, RegionId{7}, 0)),
             TraceOp::store(gen::line_byte(cfg, RegionId{7}, 1))};
  RunResult r = run_placements(cfg, Variant::base(), {p}, 10'000, {.event_log = true});
  ASSERT_TRUE(r.completed);
  for (const auto& op : r.per_core[0].ops) {
    EXPECT_TRUE(op.fault);
    EXPECT_EQ(op.issue, op.completion);
  }
  EXPECT_EQ(r.stats[0].faults, 2u);
  EXPECT_EQ(r.stats[0].l1_misses, 0u);
  EXPECT_EQ(r.stats[0].llc_misses, 0u);
  EXPECT_EQ(r.dram.reads, 0u);
  EXPECT_EQ(r.log.find(",llc,"), std::string::npos);
  EXPECT_EQ(r.log.find("upreq"), std::string::npos);
}

TEST(PageWalk, CachesOnlyAllowed) {
  SimConfig cfg;
  Core c(0, cfg, Variant::base());
  c.set_bitvector(only(cfg, {4}));
  const uint64_t pages_per_region = cfg.region_bytes() / cfg.page_bytes;
  const uint64_t own = 4 * pages_per_region + 3;
  const uint64_t foreign = 9 * pages_per_region;
  EXPECT_FALSE(c.tlb_has(own));
  EXPECT_EQ(c.page_walk_check(own), Access::kAllowed);
  EXPECT_TRUE(c.tlb_has(own));
  EXPECT_EQ(c.page_walk_check(foreign), Access::kFault);
  EXPECT_FALSE(c.tlb_has(foreign));
  c.tlb_shootdown();
  EXPECT_FALSE(c.tlb_has(own));
}

TEST(PageWalk, SecondAccessHitsTlb) {
  SimConfig cfg;
  const uint64_t a = gen::line_byte(cfg, RegionId{2}, 0);
  Placement p;
  p.regions = {RegionId{2}};
  p.trace = {TraceOp::load(a), TraceOp::load(a + 64)};
  RunResult r = run_placements(cfg, Variant::base(), {p}, 10'000);
  ASSERT_EQ(r.per_core[0].ops.size(), 2u);
  // Only the first op pays the walk.
  EXPECT_EQ(r.per_core[0].ops[0].issue, cfg.page_walk_latency);
  EXPECT_EQ(r.per_core[0].ops[1].issue, cfg.page_walk_latency);
}

TEST(PageWalk, ShootdownForcesRewalk) {
  SimConfig cfg;
  const uint64_t a = gen::line_byte(cfg, RegionId{2}, 0);
  Machine m(cfg, Variant::base());
  m.start(0, {TraceOp::load(a)}, only(cfg, {2}));
  m.run(10'000);
  const uint64_t page = a / cfg.page_bytes;
  EXPECT_TRUE(m.core(0).tlb_has(page));
  m.core(0).tlb_shootdown();
  EXPECT_FALSE(m.core(0).tlb_has(page));
  const uint64_t t0 = m.now();
  m.start(0, {TraceOp::load(a)}, only(cfg, {2}));
  m.run(10'000);
  const OpRecord& rec = m.core(0).records().at(0);
  EXPECT_EQ(rec.issue, t0 + cfg.page_walk_latency);
  EXPECT_EQ(rec.completion, rec.issue + cfg.l1_hit_latency);
}

// Permissions revoked while the walk is in flight: the walk re-checks the
// bitvector when it completes.
TEST(PageWalk, ShootdownMidWalk) {
  SimConfig cfg;
  const uint64_t a = gen::line_byte(cfg, RegionId{2}, 0);
  Machine m(cfg, Variant::base());
  m.start(0, {TraceOp::load(a)}, only(cfg, {2}));
  for (int i = 0; i < 5; ++i) m.tick();
  m.core(0).set_bitvector(only(cfg, {3}));
  m.core(0).tlb_shootdown();
  m.run(10'000);
  const OpRecord& rec = m.core(0).records().at(0);
  EXPECT_TRUE(rec.fault);
  EXPECT_FALSE(m.core(0).tlb_has(a / cfg.page_bytes));
}

TEST(Tlb, LruAndClear) {
  PermissionTlb t(2, 1, 1);
  t.insert(1);
  t.insert(2);
  EXPECT_TRUE(t.lookup(1));
  t.insert(3);  // evicts 2 from L1; L2 holds only the latest
  EXPECT_TRUE(t.contains(1));
  EXPECT_TRUE(t.contains(3));
  t.clear();
  EXPECT_FALSE(t.contains(1));
  EXPECT_EQ(t.serialize(), PermissionTlb(2, 1, 1).serialize());
}

// Default BASE, one core, cold caches. Walk 0..20, LLC pipeline 21..25,
// DQ 26, DRAM accept 27, response 147 visible 148, pipeline 148..152,
// UQ 152, to_l1 153, fill 154.
TEST(CoreStep, ColdLoadGolden) {
  SimConfig cfg;
  Placement p;
  p.regions = {RegionId{1}};
  p.trace = {TraceOp::load(gen::line_byte(cfg, RegionId{1}, 3))};
  RunResult r = run_placements(cfg, Variant::base(), {p}, 10'000);
  ASSERT_EQ(r.per_core[0].ops.size(), 1u);
  EXPECT_EQ(r.per_core[0].ops[0].issue, 20u);
  EXPECT_EQ(r.per_core[0].ops[0].completion, 154u);
  // A lone core owns every arbiter slot, so SECURE costs nothing here.
  // ARB lengthens both pipeline passes by 8.
  SimConfig sc = cfg;
  sc.llc_mshrs_total = 12;
  RunResult s = run_placements(sc, Variant::secure(), {p}, 10'000);
  EXPECT_EQ(s.per_core[0].ops[0].completion, 154u);
  RunResult a = run_placements(cfg, Variant::parse("arb"), {p}, 10'000);
  EXPECT_EQ(a.per_core[0].ops[0].completion, 154u + 16);
}

TEST(CoreStep, HitUnderFill) {
  SimConfig cfg;
  const uint64_t a = gen::line_byte(cfg, RegionId{1}, 3);
  Placement p;
  p.regions = {RegionId{1}};
  p.trace = {TraceOp::load(a), TraceOp::load(a + 8)};
  RunResult r = run_placements(cfg, Variant::base(), {p}, 10'000);
  const auto& ops = r.per_core[0].ops;
  ASSERT_EQ(ops.size(), 2u);
  EXPECT_EQ(ops[0].completion, 154u);
  EXPECT_EQ(ops[1].completion, ops[0].completion + cfg.l1_hit_latency);
  EXPECT_EQ(r.stats[0].l1_misses, 1u);
}

TEST(CoreStep, NonSpecSerializes) {
  SimConfig cfg;
  Placement p;
  p.regions = {RegionId{1}};
  p.trace = gen::parallel_misses(cfg, RegionId{1}, 2);
  RunResult base = run_placements(cfg, Variant::base(), {p}, 10'000);
  RunResult ns = run_placements(cfg, Variant::parse("nonspec"), {p}, 10'000);
  const auto& b = base.per_core[0].ops;
  const auto& n = ns.per_core[0].ops;
  ASSERT_EQ(b.size(), 2u);
  ASSERT_EQ(n.size(), 2u);
  EXPECT_LT(b[1].issue, b[0].completion);   // overlapped
  EXPECT_GE(n[1].issue, n[0].completion);   // serialized
}

TEST(CoreStep, NonSpecAtMostOneInFlight) {
  SimConfig cfg;
  DetRng rng(3);
  Machine m(cfg, Variant::parse("nonspec"));
  m.start(0, gen::random_mix(rng, cfg, {RegionId{1}}, 300, 512), only(cfg, {1}));
  while (!m.cores_done()) {
    m.tick();
    ASSERT_LE(m.core(0).inflight_memops(), 1u) << m.now();
  }
  EXPECT_EQ(m.core(0).stats().max_inflight_memops, 1u);
}

TEST(CoreStep, UpgradeResponseWithoutMshrAborts) {
  SimConfig cfg;
  Core c(0, cfg, Variant::base());
  CoreLink link(0, cfg);
  EventLog log;
  link.to_l1.enqueue(ToL1{ToL1::Kind::kUpgradeResponse, LineAddress{5}, Msi::kS, {}});
  link.commit();
  EXPECT_THROW(c.step(1, link, log, nullptr), SimError);
}

TEST(Purge, Durations) {
  SimConfig cfg;
  EXPECT_EQ(cfg.l1_lines(), 512u);
  EXPECT_EQ(Core::purge_duration(cfg), 512u);
  SimConfig small;
  small.l1_sets = 32;  // 256 lines
  small.l2_tlb_sets = 128;
  small.bp_table_entries = 1024;
  EXPECT_EQ(Core::purge_duration(small), 256u);
}

TEST(Purge, ContentIndependent) {
  SimConfig cfg;
  Core empty(0, cfg, Variant::parse("flush"));
  EXPECT_EQ(empty.begin_purge(0), Core::purge_duration(cfg));
  EXPECT_THROW(empty.begin_purge(1), std::logic_error);

  Machine m(cfg, Variant::parse("flush"));
  DetRng rng(9);
  m.start(0, gen::random_mix(rng, cfg, {RegionId{1}}, 500, 256), only(cfg, {1}));
  m.run(1'000'000);
  EXPECT_EQ(m.core(0).begin_purge(m.now()), Core::purge_duration(cfg));
}

TEST(Purge, RestoresResetState) {
  SimConfig cfg;
  const PurgeReport r = purge_check(cfg, 11);
  EXPECT_EQ(r.duration, 512u);
  EXPECT_TRUE(r.state_equal);
}

TEST(Purge, SwitchWhilePurging) {
  SimConfig cfg;
  Core c(0, cfg, Variant::parse("flush"));
  c.request_switch({});
  EXPECT_THROW(c.request_switch({}), std::logic_error);
}

}  // namespace
}  // namespace mi6
