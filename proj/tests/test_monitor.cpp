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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "mi6/harness.hpp"
#include "mi6/machine.hpp"
#include "mi6/monitor.hpp"

namespace mi6 {
namespace {

std::vector<RegionId> regs(std::initializer_list<uint32_t> rs) {
  std::vector<RegionId> out;
  for (uint32_t r : rs) out.push_back(RegionId{r});
  return out;
}

SimConfig small_cores(uint32_t n = 2) {
  SimConfig cfg;
  cfg.n_cores = n;
  return cfg;
}

TEST(Domains, Create) {
  Machine m(small_cores(), Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4, 5}));
  EXPECT_EQ(mon.domain("a").state, DomainState::kCreated);
  EXPECT_FALSE(mon.os_view()[4]);
  EXPECT_FALSE(mon.os_view()[0]);
  EXPECT_TRUE(mon.os_view()[6]);
  try {
    mon.create_domain("b", regs({4}));
    FAIL();
  } catch (const MonitorError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
  EXPECT_THROW(mon.create_domain("c", regs({0})), MonitorError);
  EXPECT_THROW(mon.create_domain("c", regs({6, 6})), MonitorError);
  EXPECT_THROW(mon.create_domain("c", regs({64})), MonitorError);
  EXPECT_THROW(mon.create_domain("c", {}), MonitorError);
  EXPECT_THROW(mon.create_domain("a", regs({9})), MonitorError);
  EXPECT_THROW(mon.create_domain("os", regs({9})), MonitorError);
  EXPECT_FALSE(mon.has_domain("c"));
}

TEST(Domains, ScheduleStartsAfterPurge) {
  SimConfig cfg = small_cores();
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  const uint64_t a = gen::line_byte(cfg, RegionId{4}, 0);
  mon.schedule("a", 0, {TraceOp::load(a)});
  EXPECT_EQ(mon.domain("a").state, DomainState::kRunning);
  EXPECT_EQ(mon.domain_on(0), "a");
  ASSERT_TRUE(m.run(100'000));
  const Core& c = m.core(0);
  EXPECT_EQ(c.last_purge_done(), Core::purge_duration(cfg));
  EXPECT_EQ(c.trace_start(), c.last_purge_done());
  ASSERT_EQ(c.records().size(), 1u);
  EXPECT_FALSE(c.records()[0].fault);
  EXPECT_GE(c.records()[0].issue, c.last_purge_done());
}

TEST(Domains, ScheduleBusyCore) {
  Machine m(small_cores(), Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  mon.create_domain("b", regs({5}));
  mon.schedule("a", 0, {TraceOp::compute(10)});
  EXPECT_THROW(mon.schedule("b", 0, {TraceOp::compute(10)}), MonitorError);
  EXPECT_THROW(mon.schedule("b", 7, {}), MonitorError);
  EXPECT_THROW(mon.schedule("zz", 1, {}), MonitorError);
  EXPECT_NO_THROW(mon.schedule("b", 1, {TraceOp::compute(10)}));
}

// Foreign and out-of-range addresses are caught before anything runs.
TEST(Domains, ScheduleChecksRange) {
  SimConfig cfg = small_cores();
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  EXPECT_THROW(mon.schedule("a", 0, {TraceOp::load(cfg.dram_bytes)}), TraceError);
  EXPECT_FALSE(mon.domain_on(0));
}

TEST(Domains, TrapPurgesUnderFlush) {
  SimConfig cfg = small_cores(1);
  for (const char* v : {"flush", "base"}) {
    Machine m(cfg, Variant::parse(v));
    Monitor mon(m);
    mon.create_domain("a", regs({4}));
    mon.schedule("a", 0, {TraceOp::compute(5000)});
    mon.load(parse_schedule("@1000 trap core=0\n", ""));
    ASSERT_TRUE(m.run(100'000));
    const uint64_t first = Core::purge_duration(cfg);
    if (std::string(v) == "flush") {
      EXPECT_EQ(m.core(0).stats().purges, 2u);
      // Compute-only trace: nothing to drain, the purge starts right away
      // and the interrupted compute resumes after it.
      EXPECT_EQ(m.core(0).last_purge_done(), 1001 + Core::purge_duration(cfg));
      EXPECT_EQ(m.core(0).finish_cycle(), first + 5000 + Core::purge_duration(cfg));
    } else {
      EXPECT_EQ(m.core(0).stats().purges, 1u);
      EXPECT_EQ(m.core(0).finish_cycle(), first + 5000);
    }
  }
}

TEST(Domains, DescheduleRestoresResetState) {
  SimConfig cfg = small_cores(1);
  const Variant v = Variant::parse("flush");
  Machine m(cfg, v);
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  DetRng rng(2);
  mon.schedule("a", 0, gen::random_mix(rng, cfg, regs({4}), 400, 300));
  ASSERT_TRUE(m.run(1'000'000));
  EXPECT_NE(m.core(0).serialize_state(), Core(0, cfg, v).serialize_state());
  mon.deschedule(0);
  EXPECT_EQ(mon.domain("a").state, DomainState::kDescheduled);
  ASSERT_TRUE(m.run(1'000'000));
  EXPECT_EQ(m.core(0).serialize_state(), Core(0, cfg, v).serialize_state());
  EXPECT_FALSE(m.core(0).bitvector()[4]);
  EXPECT_THROW(mon.deschedule(0), MonitorError);
}

// Back-to-back domains: the second starts from the same state as on a
// fresh machine.
TEST(Domains, RescheduleLeavesNothingBehind) {
  SimConfig cfg = small_cores(1);
  const Variant v = Variant::parse("flush");
  Machine m(cfg, v);
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  mon.create_domain("b", regs({5}));
  DetRng rng(3);
  mon.schedule("a", 0, gen::random_mix(rng, cfg, regs({4}), 400, 300));
  ASSERT_TRUE(m.run(1'000'000));
  mon.deschedule(0);
  ASSERT_TRUE(m.run(1'000'000));
  std::string before_b = m.core(0).serialize_state();
  mon.schedule("b", 0, {});
  ASSERT_TRUE(m.run(1'000'000));
  EXPECT_EQ(before_b, m.core(0).serialize_state());
  EXPECT_EQ(before_b, Core(0, cfg, v).serialize_state());
}

TEST(Domains, DestroyScrubsMemory) {
  SimConfig cfg = small_cores(1);
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  const uint64_t a = gen::line_byte(cfg, RegionId{4}, 5);
  mon.create_domain("a", regs({4}));
  mon.schedule("a", 0, {TraceOp::store(a), TraceOp::store(a + 64 * 40)});
  ASSERT_TRUE(m.run(100'000));
  EXPECT_NE(m.peek_word(a), 0u);
  EXPECT_THROW(mon.destroy_domain("a"), MonitorError);
  mon.deschedule(0);
  ASSERT_TRUE(m.run(100'000));
  mon.destroy_domain("a");
  EXPECT_EQ(mon.domain("a").state, DomainState::kDestroyed);
  EXPECT_THROW(mon.destroy_domain("a"), MonitorError);
  EXPECT_TRUE(mon.os_view()[4]);

  mon.create_domain("b", regs({4}));
  mon.schedule("b", 0, {TraceOp::load(a), TraceOp::load(a + 64 * 40)});
  ASSERT_TRUE(m.run(100'000));
  for (const auto& r : m.core(0).records()) {
    EXPECT_FALSE(r.fault);
    EXPECT_EQ(r.value, 0u);
  }
}

TEST(Domains, ForeignRegionFaults) {
  SimConfig cfg = small_cores();
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  mon.create_domain("b", regs({5}));
  const uint64_t a = gen::line_byte(cfg, RegionId{4}, 1);
  mon.schedule("a", 0, {TraceOp::store(a)});
  mon.schedule("b", 1, {TraceOp::compute(2000), TraceOp::load(a)});
  ASSERT_TRUE(m.run(100'000));
  const OpRecord& r = m.core(1).records().at(0);
  EXPECT_TRUE(r.fault);
  EXPECT_EQ(r.value, 0u);
}

// Random create/destroy sequences never leave two live domains sharing a
// region.
TEST(Domains, DisjointnessProperty) {
  SimConfig cfg = small_cores(1);
  cfg.n_regions = 8;
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  DetRng rng(17);
  for (int step = 0; step < 2000; ++step) {
    const std::string id = "d" + std::to_string(rng.below(6));
    try {
      if (rng.chance(1, 2)) {
        std::vector<RegionId> rs;
        const uint64_t n = 1 + rng.below(3);
        for (uint64_t i = 0; i < n; ++i) rs.push_back(RegionId{static_cast<uint32_t>(rng.below(9))});
        mon.create_domain(id, rs);
      } else {
        mon.destroy_domain(id);
      }
    } catch (const MonitorError&) {
    }
    std::set<uint32_t> owned;
    for (int d = 0; d < 6; ++d) {
      const std::string name = "d" + std::to_string(d);
      if (!mon.has_domain(name) || mon.domain(name).state == DomainState::kDestroyed) continue;
      for (RegionId r : mon.domain(name).regions) {
        EXPECT_NE(r.value, 0u);
        EXPECT_TRUE(owned.insert(r.value).second) << "step " << step;
      }
    }
  }
}

Payload payload_of(uint8_t seed) {
  Payload p{};
  for (size_t i = 0; i < p.size(); ++i) p[i] = static_cast<uint8_t>(seed * 31 + i);
  return p;
}

TEST(Mailbox, DeliveredIntact) {
  Machine m(small_cores(), Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  mon.create_domain("b", regs({5}));
  EXPECT_TRUE(mon.mailbox_send("a", "b", payload_of(1)));
  EXPECT_TRUE(mon.mailbox_send("os", "b", payload_of(2)));
  EXPECT_EQ(mon.mailbox_receive("b"), payload_of(1));
  EXPECT_EQ(mon.mailbox_receive("b"), payload_of(2));
  EXPECT_FALSE(mon.mailbox_receive("b"));
  EXPECT_TRUE(mon.mailbox_send("b", "os", payload_of(3)));
  EXPECT_EQ(mon.mailbox_receive("os"), payload_of(3));
  EXPECT_THROW(mon.mailbox_send("a", "nobody", payload_of(1)), MonitorError);
}

TEST(Mailbox, FullInbox) {
  SimConfig cfg = small_cores();
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("b", regs({5}));
  for (uint32_t i = 0; i < cfg.mailbox_depth; ++i) {
    EXPECT_TRUE(mon.mailbox_send("os", "b", payload_of(static_cast<uint8_t>(i))));
  }
  EXPECT_FALSE(mon.mailbox_send("os", "b", payload_of(9)));
  EXPECT_EQ(mon.domain("b").inbox.size(), cfg.mailbox_depth);
}

// A domain sends a message mid-run; only the size of the call matters.
Observables send_run(const std::string& hex) {
  SimConfig cfg = small_cores(1);
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  mon.create_domain("b", regs({5}));
  DetRng rng(4);
  mon.schedule("a", 0, gen::random_mix(rng, cfg, regs({4}), 200, 64));
  if (!hex.empty()) mon.load(parse_schedule("@700 mbox a b " + hex + "\n", ""));
  m.run(1'000'000);
  return observe(m.core(0));
}

TEST(Mailbox, CostIndependentOfContent) {
  const std::string zeros(128, '0');
  std::string other;
  for (int i = 0; i < 64; ++i) other += "a5";
  const Observables x = send_run(zeros);
  const Observables y = send_run(other);
  EXPECT_TRUE(compare(x, y).equal) << describe(compare(x, y));
  EXPECT_FALSE(compare(x, send_run("")).equal);
}

TEST(Memcopy, WriteOsCopies) {
  SimConfig cfg = small_cores(1);
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  const uint64_t enc = gen::line_byte(cfg, RegionId{4}, 8);
  const uint64_t os = gen::line_byte(cfg, RegionId{9}, 2);
  mon.register_io_buffers("a", enc, os, 256, 256);
  for (uint64_t off = 0; off < 256; off += 8) m.poke_word(enc + off, 1000 + off);
  const uint64_t cost = mon.memcopy("a", CopyDirection::kWriteOs);
  EXPECT_EQ(cost, Monitor::memcopy_cost(cfg, 256));
  EXPECT_EQ(cost, cfg.monitor_call_cycles + 4 * cfg.memcopy_cycles_per_line);
  for (uint64_t off = 0; off < 256; off += 8) EXPECT_EQ(m.peek_word(os + off), 1000 + off);

  for (uint64_t off = 0; off < 256; off += 8) m.poke_word(os + off, 7);
  EXPECT_EQ(mon.memcopy("a", CopyDirection::kReadOs), cost);
  EXPECT_EQ(m.peek_word(enc + 248), 7u);
}

TEST(Memcopy, CostIndependentOfContent) {
  SimConfig cfg = small_cores(1);
  uint64_t costs[2];
  for (int k = 0; k < 2; ++k) {
    Machine m(cfg, Variant::base());
    Monitor mon(m);
    mon.create_domain("a", regs({4}));
    const uint64_t enc = gen::line_byte(cfg, RegionId{4}, 0);
    mon.register_io_buffers("a", enc, gen::line_byte(cfg, RegionId{9}, 0), 512, 512);
    for (uint64_t off = 0; off < 512; off += 8) m.poke_word(enc + off, k ? ~off : 0);
    costs[k] = mon.memcopy("a", CopyDirection::kWriteOs);
  }
  EXPECT_EQ(costs[0], costs[1]);
}

TEST(Memcopy, Errors) {
  SimConfig cfg = small_cores(1);
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.create_domain("a", regs({4}));
  mon.create_domain("b", regs({5}));
  EXPECT_THROW(mon.memcopy("a", CopyDirection::kReadOs), MonitorError);
  const uint64_t enc = gen::line_byte(cfg, RegionId{4}, 0);
  const uint64_t os = gen::line_byte(cfg, RegionId{9}, 0);
  EXPECT_THROW(mon.register_io_buffers("a", enc, os, 64, 128), MonitorError);
  EXPECT_THROW(mon.register_io_buffers("a", enc + 4, os, 64, 64), MonitorError);
  EXPECT_THROW(mon.register_io_buffers("a", gen::line_byte(cfg, RegionId{5}, 0), os, 64, 64),
               MonitorError);
  EXPECT_THROW(mon.register_io_buffers("a", enc, gen::line_byte(cfg, RegionId{5}, 0), 64, 64),
               MonitorError);
  EXPECT_THROW(mon.register_io_buffers("a", enc, 0, 64, 64), MonitorError);
}

TEST(Shootdown, IdleSystem) {
  SimConfig cfg = small_cores();
  Machine m(cfg, Variant::base());
  Monitor mon(m);
  mon.tlb_shootdown();
  for (int i = 0; i < 10; ++i) m.tick();
  EXPECT_EQ(m.core(0).serialize_state(), Core(0, cfg, Variant::base()).serialize_state());
}

TEST(Schedule, Parse) {
  auto ev = parse_schedule(
      "# demo\n"
      "@20 destroy a\n"
      "@0 create a regions=4,5\n"
      "@5 mbox os a " + std::string(128, 'f') + "\n"
      "@6 iobuf a enclave=0x2000000 os=0x4000000 size=64\n"
      "@7 memcopy a write\n"
      "@8 deschedule core=1\n"
      "@9 trap core=0\n",
      "");
  ASSERT_EQ(ev.size(), 7u);
  EXPECT_EQ(ev[0].op, ScheduleEvent::Op::kCreate);
  EXPECT_EQ(ev[0].regions.size(), 2u);
  EXPECT_EQ(ev[1].payload[63], 0xff);
  EXPECT_EQ(ev[2].io.size, 64u);
  EXPECT_EQ(ev[3].direction, CopyDirection::kWriteOs);
  EXPECT_EQ(ev[4].core, 1u);
  EXPECT_EQ(ev[5].op, ScheduleEvent::Op::kTrap);
  EXPECT_EQ(ev[6].op, ScheduleEvent::Op::kDestroy);
}

TEST(Schedule, ParseErrors) {
  auto line_of = [](const std::string& text) {
    try {
      parse_schedule(text, "");
    } catch (const ScheduleError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("create a regions=4\n"), 1);
  EXPECT_EQ(line_of("@0 create a regions=4\n@1 explode\n"), 2);
  EXPECT_EQ(line_of("@0 mbox a b 0g\n"), 1);
  EXPECT_EQ(line_of("@0 mbox a b " + std::string(130, '0') + "\n"), 1);
  // Short payloads are zero-filled.
  EXPECT_EQ(parse_schedule("@0 mbox a b 01\n", "")[0].payload[0], 1);
  EXPECT_EQ(line_of("@0 memcopy a sideways\n"), 1);
  EXPECT_EQ(line_of("@0 schedule a core=0 trace=/nonexistent.tr\n"), 1);
  EXPECT_EQ(line_of("@0 destroy a b\n"), 1);
}

TEST(Schedule, TraceRelativeToFile) {
  const auto dir = std::filesystem::temp_directory_path() / "mi6_sched_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "t.tr") << "L 0x2000000\nC 5\n";
  std::ofstream(dir / "s.sched") << "@0 create a regions=1\n@0 schedule a core=0 trace=t.tr\n";
  auto ev = load_schedule((dir / "s.sched").string());
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].trace.size(), 2u);
  std::filesystem::remove_all(dir);
}

// A scripted lifecycle end to end.
TEST(Schedule, Lifecycle) {
  SimConfig cfg = small_cores();
  Machine m(cfg, Variant::parse("flush"));
  Monitor mon(m);
  auto ev = parse_schedule(
      "@0 create a regions=4\n"
      "@0 create b regions=5\n"
      "@5000 deschedule core=0\n"
      "@5000 destroy a\n"
      "@6000 create c regions=4\n",
      "");
  ScheduleEvent sa;
  sa.cycle = 1;
  sa.op = ScheduleEvent::Op::kSchedule;
  sa.id = "a";
  sa.core = 0;
  sa.trace = {TraceOp::store(gen::line_byte(cfg, RegionId{4}, 0)), TraceOp::compute(100)};
  ev.insert(ev.begin() + 2, sa);
  mon.load(ev);
  ASSERT_TRUE(m.run(1'000'000));
  EXPECT_FALSE(mon.pending());
  EXPECT_EQ(mon.domain("a").state, DomainState::kDestroyed);
  EXPECT_EQ(mon.domain("c").state, DomainState::kCreated);
  EXPECT_EQ(m.peek_word(gen::line_byte(cfg, RegionId{4}, 0)), 0u);
  EXPECT_GE(mon.journal().size(), 6u);
}

}  // namespace
}  // namespace mi6
