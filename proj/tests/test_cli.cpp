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
#include <sstream>
#include <string>
#include <vector>

#include "mi6/cli.hpp"

namespace mi6 {
namespace {

namespace fs = std::filesystem;

const std::string kSrc = MI6_SOURCE_DIR;

struct Result {
  int code = 0;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mi6sim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mi6_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  fs::path dir_;
};

TEST_F(Cli, SimulateBase) {
  const std::string t = write("t.tr", "L 0x1000\nS 0x1040\nC 5\n");
  Result r = cli({"simulate", "--config", kSrc + "/configs/base.cfg", "--variant", "base",
                  "--trace", "core0=" + t});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0], "# schema=1");
  EXPECT_EQ(ls[1].rfind("variant,core,cycles", 0), 0u);
  EXPECT_EQ(ls[2].rfind("base,0,", 0), 0u);
}

TEST_F(Cli, SimulateSecureStatsFile) {
  const std::string stats = (dir_ / "s.csv").string();
  const std::string log = (dir_ / "e.log").string();
  Result r = cli({"simulate", "--config", kSrc + "/configs/secure.cfg", "--variant", "secure",
                  "--trace", "core0=" + kSrc + "/traces/stream.tr", "--trace",
                  "core1=" + kSrc + "/traces/mix.tr", "--stats", stats, "--log", log});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(stats);
  std::stringstream buf;
  buf << in.rdbuf();
  auto ls = lines(buf.str());
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[2].rfind("secure,0,", 0), 0u);
  EXPECT_EQ(ls[3].rfind("secure,1,", 0), 0u);
  EXPECT_GT(fs::file_size(log), 0u);
}

TEST_F(Cli, SimulateVariantFromConfig) {
  const std::string t = write("t.tr", "L 0x1000\n");
  Result r = cli({"simulate", "--config", kSrc + "/configs/quad.cfg", "--trace", "core3=" + t});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 6u);
  EXPECT_EQ(ls[5].rfind("secure,3,", 0), 0u);
}

TEST_F(Cli, SimulateOutOfRangeTrace) {
  Result r = cli({"simulate", "--trace", "core0=" + kSrc + "/traces/bad_range.tr"});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST_F(Cli, SimulateErrors) {
  const std::string t = write("t.tr", "L 0x1000\n");
  // SECURE on the default geometry breaks the sizing rule.
  EXPECT_EQ(cli({"simulate", "--variant", "secure", "--trace", "core0=" + t}).code, kExitConfig);
  EXPECT_EQ(cli({"simulate", "--variant", "nonsense", "--trace", "core0=" + t}).code,
            kExitConfig);
  EXPECT_EQ(cli({"simulate", "--config", write("c.cfg", "l1_setz=2\n"), "--trace",
                 "core0=" + t}).code,
            kExitConfig);
  EXPECT_EQ(cli({"simulate", "--trace", "core0=" + write("b.tr", "L zz\n")}).code, kExitInput);
  EXPECT_EQ(cli({"simulate", "--trace", "core1=" + t}).code, kExitInput);
  EXPECT_EQ(cli({"simulate", "--trace", "cpu0=" + t}).code, kExitInput);
  EXPECT_EQ(cli({"simulate"}).code, kExitInput);
  EXPECT_NE(cli({"bogus"}).code, kExitOk);
}

TEST_F(Cli, SimulateSchedule) {
  Result r = cli({"simulate", "--config", kSrc + "/configs/secure.cfg", "--schedule",
                  kSrc + "/traces/lifecycle.sched"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(lines(r.out).size(), 4u);

  const std::string sched = write("s.sched", "@0 create a regions=0\n");
  EXPECT_EQ(cli({"simulate", "--schedule", sched}).code, kExitInput);
  const std::string bad = write("b.sched", "@0 launch a\n");
  EXPECT_EQ(cli({"simulate", "--schedule", bad}).code, kExitInput);
}

TEST_F(Cli, SimulateDeterministic) {
  auto run = [&] {
    return cli({"simulate", "--config", kSrc + "/configs/secure.cfg", "--trace",
                "core0=" + kSrc + "/traces/mix.tr", "--trace",
                "core1=" + kSrc + "/traces/stream.tr", "--seed", "9"})
        .out;
  };
  EXPECT_EQ(run(), run());
}

TEST_F(Cli, VerifyWitnesses) {
  Result r = cli({"verify", "--suite", "witnesses"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 8u);
  for (size_t i = 1; i < ls.size(); ++i) {
    EXPECT_NE(ls[i].find(",true,false,PASS"), std::string::npos) << ls[i];
  }
}

TEST_F(Cli, VerifyWitnessesMutated) {
  Result r = cli({"verify", "--suite", "witnesses", "--disable", "rr_arbiter"});
  EXPECT_EQ(r.code, 1);
  bool entry_failed = false;
  for (const auto& l : lines(r.out)) {
    if (l.rfind("ENTRY_PORT,", 0) == 0) entry_failed = l.find("FAIL") != std::string::npos;
  }
  EXPECT_TRUE(entry_failed) << r.out;
  EXPECT_NE(r.err.find("first failing channel"), std::string::npos);
  EXPECT_NE(cli({"verify", "--suite", "witnesses", "--disable", "warp"}).code, kExitOk);
}

TEST_F(Cli, VerifyCoherence) {
  Result r = cli({"verify", "--suite", "coherence", "--ops", "10000", "--seed", "7"});
  EXPECT_EQ(r.code, kExitOk) << r.err << r.out;
}

TEST_F(Cli, VerifyPurgeAndNoninterference) {
  Result p = cli({"verify", "--suite", "purge"});
  EXPECT_EQ(p.code, kExitOk) << p.err;
  EXPECT_NE(p.out.find("512"), std::string::npos);
  Result n = cli({"verify", "--suite", "noninterference", "--count", "3"});
  EXPECT_EQ(n.code, kExitOk) << n.err;
  EXPECT_NE(n.out.find("3/3 pairs equal"), std::string::npos);
  EXPECT_NE(cli({"verify", "--suite", "bogus"}).code, kExitOk);
}

TEST_F(Cli, SweepTwoVariants) {
  Result r = cli({"sweep", "--variants", "base,part", "--trace", kSrc + "/traces/mix.tr"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[0], "# schema=1");
  EXPECT_NE(ls[1].find("normalized_to_base"), std::string::npos);
  EXPECT_EQ(ls[2].rfind("base,mix,", 0), 0u);
  EXPECT_EQ(ls[3].rfind("part,mix,", 0), 0u);
  EXPECT_NE(ls[2].find(",1.0000"), std::string::npos);
}

TEST_F(Cli, SweepFpmaAndFile) {
  const std::string out = (dir_ / "o.csv").string();
  Result r = cli({"sweep", "--variants", "F+P+M+A", "--trace", kSrc + "/traces/stream.tr",
                  "--out", out, "--jobs", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(out);
  std::stringstream buf;
  buf << in.rdbuf();
  auto ls = lines(buf.str());
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[2].rfind("fpma,stream,", 0), 0u);
}

TEST_F(Cli, SweepEmpty) {
  EXPECT_EQ(cli({"sweep", "--variants", "base"}).code, kExitInput);
  EXPECT_EQ(cli({"sweep", "--variants", "base", "--trace", "/nonexistent.tr"}).code, kExitInput);
}

}  // namespace
}  // namespace mi6
