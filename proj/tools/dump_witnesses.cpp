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


// Writes every witness scenario as plain trace files:
//   <dir>/<CHANNEL>/victim.tr
//   <dir>/<CHANNEL>/<attacker>.core<N>.tr
// Attackers run at several start offsets; only the undelayed copy is
// written.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "mi6/harness.hpp"

namespace {

const std::map<mi6::Channel, std::string> kWhat = {
    {mi6::Channel::kCacheSet, "attacker lines evict the victim's lines from shared LLC sets"},
    {mi6::Channel::kMshrExhaust, "attacker misses occupy every LLC MSHR, victim misses wait"},
    {mi6::Channel::kDramBackpressure,
     "oversized MSHR pool fills the DRAM queue, victim requests are refused"},
    {mi6::Channel::kEntryPort, "attacker requests win the LLC entry arbiter ahead of the victim"},
    {mi6::Channel::kDowngradeLogic,
     "attacker entries sit ahead of the victim's in the single downgrade scanner"},
    {mi6::Channel::kUqHeadline,
     "attacker response blocked at the head of the shared upgrade queue delays the victim's"},
    {mi6::Channel::kDqTwoCycle,
     "attacker writeback+read pair holds the DRAM queue head for two cycles"},
};

void put(const std::filesystem::path& p, const std::string& what, const mi6::Trace& t) {
  std::ofstream f(p);
  f << "# " << what << "\n" << mi6::format_trace(t);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: dump_witnesses DIR\n";
    return 2;
  }
  for (mi6::Channel c : mi6::all_channels()) {
    const auto s = mi6::witness_scenario(c, true);
    const std::filesystem::path dir = std::filesystem::path(argv[1]) / std::string(mi6::channel_name(c));
    std::filesystem::create_directories(dir);
    put(dir / "victim.tr", kWhat.at(c) + "; victim, core " + std::to_string(s.victim.core), s.victim.trace);
    for (const auto& run : s.attackers) {
      const auto plus = run.name.find('+');
      if (plus == std::string::npos || run.name.substr(plus + 1) != "0") continue;
      for (const auto& p : run.cores) {
        put(dir / (run.name.substr(0, plus) + ".core" + std::to_string(p.core) + ".tr"),
            kWhat.at(c) + "; attacker '" + run.name.substr(0, plus) + "'", p.trace);
      }
    }
  }
  return 0;
}
