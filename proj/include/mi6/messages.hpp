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

#ifndef MI6_MESSAGES_HPP_
#define MI6_MESSAGES_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>

#include "mi6/config.hpp"
#include "mi6/engine.hpp"

namespace mi6 {

// Ordered so that I < S < M.
enum class Msi : uint8_t { kI = 0, kS = 1, kM = 2 };

inline char msi_char(Msi s) { return s == Msi::kM ? 'M' : s == Msi::kS ? 'S' : 'I'; }

constexpr size_t kWordsPerLine = 8;
using LineData = std::array<uint64_t, kWordsPerLine>;

// L1 -> LLC: request for a line in S (load) or M (store).
struct UpgradeRequest {
  uint32_t core = 0;
  LineAddress addr;
  Msi want = Msi::kS;
};

// L1 -> LLC: the L1 copy moved down to `to`. Carries data iff it was M.
// Solicited (answering a downgrade request) or voluntary (eviction, purge).
struct DowngradeResponse {
  uint32_t core = 0;
  LineAddress addr;
  Msi to = Msi::kI;
  bool has_data = false;
  LineData data{};
};

// LLC -> L1: upgrade response (with data) or downgrade request.
struct ToL1 {
  enum class Kind : uint8_t { kUpgradeResponse, kDowngradeRequest };
  Kind kind = Kind::kUpgradeResponse;
  LineAddress addr;
  Msi state = Msi::kI;
  LineData data{};
};

struct DramRequest {
  bool is_write = false;
  LineAddress addr;
  uint32_t mshr = 0;
  uint32_t core = 0;
  LineData data{};
};

struct DramResponse {
  uint32_t mshr = 0;
  LineAddress addr;
  LineData data{};
};

// The three per-core coherence FIFOs plus the purge engine's dedicated
// eviction port into the directory.
struct CoreLink {
  Fifo<UpgradeRequest> upgrade_req;
  Fifo<DowngradeResponse> downgrade_resp;
  Fifo<ToL1> to_l1;
  Fifo<DowngradeResponse> purge_evict;

  CoreLink(uint32_t core, const SimConfig& cfg)
      : upgrade_req("core" + std::to_string(core) + ".upreq", cfg.link_fifo_depth),
        downgrade_resp("core" + std::to_string(core) + ".dgresp", cfg.link_fifo_depth),
        to_l1("core" + std::to_string(core) + ".tol1", cfg.link_fifo_depth),
        purge_evict("core" + std::to_string(core) + ".purge",
                    std::max<size_t>(2, 2 * size_t{cfg.l1_flush_rate})) {}

  void commit() {
    upgrade_req.commit();
    downgrade_resp.commit();
    to_l1.commit();
    purge_evict.commit();
  }
};

}  // namespace mi6

#endif  // MI6_MESSAGES_HPP_
