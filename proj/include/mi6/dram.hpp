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


// Constant-latency DRAM controller with a hard in-flight cap.

#ifndef MI6_DRAM_HPP_
#define MI6_DRAM_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>

#include "mi6/config.hpp"
#include "mi6/engine.hpp"
#include "mi6/messages.hpp"

namespace mi6 {

enum class SubmitResult : uint8_t { kAccepted, kBackpressure };

struct DramStats {
  uint64_t reads = 0;
  uint64_t writes = 0;
  uint64_t backpressure = 0;  // cycles a request was refused
  uint64_t max_inflight = 0;
};

class Dram {
 public:
  explicit Dram(const SimConfig& cfg);

  // Reads and writebacks each hold a slot for `latency` cycles. Writes take
  // effect at submission; reads snapshot the line at submission.
  SubmitResult submit(uint64_t now, const DramRequest& req);

  // Retire, emit at most one read response (submission order), then accept
  // queued requests until the cap is reached.
  void step(uint64_t now, Fifo<DramRequest>& in, Fifo<DramResponse>& out,
            EventLog& log);

  size_t in_flight() const { return in_flight_.size(); }
  size_t pending_responses() const { return ready_.size(); }
  const DramStats& stats() const { return stats_; }

  LineData read_line(LineAddress a) const;
  void write_line(LineAddress a, const LineData& d);
  void erase_region(RegionId r);

  // Write-update of in-flight read snapshots (monitor privileged writes).
  void update_word(LineAddress a, size_t word, uint64_t value);

 private:
  struct Slot {
    uint64_t complete_at = 0;
    uint64_t seq = 0;
    bool is_read = false;
    DramResponse resp;
  };

  SimConfig cfg_;
  std::deque<Slot> in_flight_;  // submission order == completion order
  std::deque<DramResponse> ready_;
  std::map<uint64_t, LineData> store_;
  uint64_t seq_ = 0;
  DramStats stats_;
};

}  // namespace mi6

#endif  // MI6_DRAM_HPP_
