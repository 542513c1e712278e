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


#include "mi6/dram.hpp"

#include <algorithm>

namespace mi6 {

Dram::Dram(const SimConfig& cfg) : cfg_(cfg) {}

SubmitResult Dram::submit(uint64_t now, const DramRequest& req) {
  if (in_flight_.size() >= cfg_.dram_max_inflight) {
    ++stats_.backpressure;
    return SubmitResult::kBackpressure;
  }
  Slot slot;
  slot.complete_at = now + cfg_.dram_latency;
  slot.seq = seq_++;
  slot.is_read = !req.is_write;
  if (req.is_write) {
    write_line(req.addr, req.data);
    ++stats_.writes;
  } else {
    slot.resp = DramResponse{req.mshr, req.addr, read_line(req.addr)};
    ++stats_.reads;
  }
  in_flight_.push_back(slot);
  stats_.max_inflight = std::max<uint64_t>(stats_.max_inflight, in_flight_.size());
  return SubmitResult::kAccepted;
}

void Dram::step(uint64_t now, Fifo<DramRequest>& in, Fifo<DramResponse>& out,
                EventLog& log) {
  while (!in_flight_.empty() && in_flight_.front().complete_at <= now) {
    if (in_flight_.front().is_read) ready_.push_back(in_flight_.front().resp);
    in_flight_.pop_front();
  }
  if (!ready_.empty() && out.can_enqueue()) {
    log.add(now, "dram", "resp", std::to_string(ready_.front().mshr));
    out.enqueue(ready_.front());
    ready_.pop_front();
  }
  while (!in.empty()) {
    if (submit(now, in.front()) == SubmitResult::kBackpressure) {
      log.add(now, "dram", "backpressure", std::to_string(in_flight_.size()));
      break;
    }
    const DramRequest& req = in.front();
    log.add(now, "dram", req.is_write ? "write" : "read",
            std::to_string(req.addr.value));
    in.dequeue();
  }
}

LineData Dram::read_line(LineAddress a) const {
  auto it = store_.find(a.value);
  return it == store_.end() ? LineData{} : it->second;
}

void Dram::write_line(LineAddress a, const LineData& d) {
  if (d == LineData{}) store_.erase(a.value);
  else store_[a.value] = d;
}

void Dram::erase_region(RegionId r) {
  const uint64_t lo = region_base(r, cfg_).value;
  const uint64_t hi = lo + cfg_.lines_per_region();
  store_.erase(store_.lower_bound(lo), store_.lower_bound(hi));
}

void Dram::update_word(LineAddress a, size_t word, uint64_t value) {
  for (auto& slot : in_flight_) {
    if (slot.is_read && slot.resp.addr == a) slot.resp.data[word] = value;
  }
  for (auto& r : ready_) {
    if (r.addr == a) r.data[word] = value;
  }
}

}  // namespace mi6
