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


// Security monitor: protection-domain lifecycle, region allocation, purge
// orchestration, TLB shootdown, mailbox and privileged memcopy. Driven by a
// scripted schedule rather than by code on a simulated core.

#ifndef MI6_MONITOR_HPP_
#define MI6_MONITOR_HPP_

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mi6/core.hpp"
#include "mi6/machine.hpp"

namespace mi6 {

class MonitorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScheduleError : public std::runtime_error {
 public:
  ScheduleError(int line, const std::string& what)
      : std::runtime_error("schedule line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

using Payload = std::array<uint8_t, 64>;

enum class DomainState : uint8_t { kCreated, kRunning, kDescheduled, kDestroyed };

std::string_view domain_state_name(DomainState s);

enum class CopyDirection : uint8_t { kReadOs, kWriteOs };

struct IoBuffers {
  uint64_t enclave_addr = 0;
  uint64_t os_addr = 0;
  uint64_t size = 0;
};

struct ProtectionDomain {
  std::string id;
  std::vector<RegionId> regions;
  std::set<uint32_t> cores;
  DomainState state = DomainState::kCreated;
  std::deque<Payload> inbox;
  std::optional<IoBuffers> io;
};

struct ScheduleEvent {
  enum class Op : uint8_t {
    kCreate,
    kSchedule,
    kDeschedule,
    kDestroy,
    kMbox,
    kMemcopy,
    kIobuf,
    kTrap,
  };
  int line = 0;
  uint64_t cycle = 0;
  Op op = Op::kCreate;
  std::string id;
  std::string to;  // mbox receiver
  uint32_t core = 0;
  std::vector<RegionId> regions;
  Trace trace;
  Payload payload{};
  CopyDirection direction = CopyDirection::kReadOs;
  IoBuffers io;
};

// One event per line: `@<cycle> <op> args`. Trace paths are resolved
// against `base_dir` and loaded eagerly.
std::vector<ScheduleEvent> parse_schedule(std::string_view text, const std::string& base_dir);
std::vector<ScheduleEvent> load_schedule(const std::string& path);

Payload parse_payload(std::string_view hex);

class Monitor {
 public:
  // Installs itself as the machine's event source.
  explicit Monitor(Machine& machine);
  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  void load(std::vector<ScheduleEvent> events);
  bool pending() const { return next_ < events_.size(); }

  // Operations, applied at the machine's current cycle.
  void create_domain(const std::string& id, const std::vector<RegionId>& regions);
  void schedule(const std::string& id, uint32_t core, Trace trace);
  void deschedule(uint32_t core);
  void destroy_domain(const std::string& id);
  // Returns false when the receiver's inbox is full.
  bool mailbox_send(const std::string& from, const std::string& to, const Payload& payload);
  std::optional<Payload> mailbox_receive(const std::string& id);
  void register_io_buffers(const std::string& id, uint64_t enclave_addr, uint64_t os_addr,
                           uint64_t enclave_size, uint64_t os_size);
  // Returns the cycles charged.
  uint64_t memcopy(const std::string& id, CopyDirection dir);
  void tlb_shootdown();
  void trap(uint32_t core);

  static uint64_t mailbox_cost(const SimConfig& cfg) { return cfg.monitor_call_cycles; }
  static uint64_t memcopy_cost(const SimConfig& cfg, uint64_t bytes);

  const ProtectionDomain& domain(const std::string& id) const;
  bool has_domain(const std::string& id) const { return domains_.count(id) != 0; }
  std::optional<std::string> domain_on(uint32_t core) const { return running_[core]; }
  // Regions the untrusted OS may touch: everything not reserved and not
  // owned by a live domain.
  RegionBits os_view() const;
  RegionBits domain_view(const std::string& id) const;
  const std::vector<std::string>& journal() const { return journal_; }

 private:
  ProtectionDomain& live(const std::string& id);
  void apply(const ScheduleEvent& e);
  void refresh_os_cores();
  void charge(const std::string& id, uint64_t cycles, bool nonspec);
  void note(const std::string& text);

  Machine& m_;
  std::map<std::string, ProtectionDomain> domains_;
  std::vector<std::optional<std::string>> running_;  // per core
  std::vector<ScheduleEvent> events_;
  size_t next_ = 0;
  std::vector<std::string> journal_;
  std::deque<Payload> os_inbox_;
};

}  // namespace mi6

#endif  // MI6_MONITOR_HPP_
