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


#include "mi6/monitor.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mi6 {
namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

uint64_t number(std::string_view s, int line, std::string_view what) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ScheduleError(line, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

// key=value arguments after the positional ones.
std::map<std::string, std::string> keyed(const std::vector<std::string_view>& toks, size_t from,
                                         int line) {
  std::map<std::string, std::string> out;
  for (size_t i = from; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string_view::npos) {
      throw ScheduleError(line, "expected key=value, got '" + std::string(toks[i]) + "'");
    }
    out[std::string(toks[i].substr(0, eq))] = std::string(toks[i].substr(eq + 1));
  }
  return out;
}

std::string need(const std::map<std::string, std::string>& kv, const std::string& key,
                 int line) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ScheduleError(line, "missing " + key + "=");
  return it->second;
}

std::vector<RegionId> parse_regions(std::string_view list, int line) {
  std::vector<RegionId> out;
  size_t pos = 0;
  while (pos <= list.size()) {
    size_t comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    std::string_view tok = list.substr(pos, comma - pos);
    if (auto dash = tok.find('-'); dash != std::string_view::npos) {
      const uint64_t lo = number(tok.substr(0, dash), line, "region");
      const uint64_t hi = number(tok.substr(dash + 1), line, "region");
      if (hi < lo) throw ScheduleError(line, "empty region range");
      for (uint64_t r = lo; r <= hi; ++r) out.push_back(RegionId{static_cast<uint32_t>(r)});
    } else {
      out.push_back(RegionId{static_cast<uint32_t>(number(tok, line, "region"))});
    }
    pos = comma + 1;
  }
  return out;
}

std::string hex(uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

std::string_view domain_state_name(DomainState s) {
  switch (s) {
    case DomainState::kCreated: return "created";
    case DomainState::kRunning: return "running";
    case DomainState::kDescheduled: return "descheduled";
    case DomainState::kDestroyed: return "destroyed";
  }
  return "?";
}

Payload parse_payload(std::string_view hex) {
  if (hex.size() > 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex.remove_prefix(2);
  if (hex.empty() || hex.size() > 128 || hex.size() % 2 != 0) {
    throw std::invalid_argument("payload must be 1..64 bytes of hex");
  }
  Payload p{};
  for (size_t i = 0; i < hex.size() / 2; ++i) {
    uint8_t b = 0;
    auto [ptr, ec] = std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, b, 16);
    if (ec != std::errc() || ptr != hex.data() + 2 * i + 2) {
      throw std::invalid_argument("payload is not hex");
    }
    p[i] = b;
  }
  return p;
}

std::vector<ScheduleEvent> parse_schedule(std::string_view text, const std::string& base_dir) {
  std::vector<ScheduleEvent> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    auto toks = split_ws(s);
    if (toks.empty()) continue;
    if (toks[0].size() < 2 || toks[0][0] != '@') throw ScheduleError(line, "expected @<cycle>");
    if (toks.size() < 2) throw ScheduleError(line, "missing operation");
    ScheduleEvent e;
    e.line = line;
    e.cycle = number(toks[0].substr(1), line, "cycle");
    const std::string_view op = toks[1];
    auto positional = [&](size_t n) {
      if (toks.size() < 2 + n) throw ScheduleError(line, std::string(op) + ": missing operand");
    };
    if (op == "create") {
      positional(1);
      e.op = ScheduleEvent::Op::kCreate;
      e.id = toks[2];
      auto kv = keyed(toks, 3, line);
      e.regions = parse_regions(need(kv, "regions", line), line);
    } else if (op == "schedule") {
      positional(1);
      e.op = ScheduleEvent::Op::kSchedule;
      e.id = toks[2];
      auto kv = keyed(toks, 3, line);
      e.core = static_cast<uint32_t>(number(need(kv, "core", line), line, "core"));
      std::filesystem::path path = need(kv, "trace", line);
      if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
      try {
        e.trace = load_trace(path.string());
      } catch (const TraceError& err) {
        throw ScheduleError(line, path.string() + ": " + err.what());
      }
    } else if (op == "deschedule" || op == "trap") {
      e.op = op == "trap" ? ScheduleEvent::Op::kTrap : ScheduleEvent::Op::kDeschedule;
      auto kv = keyed(toks, 2, line);
      e.core = static_cast<uint32_t>(number(need(kv, "core", line), line, "core"));
    } else if (op == "destroy") {
      positional(1);
      e.op = ScheduleEvent::Op::kDestroy;
      e.id = toks[2];
      if (toks.size() > 3) throw ScheduleError(line, "destroy takes one operand");
    } else if (op == "mbox") {
      positional(3);
      e.op = ScheduleEvent::Op::kMbox;
      e.id = toks[2];
      e.to = toks[3];
      try {
        e.payload = parse_payload(toks[4]);
      } catch (const std::invalid_argument& err) {
        throw ScheduleError(line, err.what());
      }
    } else if (op == "memcopy") {
      positional(2);
      e.op = ScheduleEvent::Op::kMemcopy;
      e.id = toks[2];
      if (toks[3] == "read") e.direction = CopyDirection::kReadOs;
      else if (toks[3] == "write") e.direction = CopyDirection::kWriteOs;
      else throw ScheduleError(line, "memcopy direction must be read or write");
    } else if (op == "iobuf") {
      positional(1);
      e.op = ScheduleEvent::Op::kIobuf;
      e.id = toks[2];
      auto kv = keyed(toks, 3, line);
      e.io.enclave_addr = number(need(kv, "enclave", line), line, "address");
      e.io.os_addr = number(need(kv, "os", line), line, "address");
      e.io.size = number(need(kv, "size", line), line, "size");
    } else {
      throw ScheduleError(line, "unknown operation '" + std::string(op) + "'");
    }
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const ScheduleEvent& a, const ScheduleEvent& b) {
    return a.cycle < b.cycle;
  });
  return out;
}

std::vector<ScheduleEvent> load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScheduleError(0, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schedule(buf.str(), std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------

Monitor::Monitor(Machine& machine) : m_(machine), running_(machine.n_cores()) {
  m_.set_event_hook([this](uint64_t now) {
    while (next_ < events_.size() && events_[next_].cycle <= now) {
      const ScheduleEvent& e = events_[next_];
      const bool reallocates =
          e.op == ScheduleEvent::Op::kCreate || e.op == ScheduleEvent::Op::kDestroy;
      if (reallocates) {
        // Memory is handed over only once no purge or miss still touches it.
        bool wait = false;
        for (uint32_t c = 0; c < m_.n_cores(); ++c) wait |= m_.core(c).mode() != CoreMode::kNormal;
        std::vector<RegionId> regions = e.regions;
        if (e.op == ScheduleEvent::Op::kDestroy && has_domain(e.id)) {
          regions = domains_.at(e.id).regions;
        }
        for (RegionId r : regions) {
          wait |= r.value < m_.config().n_regions && m_.region_busy(r);
        }
        if (wait) return;
      }
      apply(e);
      ++next_;
    }
  });
  m_.set_busy_hook([this] { return pending(); });
}

void Monitor::load(std::vector<ScheduleEvent> events) {
  events_ = std::move(events);
  next_ = 0;
}

void Monitor::note(const std::string& text) {
  journal_.push_back(std::to_string(m_.now()) + " " + text);
  m_.log().add(m_.now(), "monitor", "event", text);
}

void Monitor::apply(const ScheduleEvent& e) {
  switch (e.op) {
    case ScheduleEvent::Op::kCreate: create_domain(e.id, e.regions); break;
    case ScheduleEvent::Op::kSchedule: schedule(e.id, e.core, e.trace); break;
    case ScheduleEvent::Op::kDeschedule: deschedule(e.core); break;
    case ScheduleEvent::Op::kDestroy: destroy_domain(e.id); break;
    case ScheduleEvent::Op::kMbox:
      if (!mailbox_send(e.id, e.to, e.payload)) note("mbox rejected: inbox of " + e.to + " full");
      break;
    case ScheduleEvent::Op::kMemcopy: memcopy(e.id, e.direction); break;
    case ScheduleEvent::Op::kIobuf:
      register_io_buffers(e.id, e.io.enclave_addr, e.io.os_addr, e.io.size, e.io.size);
      break;
    case ScheduleEvent::Op::kTrap: trap(e.core); break;
  }
}

const ProtectionDomain& Monitor::domain(const std::string& id) const {
  auto it = domains_.find(id);
  if (it == domains_.end()) throw MonitorError("unknown domain '" + id + "'");
  return it->second;
}

ProtectionDomain& Monitor::live(const std::string& id) {
  auto it = domains_.find(id);
  if (it == domains_.end()) throw MonitorError("unknown domain '" + id + "'");
  if (it->second.state == DomainState::kDestroyed) {
    throw MonitorError("domain '" + id + "' is destroyed");
  }
  return it->second;
}

RegionBits Monitor::os_view() const {
  const SimConfig& cfg = m_.config();
  RegionBits bits(cfg.n_regions, false);
  for (uint32_t r = cfg.monitor_regions; r < cfg.n_regions; ++r) bits[r] = true;
  for (const auto& [id, d] : domains_) {
    if (d.state == DomainState::kDestroyed) continue;
    for (RegionId r : d.regions) bits[r.value] = false;
  }
  return bits;
}

RegionBits Monitor::domain_view(const std::string& id) const {
  RegionBits bits(m_.config().n_regions, false);
  for (RegionId r : domain(id).regions) bits[r.value] = true;
  return bits;
}

void Monitor::refresh_os_cores() {
  const RegionBits view = os_view();
  for (uint32_t c = 0; c < m_.n_cores(); ++c) {
    if (!running_[c]) m_.core(c).set_bitvector(view);
  }
}

void Monitor::tlb_shootdown() {
  for (uint32_t c = 0; c < m_.n_cores(); ++c) m_.core(c).tlb_shootdown();
}

void Monitor::create_domain(const std::string& id, const std::vector<RegionId>& regions) {
  const SimConfig& cfg = m_.config();
  if (auto it = domains_.find(id); it != domains_.end() &&
                                   it->second.state != DomainState::kDestroyed) {
    throw MonitorError("domain '" + id + "' already exists");
  }
  if (id == "os") throw MonitorError("'os' names the untrusted host");
  if (regions.empty()) throw MonitorError("domain '" + id + "' needs at least one region");
  std::set<uint32_t> seen;
  for (RegionId r : regions) {
    if (r.value >= cfg.n_regions) {
      throw MonitorError("region " + std::to_string(r.value) + " does not exist");
    }
    if (r.value < cfg.monitor_regions) {
      throw MonitorError("region " + std::to_string(r.value) + " is reserved by the monitor");
    }
    if (!seen.insert(r.value).second) {
      throw MonitorError("region " + std::to_string(r.value) + " listed twice");
    }
    for (const auto& [other, d] : domains_) {
      if (d.state == DomainState::kDestroyed) continue;
      if (std::find(d.regions.begin(), d.regions.end(), r) != d.regions.end()) {
        throw MonitorError("region " + std::to_string(r.value) + " already owned by domain '" +
                           other + "'");
      }
    }
  }
  ProtectionDomain d;
  d.id = id;
  d.regions = regions;
  domains_[id] = d;
  refresh_os_cores();
  tlb_shootdown();
  for (RegionId r : regions) m_.erase_region(r);
  note("create " + id);
}

void Monitor::schedule(const std::string& id, uint32_t core, Trace trace) {
  if (core >= m_.n_cores()) throw MonitorError("core " + std::to_string(core) + " does not exist");
  ProtectionDomain& d = live(id);
  if (running_[core]) {
    throw MonitorError("core " + std::to_string(core) + " busy running '" + *running_[core] + "'");
  }
  if (m_.core(core).mode() != CoreMode::kNormal) {
    throw MonitorError("core " + std::to_string(core) + " busy with a context switch");
  }
  check_trace_range(trace, m_.config());
  SwitchPlan plan;
  plan.replace_trace = true;
  plan.next_trace = std::move(trace);
  plan.bitvector = domain_view(id);
  m_.core(core).request_switch(std::move(plan));
  running_[core] = id;
  d.cores.insert(core);
  d.state = DomainState::kRunning;
  note("schedule " + id + " core=" + std::to_string(core));
}

void Monitor::deschedule(uint32_t core) {
  if (core >= m_.n_cores()) throw MonitorError("core " + std::to_string(core) + " does not exist");
  if (!running_[core]) throw MonitorError("core " + std::to_string(core) + " is idle");
  if (m_.core(core).mode() != CoreMode::kNormal) {
    throw MonitorError("core " + std::to_string(core) + " busy with a context switch");
  }
  ProtectionDomain& d = live(*running_[core]);
  running_[core].reset();
  SwitchPlan plan;
  plan.replace_trace = true;
  plan.bitvector = os_view();
  m_.core(core).request_switch(std::move(plan));
  d.cores.erase(core);
  if (d.cores.empty()) d.state = DomainState::kDescheduled;
  note("deschedule core=" + std::to_string(core));
}

void Monitor::destroy_domain(const std::string& id) {
  ProtectionDomain& d = live(id);
  if (!d.cores.empty()) {
    throw MonitorError("domain '" + id + "' still scheduled on core " +
                       std::to_string(*d.cores.begin()));
  }
  d.state = DomainState::kDestroyed;
  d.inbox.clear();
  d.io.reset();
  for (RegionId r : d.regions) m_.erase_region(r);
  tlb_shootdown();
  refresh_os_cores();
  note("destroy " + id);
}

void Monitor::charge(const std::string& id, uint64_t cycles, bool nonspec) {
  const uint64_t until = m_.now() + cycles;
  for (uint32_t c = 0; c < m_.n_cores(); ++c) {
    const bool mine = id == "os" ? !running_[c] : running_[c] == id;
    if (!mine) continue;
    m_.core(c).stall_until(until);
    if (nonspec) m_.core(c).nonspec_until(until);
  }
}

bool Monitor::mailbox_send(const std::string& from, const std::string& to,
                           const Payload& payload) {
  if (from != "os") live(from);
  std::deque<Payload>& inbox = to == "os" ? os_inbox_ : live(to).inbox;
  // The call costs the same whether or not it is accepted.
  charge(from, mailbox_cost(m_.config()), false);
  if (inbox.size() >= m_.config().mailbox_depth) return false;
  inbox.push_back(payload);
  note("mbox " + from + "->" + to);
  return true;
}

std::optional<Payload> Monitor::mailbox_receive(const std::string& id) {
  std::deque<Payload>& inbox = id == "os" ? os_inbox_ : live(id).inbox;
  if (inbox.empty()) return std::nullopt;
  Payload p = inbox.front();
  inbox.pop_front();
  return p;
}

void Monitor::register_io_buffers(const std::string& id, uint64_t enclave_addr,
                                  uint64_t os_addr, uint64_t enclave_size, uint64_t os_size) {
  ProtectionDomain& d = live(id);
  const SimConfig& cfg = m_.config();
  if (enclave_size != os_size) {
    throw MonitorError("io buffers differ in size (" + std::to_string(enclave_size) + " vs " +
                       std::to_string(os_size) + ")");
  }
  if (enclave_size == 0 || enclave_size % 8 != 0 || enclave_addr % 8 != 0 || os_addr % 8 != 0) {
    throw MonitorError("io buffers must be non-empty and 8-byte aligned");
  }
  auto inside = [&](uint64_t addr, const RegionBits& bits) {
    if (addr + enclave_size > cfg.dram_bytes) return false;
    for (uint64_t a = addr; a < addr + enclave_size; a += cfg.line_bytes) {
      if (check_access(cfg.line_of(a), bits, cfg) != Access::kAllowed) return false;
    }
    return check_access(cfg.line_of(addr + enclave_size - 1), bits, cfg) == Access::kAllowed;
  };
  if (!inside(enclave_addr, domain_view(id))) {
    throw MonitorError("enclave buffer " + hex(enclave_addr) + " outside domain '" + id + "'");
  }
  if (!inside(os_addr, os_view())) {
    throw MonitorError("os buffer " + hex(os_addr) + " outside untrusted memory");
  }
  d.io = IoBuffers{enclave_addr, os_addr, enclave_size};
  note("iobuf " + id);
}

uint64_t Monitor::memcopy_cost(const SimConfig& cfg, uint64_t bytes) {
  const uint64_t lines = (bytes + cfg.line_bytes - 1) / cfg.line_bytes;
  return cfg.monitor_call_cycles + lines * cfg.memcopy_cycles_per_line;
}

uint64_t Monitor::memcopy(const std::string& id, CopyDirection dir) {
  ProtectionDomain& d = live(id);
  if (!d.io) throw MonitorError("domain '" + id + "' has no io buffers");
  const IoBuffers io = *d.io;
  const uint64_t src = dir == CopyDirection::kReadOs ? io.os_addr : io.enclave_addr;
  const uint64_t dst = dir == CopyDirection::kReadOs ? io.enclave_addr : io.os_addr;
  for (uint64_t off = 0; off < io.size; off += 8) m_.poke_word(dst + off, m_.peek_word(src + off));
  const uint64_t cost = memcopy_cost(m_.config(), io.size);
  charge(id, cost, true);
  note(std::string("memcopy ") + id + (dir == CopyDirection::kReadOs ? " read" : " write"));
  return cost;
}

void Monitor::trap(uint32_t core) {
  if (core >= m_.n_cores()) throw MonitorError("core " + std::to_string(core) + " does not exist");
  if (!m_.variant().has(Flag::kFlush)) {
    note("trap core=" + std::to_string(core));
    return;
  }
  if (m_.core(core).mode() != CoreMode::kNormal) {
    note("trap core=" + std::to_string(core) + " during a switch, no extra purge");
    return;
  }
  m_.core(core).request_switch(SwitchPlan{});
  note("trap core=" + std::to_string(core) + " purge");
}

}  // namespace mi6
