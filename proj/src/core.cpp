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

#include "mi6/core.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mi6 {
namespace {

constexpr uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

std::string hex(uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Trace grammar

Trace parse_trace(std::string_view text) {
  Trace out;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    size_t i = 0;
    auto skip_ws = [&] {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    };
    skip_ws();
    if (i == line.size()) {
      if (eol == text.size()) break;
      continue;
    }
    const char op = line[i];
    const int op_col = static_cast<int>(i) + 1;
    ++i;
    if (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      throw TraceError(line_no, op_col, "unknown op");
    }
    skip_ws();
    const int arg_col = static_cast<int>(i) + 1;
    size_t end = i;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    std::string_view arg = line.substr(i, end - i);
    i = end;
    skip_ws();
    if (i != line.size()) throw TraceError(line_no, static_cast<int>(i) + 1, "trailing text");
    if (arg.empty()) throw TraceError(line_no, arg_col, "missing operand");

    uint64_t value = 0;
    if (op == 'C' || op == 'c') {
      auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value, 10);
      if (ec != std::errc() || p != arg.data() + arg.size()) {
        throw TraceError(line_no, arg_col, "bad decimal cycle count");
      }
      if (value == 0) throw TraceError(line_no, arg_col, "compute cycles must be >= 1");
      out.push_back(TraceOp::compute(value));
    } else if (op == 'L' || op == 'l' || op == 'S' || op == 's') {
      if (arg.size() < 3 || arg[0] != '0' || (arg[1] != 'x' && arg[1] != 'X')) {
        throw TraceError(line_no, arg_col, "address must be 0x<hex>");
      }
      auto digits = arg.substr(2);
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, 16);
      if (ec != std::errc() || p != digits.data() + digits.size()) {
        throw TraceError(line_no, arg_col, "bad hex address");
      }
      out.push_back((op == 'L' || op == 'l') ? TraceOp::load(value) : TraceOp::store(value));
    } else {
      throw TraceError(line_no, op_col, "unknown op");
    }
    if (eol == text.size()) break;
  }
  return out;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError(0, 0, "cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

std::string format_trace(const Trace& trace) {
  std::ostringstream os;
  for (const auto& op : trace) {
    switch (op.kind) {
      case TraceOp::Kind::kCompute: os << "C " << op.cycles << '\n'; break;
      case TraceOp::Kind::kLoad: os << "L " << hex(op.addr) << '\n'; break;
      case TraceOp::Kind::kStore: os << "S " << hex(op.addr) << '\n'; break;
    }
  }
  return os.str();
}

void check_trace_range(const Trace& trace, const SimConfig& cfg) {
  for (size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].is_memory() && trace[i].addr >= cfg.dram_bytes) {
      throw TraceError(static_cast<int>(i) + 1, 3,
                       "address " + hex(trace[i].addr) + " outside DRAM");
    }
  }
}

Access check_access(LineAddress addr, const RegionBits& bv, const SimConfig& cfg) {
  const RegionId r = dram_region(addr, cfg);
  return r.value < bv.size() && bv[r.value] ? Access::kAllowed : Access::kFault;
}

// ---------------------------------------------------------------------------
// PermissionTlb

PermissionTlb::PermissionTlb(uint32_t l1_entries, uint32_t l2_sets, uint32_t l2_ways)
    : l1_cap_(l1_entries), l2_sets_(l2_sets), l2_ways_(l2_ways) {
  clear();
}

void PermissionTlb::clear() {
  l1_.clear();
  l2_.assign(size_t{l2_sets_} * l2_ways_, Way{});
  l2_order_.assign(l2_sets_, {});
  for (auto& order : l2_order_) {
    for (uint32_t w = 0; w < l2_ways_; ++w) order.push_back(w);
  }
}

bool PermissionTlb::contains(uint64_t page) const {
  if (std::find(l1_.begin(), l1_.end(), page) != l1_.end()) return true;
  const uint32_t set = static_cast<uint32_t>(page % l2_sets_);
  for (uint32_t w = 0; w < l2_ways_; ++w) {
    const Way& way = l2_[size_t{set} * l2_ways_ + w];
    if (way.valid && way.page == page) return true;
  }
  return false;
}

bool PermissionTlb::lookup(uint64_t page) {
  if (auto it = std::find(l1_.begin(), l1_.end(), page); it != l1_.end()) {
    l1_.erase(it);
    l1_.push_back(page);
    return true;
  }
  const uint32_t set = static_cast<uint32_t>(page % l2_sets_);
  for (uint32_t w = 0; w < l2_ways_; ++w) {
    const Way& way = l2_[size_t{set} * l2_ways_ + w];
    if (way.valid && way.page == page) {
      auto& order = l2_order_[set];
      order.erase(std::find(order.begin(), order.end(), w));
      order.push_back(w);
      if (l1_.size() == l1_cap_) l1_.erase(l1_.begin());
      l1_.push_back(page);
      return true;
    }
  }
  return false;
}

void PermissionTlb::insert(uint64_t page) {
  if (contains(page)) return;
  if (l1_.size() == l1_cap_) l1_.erase(l1_.begin());
  l1_.push_back(page);
  const uint32_t set = static_cast<uint32_t>(page % l2_sets_);
  auto& order = l2_order_[set];
  uint32_t victim = order.front();
  for (uint32_t w = 0; w < l2_ways_; ++w) {
    if (!l2_[size_t{set} * l2_ways_ + w].valid) {
      victim = w;
      break;
    }
  }
  l2_[size_t{set} * l2_ways_ + victim] = Way{true, page};
  order.erase(std::find(order.begin(), order.end(), victim));
  order.push_back(victim);
}

std::string PermissionTlb::serialize() const {
  std::ostringstream os;
  os << "tlb1:";
  for (uint64_t p : l1_) os << p << ',';
  os << "|tlb2:";
  for (const auto& w : l2_) {
    if (w.valid) os << w.page << ',';
    else os << "-,";
  }
  os << "|order:";
  for (const auto& order : l2_order_) {
    for (uint32_t w : order) os << w;
    os << ';';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Core

Core::Core(uint32_t id, const SimConfig& cfg, const Variant& variant)
    : id_(id),
      cfg_(cfg),
      variant_(variant),
      l1_seed_(derive_seed(cfg.seed, "l1." + std::to_string(id))),
      tlb_(cfg.l1_tlb_entries, cfg.l2_tlb_sets, cfg.l2_tlb_ways),
      bitvector_(cfg.n_regions, false) {
  reset_microarch();
}

void Core::reset_microarch() {
  window_.clear();
  l1_.assign(size_t{cfg_.l1_sets} * cfg_.l1_ways, L1Line{});
  mshrs_.assign(cfg_.l1_mshrs, L1Mshr{});
  tlb_.clear();
  bp_table_.assign(cfg_.bp_table_entries, 0);
  walk_.reset();
  compute_until_ = 0;
  compute_left_ = 0;
  stall_until_ = 0;
  nonspec_until_ = 0;
  purge_cursor_ = 0;
}

uint64_t Core::purge_duration(const SimConfig& cfg) {
  const uint64_t l1 = ceil_div(uint64_t{cfg.l1_sets} * cfg.l1_ways, cfg.l1_flush_rate);
  const uint64_t l1_tlb = 1;
  const uint64_t l2_tlb = cfg.l2_tlb_sets;
  const uint64_t bp = ceil_div(cfg.bp_table_entries, cfg.bp_flush_rate);
  return std::max({l1, l1_tlb, l2_tlb, bp});
}

void Core::assign_trace(Trace trace, uint64_t now) {
  trace_ = std::move(trace);
  has_trace_ = true;
  next_op_ = 0;
  ++trace_generation_;
  trace_start_ = now;
  finished_ = false;
  finish_cycle_ = 0;
  records_.clear();
  records_.reserve(trace_.size());
}

bool Core::nonspec_at(uint64_t now) const {
  return variant_.has(Flag::kNonSpec) || now < nonspec_until_;
}

bool Core::busy() const {
  return mode_ != CoreMode::kNormal || !window_.empty() ||
         (has_trace_ && !finished_);
}

size_t Core::inflight_memops() const { return window_.size(); }

size_t Core::busy_mshrs() const {
  return static_cast<size_t>(
      std::count_if(mshrs_.begin(), mshrs_.end(), [](const L1Mshr& m) { return m.busy; }));
}

uint32_t Core::l1_set(LineAddress a) const {
  return static_cast<uint32_t>(a.value & (cfg_.l1_sets - 1));
}

Core::L1Line* Core::find_line(LineAddress a) {
  const size_t base = size_t{l1_set(a)} * cfg_.l1_ways;
  for (uint32_t w = 0; w < cfg_.l1_ways; ++w) {
    L1Line& line = l1_[base + w];
    if (line.valid && line.tag == a) return &line;
  }
  return nullptr;
}

const Core::L1Line* Core::find_line(LineAddress a) const {
  return const_cast<Core*>(this)->find_line(a);
}

Core::L1Mshr* Core::find_mshr(LineAddress a) {
  for (auto& m : mshrs_) {
    if (m.busy && m.addr == a) return &m;
  }
  return nullptr;
}

std::optional<Msi> Core::l1_state(LineAddress a) const {
  const L1Line* line = find_line(a);
  if (!line) return std::nullopt;
  return line->state;
}

std::optional<LineData> Core::l1_data(LineAddress a) const {
  const L1Line* line = find_line(a);
  if (!line) return std::nullopt;
  return line->data;
}

bool Core::l1_write_word(LineAddress a, size_t word, uint64_t value) {
  L1Line* line = find_line(a);
  if (!line) return false;
  line->data[word] = value;
  return true;
}

void Core::l1_invalidate_region(RegionId r) {
  for (auto& line : l1_) {
    if (line.valid && dram_region(line.tag, cfg_) == r) line = L1Line{};
  }
}

bool Core::l1_has_mshr_in(RegionId r) const {
  for (const auto& m : mshrs_) {
    if (m.busy && dram_region(m.addr, cfg_) == r) return true;
  }
  return false;
}

uint64_t Core::store_value(uint32_t op_index) const {
  return (uint64_t{id_ + 1} << 48) | ((trace_generation_ & 0xffff) << 32) |
         (uint64_t{op_index} + 1);
}

uint64_t Core::perform(uint64_t now, size_t record, L1Line& line,
                       std::vector<PerformEvent>* performs) {
  OpRecord& rec = records_[record];
  const TraceOp& op = trace_[rec.index];
  const size_t word = (op.addr >> 3) & (kWordsPerLine - 1);
  if (rec.is_store) {
    if (line.state != Msi::kM) {
      throw SimError(now, "core" + std::to_string(id_), "store performed without M");
    }
    rec.value = store_value(rec.index);
    line.data[word] = rec.value;
  } else {
    rec.value = line.data[word];
  }
  if (performs) {
    performs->push_back(PerformEvent{now, id_, rec.index, rec.is_store,
                                     op.addr & ~uint64_t{7}, rec.value});
  }
  return rec.value;
}

void Core::request_switch(SwitchPlan plan) {
  if (mode_ != CoreMode::kNormal || switch_plan_) {
    throw std::logic_error("core" + std::to_string(id_) +
                           ": purge requested while a purge is underway");
  }
  switch_plan_ = std::move(plan);
  mode_ = CoreMode::kDraining;
}

uint64_t Core::begin_purge(uint64_t now) {
  if (mode_ == CoreMode::kPurging) {
    throw std::logic_error("core" + std::to_string(id_) + ": purge while purging");
  }
  if (!window_.empty() || busy_mshrs() != 0) {
    throw std::logic_error("core" + std::to_string(id_) + ": purge with in-flight ops");
  }
  mode_ = CoreMode::kPurging;
  const uint64_t duration = purge_duration(cfg_);
  purge_done_at_ = now + duration;
  purge_cursor_ = 0;
  // TLBs and predictor tables are private and the core idles for the whole
  // purge, so clearing them up front is indistinguishable from the gradual
  // hardware sweep.
  tlb_.clear();
  std::fill(bp_table_.begin(), bp_table_.end(), uint8_t{0});
  walk_.reset();
  // A compute op cut short by the purge finishes after it.
  compute_left_ = compute_until_ > now ? compute_until_ - now : 0;
  compute_until_ = 0;
  stall_until_ = 0;
  nonspec_until_ = 0;
  if (switch_plan_ && switch_plan_->bitvector) bitvector_ = *switch_plan_->bitvector;
  ++stats_.purges;
  stats_.purge_stall_cycles += duration;
  return duration;
}

void Core::purge_progress(uint64_t now, CoreLink& link, EventLog& log) {
  for (uint32_t n = 0; n < cfg_.l1_flush_rate && purge_cursor_ < l1_.size(); ++n) {
    L1Line& line = l1_[purge_cursor_++];
    if (!line.valid) continue;
    DowngradeResponse resp{id_, line.tag, Msi::kI, line.state == Msi::kM, line.data};
    link.purge_evict.enqueue(resp);
    line = L1Line{};
  }
  if (now + 1 >= purge_done_at_ && purge_cursor_ >= l1_.size()) {
    // Purge ends at the close of this cycle; issue resumes at purge_done_at_.
    mode_ = CoreMode::kNormal;
    purge_cursor_ = 0;
    if (compute_left_ != 0) compute_until_ = purge_done_at_ + compute_left_;
    compute_left_ = 0;
    if (switch_plan_) {
      SwitchPlan plan = std::move(*switch_plan_);
      switch_plan_.reset();
      if (plan.replace_trace) {
        compute_until_ = 0;
        assign_trace(std::move(plan.next_trace), purge_done_at_);
        if (trace_.empty()) has_trace_ = false;
      }
    }
    log.add(now, "core" + std::to_string(id_), "purge_done", std::to_string(purge_done_at_));
  }
}

Access Core::page_walk_check(uint64_t page) {
  const LineAddress first{page * (cfg_.page_bytes / cfg_.line_bytes)};
  const Access a = check_access(first, bitvector_, cfg_);
  if (a == Access::kAllowed) tlb_.insert(page);
  return a;
}

void Core::tlb_shootdown() { tlb_.clear(); }

void Core::handle_incoming(uint64_t now, CoreLink& link, EventLog& log,
                           std::vector<PerformEvent>* performs) {
  if (link.to_l1.empty()) return;
  const ToL1& msg = link.to_l1.front();
  const std::string me = "core" + std::to_string(id_);
  if (msg.kind == ToL1::Kind::kDowngradeRequest) {
    L1Line* line = find_line(msg.addr);
    if (line && line->state > msg.state) {
      if (!link.downgrade_resp.can_enqueue()) return;
      DowngradeResponse resp{id_, msg.addr, msg.state, line->state == Msi::kM, line->data};
      link.downgrade_resp.enqueue(resp);
      if (msg.state == Msi::kI) *line = L1Line{};
      else line->state = msg.state;
      log.add(now, me, "dg_resp", hex(msg.addr.value));
    }
    // Otherwise a voluntary eviction already answered this request.
    link.to_l1.dequeue();
    return;
  }

  L1Mshr* mshr = find_mshr(msg.addr);
  if (!mshr) throw SimError(now, me, "upgrade response without MSHR for " + hex(msg.addr.value));
  L1Line* line = find_line(msg.addr);
  if (!line) {
    const size_t base = size_t{l1_set(msg.addr)} * cfg_.l1_ways;
    size_t way = cfg_.l1_ways;
    for (uint32_t w = 0; w < cfg_.l1_ways; ++w) {
      if (!l1_[base + w].valid) {
        way = w;
        break;
      }
    }
    if (way == cfg_.l1_ways) {
      way = hash_words(l1_seed_, now, l1_set(msg.addr)) % cfg_.l1_ways;
      L1Line& victim = l1_[base + way];
      if (!link.downgrade_resp.can_enqueue()) return;
      link.downgrade_resp.enqueue(DowngradeResponse{id_, victim.tag, Msi::kI,
                                                    victim.state == Msi::kM, victim.data});
      log.add(now, me, "evict", hex(victim.tag.value));
      victim = L1Line{};
    }
    line = &l1_[base + way];
    line->valid = true;
    line->tag = msg.addr;
  }
  line->state = msg.state;
  line->data = msg.data;
  const size_t record = mshr->record;
  perform(now, record, *line, performs);
  records_[record].completion = now;
  for (auto& e : window_) {
    if (e.pending && e.record == record) {
      e.pending = false;
      e.complete_at = now;
    }
  }
  *mshr = L1Mshr{};
  link.to_l1.dequeue();
  log.add(now, me, "fill", hex(msg.addr.value));
}

void Core::retire(uint64_t now) {
  while (!window_.empty() && !window_.front().pending && window_.front().complete_at <= now) {
    window_.pop_front();
  }
}

void Core::issue(uint64_t now, CoreLink& link, EventLog& log,
                 std::vector<PerformEvent>* performs) {
  if (mode_ != CoreMode::kNormal || !has_trace_) return;
  if (now < stall_until_) return;
  const std::string me = "core" + std::to_string(id_);
  for (uint32_t slot = 0; slot < cfg_.issue_width; ++slot) {
    if (next_op_ >= trace_.size() || now < compute_until_) return;
    const TraceOp& op = trace_[next_op_];
    if (op.kind == TraceOp::Kind::kCompute) {
      if (!bp_table_.empty()) {
        auto& entry = bp_table_[hash_words(0, trace_generation_, next_op_) % bp_table_.size()];
        entry = static_cast<uint8_t>(std::min(3, entry + 1));
      }
      compute_until_ = now + op.cycles;
      ++next_op_;
      return;
    }
    if (window_.size() >= cfg_.issue_window) return;
    if (nonspec_at(now) && !window_.empty()) return;

    const uint64_t page = op.addr / cfg_.page_bytes;
    if (!tlb_.lookup(page)) {
      if (!walk_) {
        walk_ = Walk{page, now + cfg_.page_walk_latency};
        ++stats_.tlb_walks;
      }
      if (walk_->page != page || now < walk_->done_at) return;
      walk_.reset();
      if (page_walk_check(page) == Access::kFault) {
        OpRecord rec{static_cast<uint32_t>(next_op_), now, now, true,
                     op.kind == TraceOp::Kind::kStore, 0};
        records_.push_back(rec);
        ++stats_.faults;
        ++stats_.memops;
        ++next_op_;
        log.add(now, me, "fault", hex(op.addr));
        continue;
      }
    }

    const LineAddress addr = cfg_.line_of(op.addr);
    const bool is_store = op.kind == TraceOp::Kind::kStore;
    L1Line* line = find_line(addr);
    const bool hit = line && (is_store ? line->state == Msi::kM : true);
    if (hit) {
      records_.push_back(OpRecord{static_cast<uint32_t>(next_op_), now,
                                  now + cfg_.l1_hit_latency, false, is_store, 0});
      const size_t record = records_.size() - 1;
      perform(now, record, *line, performs);
      window_.push_back(WindowEntry{record, now + cfg_.l1_hit_latency, false});
    } else {
      if (find_mshr(addr)) return;
      auto free = std::find_if(mshrs_.begin(), mshrs_.end(),
                               [](const L1Mshr& m) { return !m.busy; });
      if (free == mshrs_.end()) return;
      if (!link.upgrade_req.can_enqueue()) return;
      records_.push_back(OpRecord{static_cast<uint32_t>(next_op_), now, 0, false, is_store, 0});
      const size_t record = records_.size() - 1;
      const Msi want = is_store ? Msi::kM : Msi::kS;
      *free = L1Mshr{true, addr, want, record};
      link.upgrade_req.enqueue(UpgradeRequest{id_, addr, want});
      window_.push_back(WindowEntry{record, 0, true});
      ++stats_.l1_misses;
      log.add(now, me, "miss", hex(addr.value));
    }
    ++stats_.memops;
    ++next_op_;
    stats_.max_inflight_memops =
        std::max<uint64_t>(stats_.max_inflight_memops, window_.size());
  }
}

void Core::step(uint64_t now, CoreLink& link, EventLog& log,
                std::vector<PerformEvent>* performs) {
  handle_incoming(now, link, log, performs);
  retire(now);
  if (mode_ == CoreMode::kDraining && window_.empty() && busy_mshrs() == 0) {
    begin_purge(now);
    log.add(now, "core" + std::to_string(id_), "purge_begin", std::to_string(purge_done_at_));
  }
  if (mode_ == CoreMode::kPurging) {
    purge_progress(now, link, log);
    return;
  }
  issue(now, link, log, performs);
  if (has_trace_ && !finished_ && mode_ == CoreMode::kNormal &&
      next_op_ >= trace_.size() && window_.empty() && now >= compute_until_) {
    finished_ = true;
    finish_cycle_ = now;
    log.add(now, "core" + std::to_string(id_), "done", std::to_string(records_.size()));
  }
}

std::string Core::serialize_state() const {
  std::ostringstream os;
  os << "mode:" << static_cast<int>(mode_) << "|window:" << window_.size() << "|l1:";
  for (const auto& line : l1_) {
    if (!line.valid) {
      os << "-;";
      continue;
    }
    os << line.tag.value << msi_char(line.state);
    for (uint64_t w : line.data) os << ',' << w;
    os << ';';
  }
  os << "|mshr:";
  for (const auto& m : mshrs_) os << (m.busy ? std::to_string(m.addr.value) : "-") << ';';
  os << '|' << tlb_.serialize() << "|bp:";
  for (uint8_t b : bp_table_) os << static_cast<int>(b);
  os << "|walk:" << (walk_ ? std::to_string(walk_->page) : "-");
  os << "|compute:" << compute_until_ << "|stall:" << stall_until_
     << "|nonspec:" << nonspec_until_ << "|cursor:" << purge_cursor_;
  return os.str();
}

}  // namespace mi6
