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

#include "mi6/config.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <variant>

namespace mi6 {
namespace {

constexpr uint16_t kStrongBits =
    static_cast<uint16_t>(Flag::kMshrPartition) |
    static_cast<uint16_t>(Flag::kRrArbiter) |
    static_cast<uint16_t>(Flag::kSplitUq) |
    static_cast<uint16_t>(Flag::kDupDowngrade) |
    static_cast<uint16_t>(Flag::kDqRetry);

constexpr uint16_t bit(Flag f) { return static_cast<uint16_t>(f); }

constexpr uint16_t kSecureBits =
    bit(Flag::kFlush) | bit(Flag::kPart) | kStrongBits;
constexpr uint16_t kFpmaBits =
    bit(Flag::kFlush) | bit(Flag::kPart) | bit(Flag::kMiss) | bit(Flag::kArb);

struct Preset {
  std::string_view name;
  uint16_t bits;
};

constexpr Preset kPresets[] = {
    {"base", 0},
    {"flush", bit(Flag::kFlush)},
    {"part", bit(Flag::kPart)},
    {"miss", bit(Flag::kMiss)},
    {"arb", bit(Flag::kArb)},
    {"nonspec", bit(Flag::kNonSpec)},
    {"secure", kSecureBits},
    {"fpma", kFpmaBits},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

bool is_pow2(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

using Field = std::variant<uint32_t SimConfig::*, uint64_t SimConfig::*>;

struct FieldDef {
  std::string_view name;
  Field member;
};

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> kFields = {
      {"n_cores", &SimConfig::n_cores},
      {"line_bytes", &SimConfig::line_bytes},
      {"l1_sets", &SimConfig::l1_sets},
      {"l1_ways", &SimConfig::l1_ways},
      {"l1_mshrs", &SimConfig::l1_mshrs},
      {"l1_hit_latency", &SimConfig::l1_hit_latency},
      {"llc_sets", &SimConfig::llc_sets},
      {"llc_ways", &SimConfig::llc_ways},
      {"llc_mshrs_total", &SimConfig::llc_mshrs_total},
      {"llc_pipeline_latency", &SimConfig::llc_pipeline_latency},
      {"dram_latency", &SimConfig::dram_latency},
      {"dram_max_inflight", &SimConfig::dram_max_inflight},
      {"n_regions", &SimConfig::n_regions},
      {"dram_bytes", &SimConfig::dram_bytes},
      {"page_bytes", &SimConfig::page_bytes},
      {"page_walk_latency", &SimConfig::page_walk_latency},
      {"l1_tlb_entries", &SimConfig::l1_tlb_entries},
      {"l2_tlb_sets", &SimConfig::l2_tlb_sets},
      {"l2_tlb_ways", &SimConfig::l2_tlb_ways},
      {"bp_table_entries", &SimConfig::bp_table_entries},
      {"bp_flush_rate", &SimConfig::bp_flush_rate},
      {"l1_flush_rate", &SimConfig::l1_flush_rate},
      {"issue_window", &SimConfig::issue_window},
      {"issue_width", &SimConfig::issue_width},
      {"miss_banks", &SimConfig::miss_banks},
      {"part_region_bits", &SimConfig::part_region_bits},
      {"link_fifo_depth", &SimConfig::link_fifo_depth},
      {"monitor_regions", &SimConfig::monitor_regions},
      {"monitor_call_cycles", &SimConfig::monitor_call_cycles},
      {"memcopy_cycles_per_line", &SimConfig::memcopy_cycles_per_line},
      {"mailbox_depth", &SimConfig::mailbox_depth},
      {"seed", &SimConfig::seed},
  };
  return kFields;
}

uint64_t parse_number(std::string_view text, std::string_view key, int line) {
  text = trim(text);
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    base = 16;
    text.remove_prefix(2);
  }
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value, base);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("line " + std::to_string(line) + ": bad value for '" +
                      std::string(key) + "'");
  }
  return value;
}

}  // namespace

uint32_t SimConfig::line_shift() const {
  return static_cast<uint32_t>(std::countr_zero(line_bytes));
}

uint32_t SimConfig::llc_index_bits() const {
  return static_cast<uint32_t>(std::countr_zero(llc_sets));
}

std::string_view flag_name(Flag f) {
  switch (f) {
    case Flag::kFlush: return "flush";
    case Flag::kPart: return "part";
    case Flag::kMiss: return "miss";
    case Flag::kArb: return "arb";
    case Flag::kNonSpec: return "nonspec";
    case Flag::kMshrPartition: return "mshr_partition";
    case Flag::kSplitUq: return "split_uq";
    case Flag::kDupDowngrade: return "dup_downgrade";
    case Flag::kDqRetry: return "dq_retry";
    case Flag::kRrArbiter: return "rr_arbiter";
  }
  return "?";
}

const std::vector<Flag>& all_flags() {
  static const std::vector<Flag> kAll = {
      Flag::kFlush,        Flag::kPart,     Flag::kMiss,
      Flag::kArb,          Flag::kNonSpec,  Flag::kMshrPartition,
      Flag::kSplitUq,      Flag::kDupDowngrade, Flag::kDqRetry,
      Flag::kRrArbiter};
  return kAll;
}

std::optional<Flag> flag_from_name(std::string_view name) {
  const std::string n = lower(trim(name));
  for (Flag f : all_flags()) {
    if (flag_name(f) == n) return f;
  }
  return std::nullopt;
}

Variant Variant::secure() { return Variant(kSecureBits); }

Variant Variant::parse(std::string_view text) {
  const std::string n = lower(trim(text));
  if (n.empty()) throw ConfigError("empty variant name");
  if (n == "f+p+m+a") return Variant(kFpmaBits);
  for (const auto& p : kPresets) {
    if (p.name == n) return Variant(p.bits);
  }
  uint16_t bits = 0;
  std::string_view rest = n;
  while (!rest.empty()) {
    auto plus = rest.find('+');
    std::string_view tok = rest.substr(0, plus);
    rest = plus == std::string_view::npos ? std::string_view{}
                                          : rest.substr(plus + 1);
    bool matched = false;
    for (const auto& p : kPresets) {
      if (p.name == trim(tok)) {
        bits |= p.bits;
        matched = true;
        break;
      }
    }
    if (!matched) {
      auto f = flag_from_name(tok);
      if (!f) throw ConfigError("unknown variant or flag '" + std::string(tok) + "'");
      bits |= bit(*f);
    }
  }
  return Variant(bits);
}

Variant Variant::with(Flag f) const { return Variant(bits_ | bit(f)); }
Variant Variant::without(Flag f) const {
  return Variant(static_cast<uint16_t>(bits_ & ~bit(f)));
}

bool Variant::any_strong() const { return (bits_ & kStrongBits) != 0; }
bool Variant::all_strong() const {
  return (bits_ & kStrongBits) == kStrongBits;
}

std::string Variant::name() const {
  for (const auto& p : kPresets) {
    if (p.bits == bits_) return std::string(p.name);
  }
  std::string out;
  for (Flag f : all_flags()) {
    if (!has(f)) continue;
    if (!out.empty()) out += '+';
    out += flag_name(f);
  }
  return out;
}

RegionId dram_region(LineAddress addr, const SimConfig& cfg) {
  if (addr.value >= cfg.line_count()) {
    throw std::out_of_range("line address 0x" +
                            [&] {
                              std::ostringstream os;
                              os << std::hex << addr.value;
                              return os.str();
                            }() +
                            " outside DRAM");
  }
  return RegionId{static_cast<uint32_t>(addr.value / cfg.lines_per_region())};
}

LineAddress region_base(RegionId r, const SimConfig& cfg) {
  return LineAddress{uint64_t{r.value} * cfg.lines_per_region()};
}

SetIndex llc_index(LineAddress addr, const SimConfig& cfg, const Variant& v) {
  const uint32_t idx_bits = cfg.llc_index_bits();
  const uint64_t set_mask = (uint64_t{1} << idx_bits) - 1;
  const uint64_t region = dram_region(addr, cfg).value;  // range check
  if (!v.has(Flag::kPart)) return static_cast<SetIndex>(addr.value & set_mask);
  const uint32_t k = cfg.part_region_bits;
  const uint64_t low_bits = idx_bits - k;
  const uint64_t color = region & ((uint64_t{1} << k) - 1);
  const uint64_t low = addr.value & ((uint64_t{1} << low_bits) - 1);
  return static_cast<SetIndex>((color << low_bits) | low);
}

MshrBudget mshr_budget(uint32_t dram_max_inflight, uint32_t n_cores) {
  if (n_cores == 0) throw ConfigError("n_cores must be positive");
  MshrBudget b;
  b.total = dram_max_inflight / 2;
  b.per_core = b.total / n_cores;
  if (b.per_core == 0) {
    throw ConfigError("MSHR budget yields 0 entries per core (d_max=" +
                      std::to_string(dram_max_inflight) +
                      ", cores=" + std::to_string(n_cores) + ")");
  }
  return b;
}

uint32_t effective_llc_mshrs(const SimConfig& cfg, const Variant& v) {
  if (v.has(Flag::kMiss)) return cfg.dram_max_inflight / 2;
  return cfg.llc_mshrs_total;
}

std::vector<std::string> structural_violations(const SimConfig& cfg,
                                               const Variant& v) {
  std::vector<std::string> out;
  auto need = [&](bool ok, std::string msg) {
    if (!ok) out.push_back(std::move(msg));
  };
  need(cfg.n_cores >= 1, "n_cores must be >= 1");
  need(is_pow2(cfg.line_bytes) && cfg.line_bytes >= 8,
       "line_bytes must be a power of two >= 8");
  need(cfg.line_bytes == 64, "line_bytes must be 64 (line payload is 8 words)");
  need(is_pow2(cfg.l1_sets), "l1_sets must be a power of two");
  need(cfg.l1_ways >= 1, "l1_ways must be >= 1");
  need(cfg.l1_mshrs >= 1, "l1_mshrs must be >= 1");
  need(is_pow2(cfg.llc_sets), "llc_sets must be a power of two");
  need(cfg.llc_ways >= 1, "llc_ways must be >= 1");
  need(cfg.llc_pipeline_latency >= 1, "llc_pipeline_latency must be >= 1");
  need(cfg.dram_latency >= 1, "dram_latency must be >= 1");
  need(cfg.dram_max_inflight >= 1, "dram_max_inflight must be >= 1");
  need(cfg.n_regions >= 1, "n_regions must be >= 1");
  if (cfg.n_regions >= 1) {
    need(is_pow2(cfg.n_regions), "n_regions must be a power of two");
    need(cfg.dram_bytes % cfg.n_regions == 0,
         "dram_bytes must be divisible by n_regions");
    need(cfg.region_bytes() >= cfg.page_bytes,
         "region size must be at least one page");
    need(cfg.page_bytes != 0 && cfg.region_bytes() % cfg.page_bytes == 0,
         "region boundaries must not split a page");
    need(cfg.monitor_regions < cfg.n_regions,
         "monitor_regions must leave at least one region");
  }
  need(is_pow2(cfg.dram_bytes), "dram_bytes must be a power of two");
  need(is_pow2(cfg.page_bytes) && cfg.page_bytes >= cfg.line_bytes,
       "page_bytes must be a power of two >= line_bytes");
  need(cfg.issue_window >= 1, "issue_window must be >= 1");
  need(cfg.issue_width >= 1, "issue_width must be >= 1");
  need(cfg.l1_tlb_entries >= 1, "l1_tlb_entries must be >= 1");
  need(cfg.l2_tlb_sets >= 1 && cfg.l2_tlb_ways >= 1, "L2 TLB must be non-empty");
  need(cfg.bp_flush_rate >= 1, "bp_flush_rate must be >= 1");
  need(cfg.l1_flush_rate >= 1, "l1_flush_rate must be >= 1");
  need(cfg.link_fifo_depth >= 1, "link_fifo_depth must be >= 1");
  need(cfg.mailbox_depth >= 1, "mailbox_depth must be >= 1");
  if (v.has(Flag::kPart) && is_pow2(cfg.n_regions) && is_pow2(cfg.llc_sets)) {
    const uint32_t region_bits =
        static_cast<uint32_t>(std::countr_zero(cfg.n_regions));
    need(cfg.part_region_bits <= region_bits,
         "part_region_bits exceeds log2(n_regions)");
    need(cfg.part_region_bits <= cfg.llc_index_bits(),
         "part_region_bits exceeds the LLC index width");
  }
  const uint32_t mshrs = effective_llc_mshrs(cfg, v);
  need(mshrs >= 1, "LLC needs at least one MSHR");
  if (v.has(Flag::kMiss)) {
    need(cfg.miss_banks >= 1 && is_pow2(cfg.miss_banks),
         "miss_banks must be a power of two");
    need(cfg.miss_banks >= 1 && mshrs % cfg.miss_banks == 0,
         "MISS MSHR count must divide evenly into miss_banks");
  }
  if (v.has(Flag::kMshrPartition) || v.has(Flag::kSplitUq) ||
      v.has(Flag::kDupDowngrade)) {
    need(mshrs >= cfg.n_cores, "partitioned MSHRs need >= 1 entry per core");
  }
  return out;
}

std::vector<std::string> validate_config(const SimConfig& cfg,
                                         const Variant& v) {
  auto out = structural_violations(cfg, v);
  if (v.any_strong() && cfg.n_cores >= 1) {
    const uint32_t cap = cfg.dram_max_inflight / 2;
    if (cfg.llc_mshrs_total > cap) {
      out.push_back("MSHRs exceed d_max/2 (llc_mshrs_total=" +
                    std::to_string(cfg.llc_mshrs_total) +
                    ", d_max=" + std::to_string(cfg.dram_max_inflight) + ")");
    }
    if (cap / cfg.n_cores == 0) {
      out.push_back("MSHR budget yields 0 entries per core");
    }
  }
  return out;
}

ConfigFile parse_config(std::string_view text) {
  ConfigFile file;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "variant") {
      file.variant = Variant::parse(value);
      continue;
    }
    const auto& defs = fields();
    auto it = std::find_if(defs.begin(), defs.end(),
                           [&](const FieldDef& d) { return d.name == key; });
    if (it == defs.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    }
    const uint64_t n = parse_number(value, key, line_no);
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(file.config.*member)>;
          if (n > std::numeric_limits<T>::max()) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": value out of range for '" + std::string(key) + "'");
          }
          file.config.*member = static_cast<T>(n);
        },
        it->member);
  }
  return file;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const SimConfig& cfg) {
  std::ostringstream os;
  for (const auto& d : fields()) {
    os << d.name << '=';
    std::visit([&](auto member) { os << cfg.*member; }, d.member);
    os << '\n';
  }
  return os.str();
}

}  // namespace mi6
