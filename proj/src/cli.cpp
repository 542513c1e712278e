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


#include "mi6/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mi6/config.hpp"
#include "mi6/core.hpp"
#include "mi6/harness.hpp"
#include "mi6/machine.hpp"
#include "mi6/monitor.hpp"

namespace mi6 {
namespace {

struct RunSpec {
  std::string config_path;
  std::string variant;
  std::vector<std::string> traces;  // coreN=path
  std::string schedule_path;
  std::optional<uint64_t> seed;
  std::string stats_path;
  std::string log_path;
  uint64_t max_cycles = 100'000'000;
};

struct VerifySpec {
  std::string suite;
  uint64_t ops = 10'000;
  uint64_t seed = 1;
  uint64_t count = 50;
  std::vector<std::string> disable;
  std::string config_path;
};

struct SweepSpec {
  std::string config_path;
  std::string variants = "base";
  std::vector<std::string> traces;
  std::string out_path;
  uint64_t max_cycles = 50'000'000;
  unsigned jobs = 0;
};

// Input errors that are not TraceError or ScheduleError.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SimConfig load_or_default(const std::string& path, std::optional<Variant>* variant = nullptr) {
  if (path.empty()) return SimConfig{};
  ConfigFile f = load_config(path);
  if (variant) *variant = f.variant;
  return f.config;
}

// Writes to `path`, or to `fallback` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
}

std::pair<uint32_t, std::string> parse_trace_arg(const std::string& arg, uint32_t n_cores) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || arg.compare(0, 4, "core") != 0) {
    throw InputError("--trace expects coreN=PATH, got '" + arg + "'");
  }
  const std::string num = arg.substr(4, eq - 4);
  if (num.empty() || !std::all_of(num.begin(), num.end(), ::isdigit) || num.size() > 6) {
    throw InputError("bad core number in '" + arg + "'");
  }
  const uint32_t core = static_cast<uint32_t>(std::stoul(num));
  if (core >= n_cores) {
    throw InputError("core " + num + " out of range (n_cores=" + std::to_string(n_cores) + ")");
  }
  return {core, arg.substr(eq + 1)};
}

int cmd_simulate(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  SimConfig cfg;
  Variant variant;
  try {
    std::optional<Variant> file_variant;
    cfg = load_or_default(spec.config_path, &file_variant);
    if (spec.seed) cfg.seed = *spec.seed;
    variant = !spec.variant.empty() ? Variant::parse(spec.variant)
                                    : file_variant.value_or(Variant::base());
    const auto problems = validate_config(cfg, variant);
    if (!problems.empty()) throw ConfigError(problems.front());
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  MachineOptions opts;
  opts.event_log = !spec.log_path.empty();
  try {
    std::map<uint32_t, Trace> traces;
    for (const auto& arg : spec.traces) {
      auto [core, path] = parse_trace_arg(arg, cfg.n_cores);
      if (traces.count(core)) throw InputError("two traces for core " + std::to_string(core));
      Trace t = load_trace(path);
      check_trace_range(t, cfg);
      traces[core] = std::move(t);
    }
    std::vector<ScheduleEvent> events;
    if (!spec.schedule_path.empty()) {
      events = load_schedule(spec.schedule_path);
      for (const auto& e : events) {
        if (e.op == ScheduleEvent::Op::kSchedule) check_trace_range(e.trace, cfg);
        if (e.op == ScheduleEvent::Op::kSchedule && traces.count(e.core)) {
          throw InputError("core " + std::to_string(e.core) +
                           " has both a --trace and a scheduled domain");
        }
      }
    }
    if (traces.empty() && events.empty()) throw InputError("nothing to run: no traces given");

    Machine m(cfg, variant, opts);
    Monitor monitor(m);
    monitor.load(std::move(events));
    const RegionBits all(cfg.n_regions, true);
    for (auto& [core, t] : traces) m.start(core, std::move(t), all);
    const bool finished = m.run(spec.max_cycles);
    if (!finished) {
      err << "warning: cycle limit " << spec.max_cycles << " reached before all traces finished\n";
    }

    std::string csv = "# schema=1\n" + stats_csv_header();
    for (const auto& row : m.stats_rows()) csv += stats_csv_row(row);
    emit(spec.stats_path, csv, out);
    if (opts.event_log) emit(spec.log_path, m.log().text(), out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TraceError& e) {
    err << "trace error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ScheduleError& e) {
    err << "schedule error: " << e.what() << "\n";
    return kExitInput;
  } catch (const MonitorError& e) {
    err << "monitor error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SimError& e) {
    err << "invariant violated at " << e.what() << "\n";
    return kExitSim;
  }
  return kExitOk;
}

// The SECURE variant with the named mechanisms removed. "sizing" stands
// for the MSHR sizing rule.
WitnessSetup mutated_setup(const std::vector<std::string>& disable) {
  WitnessSetup s;
  for (const auto& name : disable) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), ::tolower);
    if (n == "sizing" || n == "mshr_sizing") {
      s.correct_sizing = false;
      continue;
    }
    const auto f = flag_from_name(n);
    if (!f) throw ConfigError("unknown flag '" + name + "'");
    s.secure = s.secure.without(*f);
  }
  return s;
}

int verify_witnesses(const WitnessSetup& setup, std::ostream& out, std::ostream& err) {
  std::vector<WitnessResult> rows(all_channels().size());
  parallel_for(rows.size(), [&](size_t i) { rows[i] = channel_witness(all_channels()[i], setup); });
  out << "channel,insecure_diverges,secure_diverges,result\n";
  const WitnessResult* first_bad = nullptr;
  for (const auto& r : rows) {
    out << channel_name(r.channel) << ',' << (r.insecure_diverges ? "true" : "false") << ','
        << (r.secure_diverges ? "true" : "false") << ',' << (r.pass() ? "PASS" : "FAIL") << '\n';
    if (!r.pass() && !first_bad) first_bad = &r;
  }
  if (!first_bad) return kExitOk;
  err << "first failing channel: " << channel_name(first_bad->channel) << " (insecure "
      << describe(first_bad->insecure_report) << "; secure " << describe(first_bad->secure_report)
      << ")\n";
  return kExitConfig;
}

int verify_noninterference(const VerifySpec& spec, const WitnessSetup& setup, std::ostream& out,
                           std::ostream& err) {
  SimConfig cfg = independence_config();
  if (!setup.correct_sizing) cfg.llc_mshrs_total = cfg.dram_max_inflight;
  std::vector<IndependenceCase> cases(spec.count);
  parallel_for(cases.size(),
               [&](size_t i) { cases[i] = independence_case(cfg, setup.secure, spec.seed + i); });
  size_t bad = 0;
  for (const auto& c : cases) {
    out << "seed " << c.seed << ": " << describe(c.report) << '\n';
    if (!c.report.equal && bad++ == 0) {
      err << "first failing case: seed " << c.seed << " " << describe(c.report) << '\n';
    }
  }
  out << cases.size() - bad << "/" << cases.size() << " pairs equal\n";
  return bad == 0 ? kExitOk : kExitConfig;
}

int verify_coherence(const VerifySpec& spec, const WitnessSetup& setup, std::ostream& out,
                     std::ostream& err) {
  struct Run {
    Variant v;
    uint32_t cores;
  };
  const std::vector<Run> runs = {{Variant::base(), 2}, {setup.secure, 3}, {setup.secure, 4}};
  const uint64_t per_run = std::max<uint64_t>(1, spec.ops / runs.size());
  std::vector<CoherenceReport> reps(runs.size());
  parallel_for(runs.size(), [&](size_t i) {
    reps[i] = coherence_check(runs[i].v, runs[i].cores,
                              std::max<uint64_t>(1, per_run / runs[i].cores), spec.seed + i);
  });
  int rc = kExitOk;
  for (size_t i = 0; i < runs.size(); ++i) {
    const auto& r = reps[i];
    out << runs[i].v.name() << " cores=" << runs[i].cores << " ops=" << r.ops
        << " loads_checked=" << r.loads_checked << " mismatches=" << r.mismatches
        << " final_mismatches=" << r.final_mismatches << '\n';
    if ((r.mismatches || r.final_mismatches) && rc == kExitOk) {
      err << "first failing case: " << runs[i].v.name() << " cores=" << runs[i].cores << ": "
          << (r.first.empty() ? "final memory differs" : r.first) << '\n';
      rc = kExitConfig;
    }
  }
  return rc;
}

int verify_purge(const VerifySpec& spec, std::ostream& out, std::ostream& err) {
  const SimConfig cfg = load_or_default(spec.config_path);
  const PurgeReport r = purge_check(cfg, spec.seed);
  const uint64_t expect = Core::purge_duration(cfg);
  out << "purge stall " << r.duration << " cycles (expected " << expect << "), state "
      << (r.state_equal ? "matches" : "differs from") << " a fresh core\n";
  if (r.duration == expect && r.state_equal) return kExitOk;
  err << "first failing case: " << (r.state_equal ? "stall length" : "post-purge state") << '\n';
  return kExitConfig;
}

int cmd_verify(const VerifySpec& spec, std::ostream& out, std::ostream& err) {
  try {
    const WitnessSetup setup = mutated_setup(spec.disable);
    if (spec.suite == "witnesses") return verify_witnesses(setup, out, err);
    if (spec.suite == "noninterference") return verify_noninterference(spec, setup, out, err);
    if (spec.suite == "coherence") return verify_coherence(spec, setup, out, err);
    if (spec.suite == "purge") return verify_purge(spec, out, err);
    err << "unknown suite '" << spec.suite << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SimError& e) {
    err << "invariant violated at " << e.what() << "\n";
    return kExitSim;
  }
}

int cmd_sweep(const SweepSpec& spec, std::ostream& out, std::ostream& err) {
  SimConfig cfg;
  std::vector<Variant> variants;
  try {
    cfg = load_or_default(spec.config_path);
    std::stringstream ss(spec.variants);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) variants.push_back(Variant::parse(name));
    }
    if (variants.empty()) throw ConfigError("no variants given");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    if (spec.traces.empty()) throw InputError("empty trace set");
    std::vector<NamedTrace> traces;
    for (const auto& path : spec.traces) {
      Trace t = load_trace(path);
      check_trace_range(t, cfg);
      traces.push_back({std::filesystem::path(path).stem().string(), std::move(t)});
    }
    std::stable_sort(traces.begin(), traces.end(),
                     [](const NamedTrace& a, const NamedTrace& b) { return a.name < b.name; });
    for (const auto& v : variants) {
      const auto problems = structural_violations(sized_for(cfg, v), v);
      if (!problems.empty()) throw ConfigError(problems.front());
    }
    const auto rows = overhead_report(cfg, traces, variants, spec.max_cycles, spec.jobs);
    emit(spec.out_path, overhead_csv(rows), out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TraceError& e) {
    err << "trace error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SimError& e) {
    err << "invariant violated at " << e.what() << "\n";
    return kExitSim;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mi6sim: cycle-level model of a partitioned, purge-on-switch memory hierarchy"};
  app.require_subcommand(1);

  RunSpec run;
  auto* sim = app.add_subcommand("simulate", "run traces and write per-core stats");
  sim->add_option("--config", run.config_path, "config file (key=value)");
  sim->add_option("--variant", run.variant, "variant name or flag list, e.g. secure, part+arb");
  sim->add_option("--trace", run.traces, "coreN=PATH, repeatable");
  sim->add_option("--schedule", run.schedule_path, "monitor schedule file");
  sim->add_option("--seed", run.seed, "overrides the config seed");
  sim->add_option("--stats", run.stats_path, "stats CSV output (default stdout)");
  sim->add_option("--log", run.log_path, "write the event log here");
  sim->add_option("--max-cycles", run.max_cycles, "cycle limit");

  VerifySpec ver;
  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("--suite", ver.suite, "noninterference | witnesses | coherence | purge")
      ->required()
      ->check(CLI::IsMember({"noninterference", "witnesses", "coherence", "purge"}));
  verify->add_option("--ops", ver.ops, "coherence: total operations");
  verify->add_option("--seed", ver.seed, "base seed");
  verify->add_option("--count", ver.count, "noninterference: number of random pairs");
  verify->add_option("--disable", ver.disable,
                     "remove a mechanism from SECURE (flag name, or 'sizing'); repeatable");
  verify->add_option("--config", ver.config_path, "purge: config file");

  SweepSpec sw;
  auto* sweep = app.add_subcommand("sweep", "variants x traces overhead table");
  sweep->add_option("--config", sw.config_path, "config file");
  sweep->add_option("--variants", sw.variants, "comma-separated variant names");
  sweep->add_option("--trace", sw.traces, "trace file, repeatable");
  sweep->add_option("--out", sw.out_path, "CSV output (default stdout)");
  sweep->add_option("--max-cycles", sw.max_cycles, "cycle limit per run");
  sweep->add_option("--jobs", sw.jobs, "worker threads (0: one per hardware thread)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (*sim) return cmd_simulate(run, out, err);
  if (*verify) return cmd_verify(ver, out, err);
  return cmd_sweep(sw, out, err);
}

}  // namespace mi6
