// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cdc/allocation.hpp"
#include "cdc/analytics.hpp"
#include "cdc/coder.hpp"
#include "cdc/runtime.hpp"
#include "json.hpp"

namespace cdc::cli {
namespace fs = std::filesystem;

namespace {

// Exit 3 without an exception: the run finished but violated its contract.
struct Violation : Error {
  using Error::Error;
};

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(std::string(what) + ": '" + text + "' is not an unsigned integer");
  }
  return v;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CDC_SEED"); env && *env) return parse_u64(env, "CDC_SEED");
  return 0;
}

ModelSpec resolve_model(const AllocationFile& alloc, const fs::path& alloc_path, const std::string& model_flag) {
  fs::path p;
  if (!model_flag.empty()) {
    p = model_flag;
  } else if (!alloc.model_file.empty()) {
    p = alloc_path.parent_path() / alloc.model_file;
  } else {
    throw InvalidArgument("allocation has no model_file; pass --model");
  }
  auto model = load_model_file(p);
  if (model.name != alloc.model) {
    throw AllocationInvalid("allocation is for model '" + alloc.model + "' but " + p.string() + " describes '" +
                            model.name + "'");
  }
  return model;
}

enum class Dtype { F32, F64 };

Dtype resolve_dtype(const std::string& flag, const std::string& weights_path) {
  if (flag == "f32") return Dtype::F32;
  if (flag == "f64") return Dtype::F64;
  if (!flag.empty()) throw ParseError("--dtype must be f32 or f64");
  if (!weights_path.empty()) {
    if (auto tag = weight_file_dtype(weights_path)) return *tag == 0 ? Dtype::F32 : Dtype::F64;
  }
  return Dtype::F32;
}

template <typename T>
WeightStore<T> obtain_weights(const ModelSpec& model, const std::string& path, std::uint64_t seed) {
  auto store = path.empty() ? random_weights<T>(model, seed) : load_weights<T>(path);
  validate_weights(model, store);
  return store;
}

template <typename T>
Tensor3<T> obtain_input(const ModelSpec& model, const std::string& path, std::uint64_t seed) {
  const Shape s = model.input_shape();
  std::vector<T> values;
  values.reserve(s.elements());
  if (path.empty()) {
    auto rng = make_stream(seed, {0x1a9u});
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < s.elements(); ++i) values.push_back(static_cast<T>(u(rng)));
  } else {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input " + path);
    double v = 0;
    while (in >> v) values.push_back(static_cast<T>(v));
    if (!in.eof()) throw ParseError("input " + path + ": non-numeric token");
    if (values.size() != s.elements()) {
      throw ParseError("input " + path + " has " + std::to_string(values.size()) + " values, model expects " +
                       std::to_string(s.elements()));
    }
  }
  return Tensor3<T>(s.h, s.w, s.c, std::move(values));
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// encode -------------------------------------------------------------------

struct EncodeArgs {
  std::string model, alloc, weights, out, weights_out, dtype;
  bool code = false;
  std::size_t redundancy = 1;
  std::optional<std::uint64_t> seed;
};

template <typename T>
int encode_typed(const EncodeArgs& a, std::ostream& out) {
  const auto model = load_model_file(a.model);
  auto alloc = load_allocation(a.alloc);
  if (alloc.model != model.name) {
    throw AllocationInvalid("allocation is for model '" + alloc.model + "', not '" + model.name + "'");
  }
  validate_allocation(alloc, model);
  auto weights = obtain_weights<T>(model, a.weights, resolve_seed(a.seed));

  if (a.code) {
    std::uint32_t next_id = 0;
    for (auto id : alloc.required_devices()) next_id = std::max(next_id, id + 1);
    for (const auto& r : alloc.roster) next_id = std::max(next_id, r.id + 1);
    for (auto& stage : alloc.stages) {
      if (!stage.is_split() || stage.coded) continue;
      const auto& layer = model.layer(stage.layers.front());
      const auto plan = plan_split(layer, *stage.method, stage.devices.size());
      if (!suitability(*stage.method).suitable_for_cdc) {
        // Re-raised by encode() below with the table row in the message.
        encode<T>(plan, weights, default_groups(plan.n, 1));
      }
      CodedAlloc coded;
      for (const auto& g : default_groups(plan.n, a.redundancy)) {
        std::vector<std::uint32_t> members;
        for (auto d : g) members.push_back(stage.devices[d]);
        coded.groups.push_back(std::move(members));
        coded.devices.push_back(next_id);
        alloc.roster.push_back({next_id, ""});
        ++next_id;
      }
      stage.coded = std::move(coded);
    }
    validate_allocation(alloc, model);
  }

  out << "model " << model.name << ", " << alloc.stages.size() << " stages\n";
  for (std::size_t i = 0; i < alloc.stages.size(); ++i) {
    const auto& stage = alloc.stages[i];
    out << "stage " << i << " layer " << stage.layers.front() << ": ";
    if (!stage.is_split()) {
      out << "whole on device " << stage.devices.front() << "\n";
      continue;
    }
    const auto n = stage.devices.size();
    out << to_string(*stage.method) << " over " << n << " devices";
    if (stage.coded) {
      const auto plan = plan_split(model.layer(stage.layers.front()), *stage.method, n);
      const auto coded = encode<T>(plan, weights, local_groups(stage));
      store_coded_blocks(coded, weights);
      const auto g = stage.coded->devices.size();
      out << " + " << g << " coded, hardware cost " << fmt(hardware_cost(n, g), 3);
    }
    out << "\n";
  }

  save_allocation(alloc, a.out);
  fs::path wout = a.weights_out;
  if (wout.empty()) wout = fs::path(a.out).replace_extension(".cdcw");
  save_weights(weights, wout);
  out << "wrote " << a.out << " and " << wout.string() << "\n";
  return kOk;
}

// run ----------------------------------------------------------------------

struct RunArgs {
  std::string alloc, model, weights, input, latency = "det:1", failures, policy = "decode_asap", out, dtype;
  std::vector<std::string> fallbacks, links;
  std::size_t requests = 10;
  double threshold_ms = 0.0, ms_per_kib = 0.0, detection_ms = kDefaultDetectionMs, ns_per_flop = kDefaultNsPerFlop;
  std::optional<std::uint64_t> seed;
  bool no_verify = false;
};

LatencyModel build_latency(const std::string& base, const std::vector<std::string>& links, double ms_per_kib) {
  LatencyModel lm;
  lm.base = parse_latency(base, fs::current_path());
  lm.ms_per_kib = ms_per_kib;
  for (const auto& l : links) {
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError("--link expects DEVICE=SPEC, got '" + l + "'");
    const auto dev = parse_u64(l.substr(0, eq), "--link device");
    lm.links[static_cast<std::uint32_t>(dev)] = parse_latency(l.substr(eq + 1), fs::current_path());
  }
  lm.validate();
  return lm;
}

template <typename T>
int run_typed(const RunArgs& a, std::ostream& out) {
  if (a.requests == 0) throw InvalidArgument("--requests must be >= 1");
  const std::uint64_t seed = resolve_seed(a.seed);
  std::vector<AllocationFile> catalog;
  catalog.push_back(load_allocation(a.alloc));
  const auto model = resolve_model(catalog.front(), a.alloc, a.model);
  for (const auto& f : a.fallbacks) catalog.push_back(load_allocation(f));
  for (auto& c : catalog) validate_allocation(c, model);
  std::stable_sort(catalog.begin() + 1, catalog.end(), [](const AllocationFile& x, const AllocationFile& y) {
    return x.required_devices().size() > y.required_devices().size();
  });

  const auto weights = obtain_weights<T>(model, a.weights, seed);
  const auto input = obtain_input<T>(model, a.input, seed);
  const auto latency = build_latency(a.latency, a.links, a.ms_per_kib);
  const auto failures = parse_failures(a.failures);

  CoordinatorConfig cfg;
  cfg.policy = parse_policy(a.policy);
  cfg.threshold_ms = a.threshold_ms;
  cfg.seed = seed;
  cfg.detection_ms = a.detection_ms;
  cfg.ns_per_flop = a.ns_per_flop;
  cfg.verify = !a.no_verify;
  cfg.validate();

  const auto report = run_inference<T>(model, catalog, weights, input, latency, failures, cfg, a.requests);

  const auto& s = report.summary;
  out << "requests " << report.requests.size() << ", completed " << s.count << ", lost " << report.lost_requests
      << "\n";
  if (s.count > 0) out << "latency mean " << fmt(s.mean) << " ms, p99 " << fmt(s.p99) << " ms\n";
  out << "decode events " << report.decode_events << ", stage timeouts " << report.stage_timeouts
      << ", fallback switches " << report.fallback_switches << ", late partials " << report.late_partials
      << ", output mismatches " << report.output_mismatches << "\n";
  if (report.fallback_switches > 0) {
    const auto [before, after] = split_at_fallback(report);
    if (!before.empty() && !after.empty()) out << "slowdown after fallback " << fmt(slowdown(before, after)) << "x\n";
  }

  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "report.json", to_json(report));
    write_text(fs::path(a.out) / "latency.csv", latency_csv(report));
    out << "wrote " << (fs::path(a.out) / "report.json").string() << "\n";
  }
  if (report.output_mismatches > 0) throw Violation("output mismatches against the single-device reference");
  return report.stage_timeouts > 0 ? kTimeout : kOk;
}

// campaign -----------------------------------------------------------------

struct CampaignArgs {
  std::string alloc, model, sweep = "devices=2..4", latency = "lognorm:3.5,1", out, dtype;
  bool policy_compare = false, no_verify = false;
  std::size_t requests = 100;
  double ns_per_flop = kDefaultNsPerFlop, ms_per_kib = 0.0;
  std::optional<std::uint64_t> seed;
};

std::pair<std::size_t, std::size_t> parse_sweep(const std::string& text) {
  const std::string prefix = "devices=";
  if (text.rfind(prefix, 0) != 0) throw ParseError("--sweep expects devices=A..B");
  const auto body = text.substr(prefix.size());
  const auto dots = body.find("..");
  std::size_t lo = 0, hi = 0;
  if (dots == std::string::npos) {
    lo = hi = parse_u64(body, "--sweep");
  } else {
    lo = parse_u64(body.substr(0, dots), "--sweep");
    hi = parse_u64(body.substr(dots + 2), "--sweep");
  }
  if (lo > hi) throw ParseError("--sweep range is empty");
  if (lo < 2) throw InvalidArgument("--sweep needs at least 2 devices per stage");
  return {lo, hi};
}

// Under decode-as-soon-as-possible with one group, a complete coded stage is
// collected exactly when the n-th of its n+1 partials arrives.
bool order_statistic_holds(const RunReport& report) {
  for (const auto& q : report.requests) {
    for (const auto& st : q.stages) {
      if (st.arrivals.size() < 2 || !st.complete) continue;
      const bool coded = std::any_of(st.arrivals.begin(), st.arrivals.end(), [](auto& x) { return x.coded; });
      if (!coded) continue;
      std::vector<double> t;
      for (const auto& x : st.arrivals) {
        if (x.at_ms) t.push_back(*x.at_ms);
      }
      if (t.size() != st.arrivals.size()) continue;
      std::sort(t.begin(), t.end());
      const double expect = t[t.size() - 2];
      if (std::abs(st.collected_ms - expect) > 1e-9 * std::max(1.0, expect)) return false;
    }
  }
  return true;
}

template <typename T>
int campaign_typed(const CampaignArgs& a, std::ostream& out) {
  const auto [lo, hi] = parse_sweep(a.sweep);
  if (a.requests == 0) throw InvalidArgument("--requests must be >= 1");
  const std::uint64_t seed = resolve_seed(a.seed);
  const auto alloc = load_allocation(a.alloc);
  const auto model = resolve_model(alloc, a.alloc, a.model);
  const auto weights = obtain_weights<T>(model, "", seed);
  const auto input = obtain_input<T>(model, "", seed);
  const auto latency = build_latency(a.latency, {}, a.ms_per_kib);

  std::string csv = "n,wait_all_mean_ms,decode_asap_mean_ms,improvement_pct,wait_all_p99_ms,decode_asap_p99_ms,"
                    "order_stat_ok\n";
  bool all_ok = true;
  out << std::setw(3) << "n" << std::setw(14) << "wait_all" << std::setw(14) << "decode_asap" << std::setw(10)
      << "gain%" << "  order-stat\n";
  for (std::size_t n = lo; n <= hi; ++n) {
    const auto plain = uniform_allocation(model, n, false);
    const auto coded = uniform_allocation(model, n, true);
    CoordinatorConfig cfg;
    cfg.seed = seed;
    cfg.ns_per_flop = a.ns_per_flop;
    cfg.verify = !a.no_verify;
    cfg.policy = Policy::WaitAll;
    const auto base = run_inference<T>(model, plain, weights, input, latency, FailureModel{}, cfg, a.requests);
    cfg.policy = Policy::DecodeAsap;
    const auto fast = run_inference<T>(model, coded, weights, input, latency, FailureModel{}, cfg, a.requests);

    const double gain = 100.0 * (base.summary.mean - fast.summary.mean) / base.summary.mean;
    const bool order_ok = order_statistic_holds(fast);
    const bool ok = order_ok && gain >= 0.0 && base.output_mismatches == 0 && fast.output_mismatches == 0 &&
                    base.stage_timeouts == 0 && fast.stage_timeouts == 0;
    all_ok = all_ok && ok;
    csv += std::to_string(n) + "," + fmt(base.summary.mean, 6) + "," + fmt(fast.summary.mean, 6) + "," +
           fmt(gain, 4) + "," + fmt(base.summary.p99, 6) + "," + fmt(fast.summary.p99, 6) + "," +
           (order_ok ? "1" : "0") + "\n";
    out << std::setw(3) << n << std::setw(14) << fmt(base.summary.mean) << std::setw(14) << fmt(fast.summary.mean)
        << std::setw(10) << fmt(gain, 1) << "  " << (order_ok ? "ok" : "VIOLATED") << "\n";
  }
  if (!a.out.empty()) {
    write_text(a.out, csv);
    out << "wrote " << a.out << "\n";
  }
  if (!all_ok) throw Violation("campaign invariant violated");
  return kOk;
}

// coverage / decodability / report ------------------------------------------

struct CoverageArgs {
  std::string topology, out, csv;
  std::size_t budget = 0;
};

int coverage_cmd(const CoverageArgs& a, std::ostream& out) {
  const auto topo = load_topology(a.topology);
  const std::vector<CoverageReport> rows = {coverage(topo, Scheme::CdcPlusTwoMR, a.budget),
                                            coverage(topo, Scheme::TwoMR, a.budget)};
  out << "topology " << (topo.name.empty() ? a.topology : topo.name) << ": " << topo.stages.size() << " stages, "
      << topo.total_devices() << " devices, budget " << a.budget << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(9) << to_string(r.scheme) << std::right << " covers " << r.covered << "/"
        << r.total << " (" << fmt(100.0 * r.fraction, 1) << "%)\n";
  }
  if (!a.out.empty()) {
    auto doc = nlohmann::ordered_json::array();
    for (const auto& r : rows) doc.push_back(nlohmann::ordered_json::parse(to_json(r)));
    write_text(a.out, doc.dump(2) + "\n");
  }
  if (!a.csv.empty()) write_text(a.csv, coverage_csv(rows));
  return kOk;
}

std::vector<Group> parse_groups(const std::string& text) {
  std::vector<Group> groups;
  std::stringstream all(text);
  std::string part;
  while (std::getline(all, part, ';')) {
    Group g;
    std::stringstream ps(part);
    std::string tok;
    while (std::getline(ps, tok, ',')) {
      tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
      if (!tok.empty()) g.push_back(parse_u64(tok, "--groups"));
    }
    groups.push_back(std::move(g));
  }
  if (groups.empty()) throw ParseError("--groups is empty");
  return groups;
}

struct DecodabilityArgs {
  std::size_t n = 0, max_failures = 2;
  std::string groups, out, format = "json";
  std::optional<std::size_t> redundancy;
  std::uint64_t cap = kDefaultPatternCap;
};

int decodability_cmd(const DecodabilityArgs& a, std::ostream& out) {
  if (!a.groups.empty() && a.redundancy) throw InvalidArgument("give either --groups or --redundancy");
  const auto groups = a.groups.empty() ? default_groups(a.n, a.redundancy.value_or(1)) : parse_groups(a.groups);
  const auto r = decodability(a.n, groups, a.max_failures, a.cap);
  out << "n " << r.n << ", groups";
  for (const auto& g : r.groups) {
    out << " {";
    for (std::size_t i = 0; i < g.size(); ++i) out << (i ? "," : "") << g[i];
    out << "}";
  }
  out << "\nfailures  patterns  recoverable  fraction\n";
  for (const auto& row : r.rows) {
    out << std::setw(8) << row.failures << std::setw(10) << row.total << std::setw(13) << row.recoverable
        << std::setw(10) << fmt(row.fraction, 4) << "\n";
  }
  if (!a.out.empty()) emit_report(r, parse_report_format(a.format), a.out);
  return kOk;
}

struct ReportArgs {
  std::string report, what = "latency", format = "csv", out;
  double bin = 10.0;
};

int report_cmd(const ReportArgs& a, std::ostream& out) {
  std::ifstream in(a.report);
  if (!in) throw IoError("cannot open report " + a.report);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(a.report + ": " + e.what());
  }
  std::vector<double> samples;
  try {
    for (const auto& q : doc.at("requests")) {
      if (a.what == "latency") {
        if (q.at("completed").get<bool>()) samples.push_back(q.at("latency_ms").get<double>());
      } else if (a.what == "arrivals") {
        for (const auto& st : q.at("stages")) {
          const double t0 = st.at("start_ms").get<double>();
          for (const auto& x : st.at("arrivals")) {
            if (!x.at("at_ms").is_null()) samples.push_back(x.at("at_ms").get<double>() - t0);
          }
        }
      } else {
        throw ParseError("--what must be latency or arrivals");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(a.report + ": " + e.what());
  }
  const auto h = histogram(samples, a.bin);
  out << a.what << ": " << h.total << " samples, mean " << fmt(h.mean) << " ms, p50 " << fmt(h.p50) << ", p90 "
      << fmt(h.p90) << ", p99 " << fmt(h.p99) << " (" << h.bins.size() << " bins of " << fmt(a.bin, 2) << " ms)\n";
  const auto format = parse_report_format(a.format);
  if (a.out.empty()) {
    out << (format == ReportFormat::Csv ? histogram_csv(h) : to_json(h));
  } else {
    emit_report(h, format, a.out);
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coded distributed inference over model-parallel splits", "cdc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cdc 0.1.0");

  EncodeArgs ea;
  auto* enc = app.add_subcommand("encode", "add coded devices to an allocation and precompute their weights");
  enc->add_option("model", ea.model, "model descriptor (JSON)")->required()->check(CLI::ExistingFile);
  enc->add_option("alloc", ea.alloc, "allocation (JSON)")->required()->check(CLI::ExistingFile);
  enc->add_option("--weights", ea.weights, "weight file; random weights when omitted")->check(CLI::ExistingFile);
  enc->add_flag("--code", ea.code, "attach coded devices to every split stage that lacks them");
  enc->add_option("--redundancy", ea.redundancy, "coded devices per stage (1 or 2)")->check(CLI::Range(1, 2));
  enc->add_option("--out", ea.out, "output allocation")->required();
  enc->add_option("--weights-out", ea.weights_out, "output weight file (default: --out with .cdcw)");
  enc->add_option("--seed", ea.seed, "seed for random weights (default $CDC_SEED or 0)");
  enc->add_option("--dtype", ea.dtype, "f32 or f64");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "simulate inference requests on an allocation");
  run->add_option("alloc", ra.alloc, "primary allocation")->required()->check(CLI::ExistingFile);
  run->add_option("--model", ra.model, "model descriptor (default: the allocation's model_file)");
  run->add_option("--weights", ra.weights, "weight file; random weights when omitted")->check(CLI::ExistingFile);
  run->add_option("--fallback", ra.fallbacks, "fallback allocation (repeatable)")->check(CLI::ExistingFile);
  run->add_option("--input", ra.input, "input values, whitespace separated, HWC order")->check(CLI::ExistingFile);
  run->add_option("--requests", ra.requests, "number of requests");
  run->add_option("--latency", ra.latency, "link latency: det:X | uniform:A..B | lognorm:MU,SIGMA | emp:FILE");
  run->add_option("--link", ra.links, "per-device link override DEVICE=SPEC (repeatable)");
  run->add_option("--ms-per-kib", ra.ms_per_kib, "transfer time per KiB of frame");
  run->add_option("--failures", ra.failures, "dev:perm@T;dev:down@A..B;dev:drop@P");
  run->add_option("--policy", ra.policy, "wait_all | decode_asap | threshold");
  run->add_option("--threshold", ra.threshold_ms, "threshold (ms) for the threshold policy");
  run->add_option("--seed", ra.seed, "simulation seed (default $CDC_SEED or 0)");
  run->add_option("--detection-ms", ra.detection_ms, "silence before a device is declared failed");
  run->add_option("--ns-per-flop", ra.ns_per_flop, "simulated compute speed");
  run->add_option("--out", ra.out, "directory for report.json and latency.csv");
  run->add_flag("--no-verify", ra.no_verify, "skip the single-device reference check");
  run->add_option("--dtype", ra.dtype, "f32 or f64");

  CampaignArgs ca;
  auto* camp = app.add_subcommand("campaign", "wait-for-all versus coded decode-as-soon-as-possible sweep");
  camp->add_option("alloc", ca.alloc, "allocation naming the model")->required()->check(CLI::ExistingFile);
  camp->add_option("--model", ca.model, "model descriptor (default: the allocation's model_file)");
  camp->add_option("--sweep", ca.sweep, "devices=A..B (per stage)");
  camp->add_flag("--policy-compare", ca.policy_compare, "compare policies (the only campaign mode)");
  camp->add_option("--requests", ca.requests, "requests per configuration");
  camp->add_option("--latency", ca.latency, "link latency distribution");
  camp->add_option("--ms-per-kib", ca.ms_per_kib, "transfer time per KiB of frame");
  camp->add_option("--seed", ca.seed, "seed (default $CDC_SEED or 0)");
  camp->add_option("--ns-per-flop", ca.ns_per_flop, "simulated compute speed");
  camp->add_option("--out", ca.out, "CSV output");
  camp->add_flag("--no-verify", ca.no_verify, "skip the single-device reference check");
  camp->add_option("--dtype", ca.dtype, "f32 or f64");

  CoverageArgs cva;
  auto* cov = app.add_subcommand("coverage", "single-failure coverage of 2MR and CDC+2MR under a device budget");
  cov->add_option("topology", cva.topology, "topology (JSON)")->required()->check(CLI::ExistingFile);
  cov->add_option("--budget", cva.budget, "extra devices available")->required();
  cov->add_option("--out", cva.out, "JSON output");
  cov->add_option("--csv", cva.csv, "CSV output");

  DecodabilityArgs da;
  auto* dec = app.add_subcommand("decodability", "enumerate failure patterns against a code");
  dec->add_option("--n", da.n, "base devices")->required();
  dec->add_option("--groups", da.groups, "groups as '0,1;1,2'");
  dec->add_option("--redundancy", da.redundancy, "default groups with 1 or 2 coded devices");
  dec->add_option("--max-failures", da.max_failures, "largest failure count to enumerate");
  dec->add_option("--cap", da.cap, "maximum number of patterns");
  dec->add_option("--format", da.format, "csv or json");
  dec->add_option("--out", da.out, "output file");

  ReportArgs rpa;
  auto* rep = app.add_subcommand("report", "histogram of a run report");
  rep->add_option("report", rpa.report, "report.json from `cdc run`")->required()->check(CLI::ExistingFile);
  rep->add_option("--bin", rpa.bin, "bin width in ms");
  rep->add_option("--what", rpa.what, "latency or arrivals");
  rep->add_option("--format", rpa.format, "csv or json");
  rep->add_option("--out", rpa.out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "cdc 0.1.0\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  }

  try {
    if (*enc) {
      return resolve_dtype(ea.dtype, ea.weights) == Dtype::F64 ? encode_typed<double>(ea, out)
                                                               : encode_typed<float>(ea, out);
    }
    if (*run) {
      return resolve_dtype(ra.dtype, ra.weights) == Dtype::F64 ? run_typed<double>(ra, out)
                                                               : run_typed<float>(ra, out);
    }
    if (*camp) {
      return resolve_dtype(ca.dtype, "") == Dtype::F64 ? campaign_typed<double>(ca, out)
                                                       : campaign_typed<float>(ca, out);
    }
    if (*cov) return coverage_cmd(cva, out);
    if (*dec) return decodability_cmd(da, out);
    if (*rep) return report_cmd(rpa, out);
  } catch (const UnsuitableMethod& e) {
    err << "cdc: " << e.what() << "\n";
    return kUnsuitable;
  } catch (const StageTimeout& e) {
    err << "cdc: " << e.what() << "\n";
    return kTimeout;
  } catch (const Violation& e) {
    err << "cdc: " << e.what() << "\n";
    return kTimeout;
  } catch (const ExplosionGuard& e) {
    err << "cdc: " << e.what() << "\n";
    return kExplosion;
  } catch (const ParseError& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const IoError& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const InvalidArgument& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const AllocationInvalid& e) {
    err << "cdc: invalid allocation: " << e.what() << "\n";
    return kBadInput;
  } catch (const FormatVersionError& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const ChecksumError& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const TooManyDevices& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const IncompatibleMethod& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const UnknownDevice& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const ShapeMismatch& e) {
    err << "cdc: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    err << "cdc: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace cdc::cli
