#include "privbcast/cli/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace privbcast::cli {

using nlohmann::json;

namespace {

constexpr FieldInfo kFields[] = {
    {"n", FieldType::kUnsigned, "node count"},
    {"topology", FieldType::kString, "regular | erdos_renyi | tree | line"},
    {"degree", FieldType::kUnsigned, "degree for regular graphs and trees"},
    {"p", FieldType::kDouble, "edge probability for erdos_renyi"},
    {"depth", FieldType::kUnsigned, "tree depth"},
    {"mode", FieldType::kString, "full | flood_only | diffusion_only | dc_only"},
    {"k", FieldType::kUnsigned, "minimum DC group size"},
    {"overlap", FieldType::kUnsigned, "groups per node"},
    {"d_max", FieldType::kDepth, "diffusion rounds, auto or coverage"},
    {"round_interval", FieldType::kUnsigned, "ticks between DC rounds"},
    {"length_announcement", FieldType::kBool, "announce lengths in 8-byte base rounds"},
    {"dc_frame_size", FieldType::kUnsigned, "fixed DC frame without announcements"},
    {"alpha", FieldType::kString, "fallback | obfuscating"},
    {"adversary_fraction", FieldType::kDouble, "share of nodes controlled by the adversary"},
    {"estimator", FieldType::kString, "first_timestamp | dc_group"},
    {"honest_origin_groups", FieldType::kBool, "keep adversaries out of the origin's groups"},
    {"messages", FieldType::kUnsigned, "messages per run"},
    {"message_size", FieldType::kUnsigned, "message bytes"},
    {"event_cap", FieldType::kUnsigned, "abort a run after this many events"},
    {"trials", FieldType::kUnsigned, "runs; run i uses seed + i"},
    {"seed", FieldType::kUnsigned, "master seed"},
    {"fixed_topology", FieldType::kBool, "share one graph across runs"},
    {"output", FieldType::kString, "CSV path, - for stdout"},
    {"trace_dir", FieldType::kString, "directory for per-run traces"},
    {"jobs", FieldType::kUnsigned, "parallel runs"},
};

const FieldInfo* find_field(const std::string& key) {
  for (const auto& f : kFields) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

std::uint64_t get_unsigned(const json& doc, const char* key, std::uint64_t fallback,
                           std::uint64_t max = std::numeric_limits<std::uint32_t>::max()) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(key, "expected a non-negative integer");
  auto value = v.get<std::uint64_t>();
  if (value > max) throw ConfigError(key, "value too large");
  return value;
}

double get_double(const json& doc, const char* key, double fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

bool get_bool(const json& doc, const char* key, bool fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& doc, const char* key, const std::string& fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

template <typename Fn>
auto parse_enum(const char* key, const std::string& text, Fn fn) {
  try {
    return fn(text);
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_fraction(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::span<const FieldInfo> config_fields() { return kFields; }

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

json field_value(const std::string& key, const std::string& text) {
  const FieldInfo* info = find_field(key);
  if (!info) throw ConfigError(key, "unknown field");
  try {
    switch (info->type) {
      case FieldType::kUnsigned: {
        if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) break;
        return std::stoull(text);
      }
      case FieldType::kDouble: {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case FieldType::kBool:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        break;
      case FieldType::kString:
        return text;
      case FieldType::kDepth:
        if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos) {
          return std::stoull(text);
        }
        return text;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError(key, "cannot parse '" + text + "'");
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!find_field(key)) throw ConfigError(key, "unknown field");
  }

  ExperimentConfig cfg;
  RunConfig& run = cfg.run;

  run.mode = parse_enum("mode", get_string(doc, "mode", "full"), protocol::mode_from_string);
  const auto kind = parse_enum("topology", get_string(doc, "topology", "regular"),
                               topology_kind_from_string);
  run.topology.kind = kind;
  run.topology.n = static_cast<std::uint32_t>(get_unsigned(doc, "n", 1000));
  run.topology.degree = static_cast<std::uint32_t>(get_unsigned(doc, "degree", 8));
  run.topology.p = get_double(doc, "p", 0.0);
  run.topology.depth = static_cast<std::uint32_t>(get_unsigned(doc, "depth", 4));
  if (kind == TopologyKind::kTree) {
    run.topology.n = static_cast<std::uint32_t>(tree_size(run.topology.degree, run.topology.depth));
  }
  if (run.topology.n == 0) throw ConfigError("n", "must be positive");
  if (kind == TopologyKind::kErdosRenyi && !(run.topology.p > 0.0 && run.topology.p <= 1.0)) {
    throw ConfigError("p", "must be in (0, 1]");
  }

  const bool needs_groups = run.mode == protocol::Mode::kFull || run.mode == protocol::Mode::kDcOnly;
  if (needs_groups && !doc.contains("k")) throw ConfigError("k", "required in this mode");
  run.k = static_cast<std::uint32_t>(get_unsigned(doc, "k", 4));
  if (run.k == 0) throw ConfigError("k", "must be positive");
  if (needs_groups && run.k > run.topology.n) {
    throw ConfigError("k", "larger than the network");
  }
  run.overlap = static_cast<std::uint32_t>(get_unsigned(doc, "overlap", 1));
  if (run.overlap == 0) throw ConfigError("overlap", "must be positive");

  if (doc.contains("d_max")) {
    const json& v = doc.at("d_max");
    if (v.is_number_unsigned()) {
      run.d_max = DiffusionDepth::fixed(v.get<std::uint32_t>());
    } else if (v.is_string()) {
      run.d_max = parse_enum("d_max", v.get<std::string>(), DiffusionDepth::parse);
    } else {
      throw ConfigError("d_max", "expected an integer, \"auto\" or \"coverage\"");
    }
  }
  if (run.d_max.kind == DiffusionDepth::Kind::kCoverage && run.mode != protocol::Mode::kDiffusionOnly) {
    throw ConfigError("d_max", "\"coverage\" requires mode diffusion_only");
  }

  run.round_interval = get_unsigned(doc, "round_interval", 4);
  if (run.round_interval < 3) throw ConfigError("round_interval", "must be at least 3");
  run.length_announcement = get_bool(doc, "length_announcement", true);
  run.dc_frame_size = static_cast<std::uint32_t>(get_unsigned(doc, "dc_frame_size", 0));
  run.alpha = parse_enum("alpha", get_string(doc, "alpha", "fallback"),
                         diffusion::alpha_kind_from_string);
  run.adversary_fraction = get_double(doc, "adversary_fraction", 0.0);
  if (!(run.adversary_fraction >= 0.0 && run.adversary_fraction < 1.0)) {
    throw ConfigError("adversary_fraction", "must be in [0, 1)");
  }
  run.estimator = parse_enum("estimator", get_string(doc, "estimator", "first_timestamp"),
                             estimator_from_string);
  run.honest_origin_groups = get_bool(doc, "honest_origin_groups", false);
  run.messages = static_cast<std::uint32_t>(get_unsigned(doc, "messages", 1));
  run.message_size = static_cast<std::uint32_t>(get_unsigned(doc, "message_size", 32));
  if (!run.length_announcement && run.dc_frame_size > 0 &&
      run.message_size + 8 > run.dc_frame_size) {
    throw ConfigError("dc_frame_size", "too small for message_size plus 8 bytes of framing");
  }
  run.event_cap = get_unsigned(doc, "event_cap", 10'000'000, std::numeric_limits<std::uint64_t>::max());
  if (run.event_cap == 0) throw ConfigError("event_cap", "must be positive");

  cfg.trials = static_cast<std::uint32_t>(get_unsigned(doc, "trials", 1));
  if (cfg.trials == 0) throw ConfigError("trials", "must be positive");
  cfg.seed = get_unsigned(doc, "seed", 1, std::numeric_limits<std::uint64_t>::max());
  cfg.fixed_topology = get_bool(doc, "fixed_topology", false);
  if (cfg.fixed_topology) run.topology_seed = cfg.seed;
  cfg.output = get_string(doc, "output", "-");
  cfg.trace_dir = get_string(doc, "trace_dir", "");
  cfg.jobs = static_cast<unsigned>(get_unsigned(doc, "jobs", 1));
  if (cfg.jobs == 0) throw ConfigError("jobs", "must be positive");
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  const RunConfig& run = cfg.run;
  json doc;
  doc["n"] = run.topology.n;
  doc["topology"] = to_string(run.topology.kind);
  doc["degree"] = run.topology.degree;
  doc["p"] = run.topology.p;
  doc["depth"] = run.topology.depth;
  doc["mode"] = protocol::to_string(run.mode);
  doc["k"] = run.k;
  doc["overlap"] = run.overlap;
  if (run.d_max.kind == DiffusionDepth::Kind::kFixed) {
    doc["d_max"] = run.d_max.value;
  } else {
    doc["d_max"] = run.d_max.to_string();
  }
  doc["round_interval"] = run.round_interval;
  doc["length_announcement"] = run.length_announcement;
  doc["dc_frame_size"] = run.dc_frame_size;
  doc["alpha"] = diffusion::to_string(run.alpha);
  doc["adversary_fraction"] = run.adversary_fraction;
  doc["estimator"] = to_string(run.estimator);
  doc["honest_origin_groups"] = run.honest_origin_groups;
  doc["messages"] = run.messages;
  doc["message_size"] = run.message_size;
  doc["event_cap"] = run.event_cap;
  doc["trials"] = cfg.trials;
  doc["seed"] = cfg.seed;
  doc["fixed_topology"] = cfg.fixed_topology;
  doc["output"] = cfg.output;
  doc["trace_dir"] = cfg.trace_dir;
  doc["jobs"] = cfg.jobs;
  return doc;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("PRIVBCAST_SEED");
  if (!raw || !*raw) return std::nullopt;
  std::string text(raw);
  if (text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("PRIVBCAST_SEED", "expected a non-negative integer");
  }
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw ConfigError("PRIVBCAST_SEED", "value too large");
  }
}

const char* const kCsvHeader =
    "run_id,seed,n,k,d_max,adversary_frac,mode,phase1_msgs,phase2_msgs,phase3_msgs,total_msgs,"
    "reach,ticks,true_origin,guess,correct,anonset,entropy_bits";

std::string csv_row(const RunReport& r) {
  std::string row;
  auto add = [&row](const std::string& v) {
    if (!row.empty()) row += ',';
    row += v;
  };
  auto node = [](NodeId v) { return v == kNoNode ? std::string() : std::to_string(v); };
  add(std::to_string(r.run_id));
  add(std::to_string(r.seed));
  add(std::to_string(r.n));
  add(std::to_string(r.k));
  add(std::to_string(r.d_max));
  add(format_fraction(r.adversary_fraction));
  add(protocol::to_string(r.mode));
  add(std::to_string(r.counts.phase(1)));
  add(std::to_string(r.counts.phase(2)));
  add(std::to_string(r.counts.phase(3)));
  add(std::to_string(r.counts.total));
  add(format_double(r.reach));
  add(std::to_string(r.ticks));
  add(node(r.true_origin));
  add(node(r.guess));
  add(r.correct ? "1" : "0");
  add(std::to_string(r.anonymity_set));
  add(format_double(r.entropy_bits));
  return row;
}

std::vector<std::string> aggregate_rows(std::span<const RunReport> reports,
                                        const ExperimentConfig& config) {
  constexpr std::size_t kCols = 11;
  auto values = [](const RunReport& r) {
    return std::array<double, kCols>{
        static_cast<double>(r.n),
        static_cast<double>(r.k),
        static_cast<double>(r.d_max),
        static_cast<double>(r.counts.phase(1)),
        static_cast<double>(r.counts.phase(2)),
        static_cast<double>(r.counts.phase(3)),
        static_cast<double>(r.counts.total),
        r.reach,
        static_cast<double>(r.ticks),
        r.correct ? 1.0 : 0.0,
        static_cast<double>(r.anonymity_set),
    };
  };
  std::array<double, kCols> mean{};
  std::array<double, kCols> sq{};
  double entropy_mean = 0.0;
  double entropy_sq = 0.0;
  const double count = static_cast<double>(reports.size());
  if (reports.empty()) return {};
  for (const auto& r : reports) {
    auto v = values(r);
    for (std::size_t i = 0; i < kCols; ++i) mean[i] += v[i] / count;
    entropy_mean += r.entropy_bits / count;
  }
  for (const auto& r : reports) {
    auto v = values(r);
    for (std::size_t i = 0; i < kCols; ++i) sq[i] += (v[i] - mean[i]) * (v[i] - mean[i]);
    entropy_sq += (r.entropy_bits - entropy_mean) * (r.entropy_bits - entropy_mean);
  }
  const double denom = reports.size() > 1 ? count - 1.0 : 1.0;

  auto row = [&](const char* label, const std::array<double, kCols>& v, double entropy) {
    std::string out = std::string(label) + "," + std::to_string(config.seed);
    auto add = [&out](const std::string& s) { out += "," + s; };
    add(format_double(v[0]));
    add(format_double(v[1]));
    add(format_double(v[2]));
    add(format_fraction(config.run.adversary_fraction));
    add(protocol::to_string(config.run.mode));
    for (std::size_t i = 3; i <= 8; ++i) add(format_double(v[i]));
    add("");
    add("");
    add(format_double(v[9]));
    add(format_double(v[10]));
    add(format_double(entropy));
    return out;
  };
  std::array<double, kCols> sd{};
  for (std::size_t i = 0; i < kCols; ++i) sd[i] = std::sqrt(sq[i] / denom);
  return {row("mean", mean, entropy_mean), row("stddev", sd, std::sqrt(entropy_sq / denom))};
}

std::vector<RunResult> run_trials(const ExperimentConfig& config, std::uint64_t first_run_id) {
  std::vector<RunResult> results(config.trials);
  std::optional<Topology> shared;
  if (config.run.topology_seed) {
    shared = generate_topology(config.run.topology, *config.run.topology_seed);
  }
  auto one = [&](std::uint32_t i) {
    const std::uint64_t seed = config.seed + i;
    results[i] = shared ? run_on(*shared, config.run, seed, first_run_id + i)
                        : run(config.run, seed, first_run_id + i);
  };

  const unsigned jobs = std::min<unsigned>(config.jobs, config.trials);
  if (jobs <= 1) {
    for (std::uint32_t i = 0; i < config.trials; ++i) one(i);
    return results;
  }
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::uint32_t i = next++; i < config.trials; i = next++) {
        try {
          one(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

void write_run_files(const std::string& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  const std::string stem = dir + "/run_" + std::to_string(result.report.run_id);
  {
    std::ofstream trace(stem + ".ndjson", std::ios::binary);
    if (!trace) throw Error("cannot write " + stem + ".ndjson");
    result.trace.write_ndjson(trace);
  }
  const RunReport& r = result.report;
  json doc;
  doc["run_id"] = r.run_id;
  doc["seed"] = r.seed;
  doc["mode"] = protocol::to_string(r.mode);
  doc["d_max"] = r.d_max;
  doc["origin"] = r.true_origin;
  doc["initial_virtual_source"] = r.initial_vs == kNoNode ? json(nullptr) : json(r.initial_vs);
  doc["final_virtual_source"] = r.final_vs == kNoNode ? json(nullptr) : json(r.final_vs);
  doc["dc_rounds"] = r.dc_rounds;
  doc["collisions"] = r.collisions;
  doc["groups"] = result.groups;
  doc["adversaries"] = result.adversaries;
  std::ofstream out(stem + ".json", std::ios::binary);
  if (!out) throw Error("cannot write " + stem + ".json");
  out << doc.dump(2) << '\n';
}

}  // namespace privbcast::cli
