#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "privbcast/cli/experiment.hpp"
#include "privbcast/groups.hpp"
#include "privbcast/simulator.hpp"

namespace privbcast::cli {

using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string echo_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_flags(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "JSON configuration file");
  sub->add_option("--echo-config", flags.echo_path,
                  "write the resolved configuration here instead of stderr");
  for (const auto& field : config_fields()) {
    const std::string key = field.key;
    flags.options[key] = sub->add_option(flag_name(key), flags.values[key], field.help);
  }
}

json load_document(const CommonFlags& flags) {
  json doc = json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw ConfigError("config", "cannot open " + flags.config_path);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", e.what());
    }
    if (!doc.is_object()) throw ConfigError("config", "top level must be a JSON object");
  }
  if (auto seed = seed_from_env()) doc["seed"] = *seed;
  for (const auto& [key, opt] : flags.options) {
    if (opt->count() > 0) doc[key] = field_value(key, flags.values.at(key));
  }
  return doc;
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (path != "-" && !path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("output", "cannot open " + path);
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

void echo(const json& doc, const std::string& path, std::ostream& err) {
  if (path.empty()) {
    err << doc.dump() << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("echo-config", "cannot open " + path);
  out << doc.dump(2) << '\n';
}

json resolved_depths(const std::vector<RunResult>& results) {
  std::vector<std::uint32_t> depths;
  for (const auto& r : results) depths.push_back(r.report.d_max);
  if (!depths.empty() && std::all_of(depths.begin(), depths.end(),
                                     [&](std::uint32_t d) { return d == depths.front(); })) {
    return depths.front();
  }
  return depths;
}

int simulate(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = config_from_json(load_document(flags));
  auto results = run_trials(cfg);

  Output sink(cfg.output, out);
  std::ostream& csv = sink.stream();
  csv << kCsvHeader << '\n';
  std::vector<RunReport> reports;
  for (const auto& r : results) {
    csv << csv_row(r.report) << '\n';
    reports.push_back(r.report);
  }
  for (const auto& row : aggregate_rows(reports, cfg)) csv << row << '\n';
  csv.flush();

  if (!cfg.trace_dir.empty()) {
    for (const auto& r : results) write_run_files(cfg.trace_dir, r);
  }
  json doc = config_to_json(cfg);
  doc["d_max_resolved"] = resolved_depths(results);
  echo(doc, flags.echo_path, err);
  return kExitOk;
}

const std::set<std::string> kSweepable = {"k", "d_max", "adversary_fraction", "n"};

int sweep(const CommonFlags& flags, const std::string& axis, const std::string& values_text,
          std::ostream& out, std::ostream& err) {
  if (!kSweepable.contains(axis)) {
    throw ConfigError("axis", "'" + axis + "' is not sweepable (k, d_max, adversary_fraction, n)");
  }
  std::vector<std::string> values;
  std::stringstream ss(values_text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) values.push_back(item);
  }
  if (values.empty()) throw ConfigError("values", "empty list");

  const json base = load_document(flags);
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    json doc = base;
    doc[axis] = field_value(axis, v);
    configs.push_back(config_from_json(doc));
  }

  Output sink(configs.front().output, out);
  std::ostream& csv = sink.stream();
  csv << "axis,value," << kCsvHeader << '\n';
  json depths = json::array();
  std::uint64_t next_id = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto results = run_trials(configs[i], next_id);
    next_id += configs[i].trials;
    const std::string prefix = axis + "," + values[i] + ",";
    std::vector<RunReport> reports;
    for (const auto& r : results) {
      csv << prefix << csv_row(r.report) << '\n';
      reports.push_back(r.report);
    }
    for (const auto& row : aggregate_rows(reports, configs[i])) csv << prefix << row << '\n';
    if (!configs[i].trace_dir.empty()) {
      for (const auto& r : results) write_run_files(configs[i].trace_dir, r);
    }
    depths.push_back(resolved_depths(results));
  }
  csv.flush();

  json doc = config_to_json(configs.front());
  doc.erase(axis);
  doc["axis"] = axis;
  doc["values"] = values;
  doc["d_max_resolved"] = depths;
  echo(doc, flags.echo_path, err);
  return kExitOk;
}

int topology_info(const CommonFlags& flags, std::ostream& out) {
  json doc = load_document(flags);
  json topo = json::object();
  for (const char* key : {"n", "topology", "degree", "p", "depth", "seed"}) {
    if (doc.contains(key)) topo[key] = doc[key];
  }
  topo["mode"] = "flood_only";
  ExperimentConfig cfg = config_from_json(topo);
  Topology t = generate_topology(cfg.run.topology, cfg.seed);
  out << "n: " << t.size() << '\n'
      << "edges: " << t.edge_count() << '\n'
      << "diameter: " << t.diameter() << '\n'
      << "connected: " << (t.connected() ? "true" : "false") << '\n';
  return kExitOk;
}

}  // namespace

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-phase private broadcast simulator"};
  app.require_subcommand(1);

  CommonFlags sim_flags;
  CommonFlags sweep_flags;
  CommonFlags info_flags;
  std::string axis;
  std::string values;

  auto* sim = app.add_subcommand("simulate", "run trials and write one CSV row per run");
  add_config_flags(sim, sim_flags);
  auto* sw = app.add_subcommand("sweep", "repeat simulate over values of one field");
  add_config_flags(sw, sweep_flags);
  sw->add_option("--axis", axis, "k, d_max, adversary_fraction or n")->required();
  sw->add_option("--values", values, "comma-separated values")->required();
  auto* info = app.add_subcommand("topology-info", "print n, edge count and diameter");
  add_config_flags(info, info_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (sim->parsed()) return simulate(sim_flags, out, err);
    if (sw->parsed()) return sweep(sweep_flags, axis, values, out, err);
    return topology_info(info_flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleSpec& e) {
    err << "config error: topology: " << e.what() << '\n';
    return kExitConfig;
  } catch (const groups::NetworkTooSmall& e) {
    err << "config error: k: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NonTermination& e) {
    err << "aborted: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "aborted: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace privbcast::cli
