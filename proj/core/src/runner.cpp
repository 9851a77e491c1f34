#include "privbcast/runner.hpp"

#include <algorithm>
#include <numeric>

#include "privbcast/flood.hpp"
#include "privbcast/groups.hpp"

namespace privbcast {

DiffusionDepth DiffusionDepth::parse(const std::string& text) {
  if (text == "auto") return automatic();
  if (text == "coverage") return coverage();
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error("d_max must be a non-negative integer, \"auto\" or \"coverage\", got '" + text + "'");
  }
  return fixed(static_cast<std::uint32_t>(std::stoul(text)));
}

std::string DiffusionDepth::to_string() const {
  switch (kind) {
    case Kind::kAuto: return "auto";
    case Kind::kCoverage: return "coverage";
    case Kind::kFixed: break;
  }
  return std::to_string(value);
}

std::string to_string(Estimator estimator) {
  return estimator == Estimator::kDcGroup ? "dc_group" : "first_timestamp";
}

Estimator estimator_from_string(const std::string& name) {
  if (name == "first_timestamp") return Estimator::kFirstTimestamp;
  if (name == "dc_group") return Estimator::kDcGroup;
  throw Error("unknown estimator '" + name + "'");
}

std::uint32_t resolve_depth(const DiffusionDepth& depth, const Topology& topology) {
  switch (depth.kind) {
    case DiffusionDepth::Kind::kFixed: return depth.value;
    case DiffusionDepth::Kind::kAuto: return (topology.diameter() + 1) / 2;
    case DiffusionDepth::Kind::kCoverage: return 0;
  }
  return 0;
}

RunResult run(const RunConfig& config, std::uint64_t seed, std::uint64_t run_id) {
  Topology topology = generate_topology(config.topology, config.topology_seed.value_or(seed));
  return run_on(topology, config, seed, run_id);
}

RunResult run_on(const Topology& topology, const RunConfig& config, std::uint64_t seed,
                 std::uint64_t run_id) {
  using protocol::Mode;
  const std::uint32_t n = topology.size();
  if (n == 0) throw Error("empty topology");

  const bool coverage = config.d_max.kind == DiffusionDepth::Kind::kCoverage;
  if (coverage && config.mode != Mode::kDiffusionOnly) {
    throw Error("d_max \"coverage\" is only meaningful in diffusion_only mode");
  }
  const bool needs_groups = config.mode == Mode::kFull || config.mode == Mode::kDcOnly;

  RunResult result;
  RunReport& report = result.report;
  report.run_id = run_id;
  report.seed = seed;
  report.n = n;
  report.k = config.k;
  // Only phase 2 reads the depth; "auto" costs an all-pairs BFS.
  const bool diffuses = config.mode == Mode::kFull || config.mode == Mode::kDiffusionOnly;
  report.d_max = diffuses ? resolve_depth(config.d_max, topology) : 0;
  report.adversary_fraction = config.adversary_fraction;
  report.mode = config.mode;

  std::optional<groups::MembershipIndex> membership;
  if (needs_groups) {
    std::vector<NodeId> nodes(n);
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
    Rng group_rng(seed, Stream::kGroups, 0);
    membership = groups::MembershipIndex::bootstrap(nodes, config.k, config.overlap, group_rng);
    for (const auto& [gid, g] : membership->groups()) {
      result.groups.emplace_back(g.members.begin(), g.members.end());
    }
  }

  Rng workload(seed, Stream::kWorkload);
  std::vector<NodeId> origins;
  std::vector<Bytes> payloads;
  for (std::uint32_t i = 0; i < config.messages; ++i) {
    origins.push_back(static_cast<NodeId>(workload.below(n)));
    Bytes msg(config.message_size);
    workload.fill(msg);
    payloads.push_back(std::move(msg));
  }

  // Adversaries never include an originator; optionally not its co-members either.
  std::vector<NodeId> exclude = origins;
  if (config.honest_origin_groups && membership) {
    for (NodeId o : origins) {
      for (auto gid : membership->groups_of(o)) {
        const auto& members = membership->group(gid).members;
        exclude.insert(exclude.end(), members.begin(), members.end());
      }
    }
  }
  Rng adversary_rng(seed, Stream::kAdversary);
  adversary::AdversarySet adversaries =
      adversary::select_adversaries(topology, config.adversary_fraction, adversary_rng, exclude);
  result.adversaries = adversaries.nodes;

  protocol::ProtocolConfig pc;
  pc.mode = config.mode;
  pc.d_max = report.d_max;
  pc.until_coverage = coverage;
  pc.round_interval = config.round_interval;
  pc.length_announcement = config.length_announcement;
  pc.dc_frame_size = config.dc_frame_size;
  pc.alpha = config.alpha;

  SimOptions options;
  options.event_cap = config.event_cap;
  Simulator sim(options);
  protocol::ProtocolEngine engine(topology, membership ? &*membership : nullptr, pc, seed);
  std::vector<MessageId> ids;
  for (std::uint32_t i = 0; i < config.messages; ++i) {
    ids.push_back(engine.originate(origins[i], payloads[i], sim));
  }
  sim.run(engine);

  result.trace = sim.take_trace();
  report.counts = count_messages(result.trace);
  report.ticks = sim.now();
  report.unknown_envelopes = engine.unknown_envelopes();
  if (ids.empty()) return result;

  const MessageId primary = ids.front();
  const auto& rec = engine.record(primary);
  report.true_origin = rec.origin;
  report.initial_vs = rec.initial_vs;
  report.final_vs = rec.final_vs;
  report.dc_rounds = rec.dc_rounds;
  report.collisions = rec.collisions;
  if (coverage && rec.diffusion) report.d_max = rec.diffusion->token().timestep / 2;

  report.reach = 1.0;
  for (MessageId id : ids) report.reach = std::min(report.reach, flood::reach(result.trace, topology, id));

  adversary::EstimateReport estimate;
  if (config.estimator == Estimator::kDcGroup && !rec.group_members.empty()) {
    estimate = adversary::dc_group_estimate(adversaries, rec.group_members, rec.origin, n);
  } else {
    estimate = adversary::first_timestamp_estimate(result.trace, adversaries, topology, primary);
  }
  report.guess = estimate.guess;
  report.correct = estimate.guess == rec.origin;
  report.anonymity_set = estimate.anonymity_set_size;
  report.entropy_bits = estimate.entropy_bits;
  report.observed = estimate.observed;
  report.first_phase = estimate.first_phase;
  return result;
}

}  // namespace privbcast
