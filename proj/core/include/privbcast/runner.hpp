#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "privbcast/adversary.hpp"
#include "privbcast/protocol.hpp"
#include "privbcast/simulator.hpp"
#include "privbcast/topology.hpp"
#include "privbcast/trace.hpp"

namespace privbcast {

struct DiffusionDepth {
  enum class Kind { kFixed, kAuto, kCoverage };
  Kind kind = Kind::kAuto;
  std::uint32_t value = 0;

  static DiffusionDepth fixed(std::uint32_t rounds) { return {Kind::kFixed, rounds}; }
  static DiffusionDepth automatic() { return {Kind::kAuto, 0}; }
  static DiffusionDepth coverage() { return {Kind::kCoverage, 0}; }

  // "auto", "coverage" or a non-negative integer.
  static DiffusionDepth parse(const std::string& text);
  std::string to_string() const;
};

enum class Estimator { kFirstTimestamp, kDcGroup };

std::string to_string(Estimator estimator);
Estimator estimator_from_string(const std::string& name);

struct RunConfig {
  TopologySpec topology;
  // When set, every run shares the graph generated from this seed; otherwise
  // each run generates its own graph from the run seed.
  std::optional<std::uint64_t> topology_seed;
  protocol::Mode mode = protocol::Mode::kFull;
  std::uint32_t k = 4;
  std::uint32_t overlap = 1;
  DiffusionDepth d_max;
  Tick round_interval = 4;
  bool length_announcement = true;
  std::uint32_t dc_frame_size = 0;
  diffusion::AlphaKind alpha = diffusion::AlphaKind::kFallback;
  double adversary_fraction = 0.0;
  Estimator estimator = Estimator::kFirstTimestamp;
  // Keep adversaries out of the origin's groups.
  bool honest_origin_groups = false;
  std::uint32_t messages = 1;
  std::uint32_t message_size = 32;
  std::uint64_t event_cap = 10'000'000;
};

struct RunReport {
  std::uint64_t run_id = 0;
  std::uint64_t seed = 0;
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t d_max = 0;  // resolved; coverage runs report the rounds played, 0 without phase 2
  double adversary_fraction = 0.0;
  protocol::Mode mode = protocol::Mode::kFull;
  MessageCounts counts;
  double reach = 0.0;
  Tick ticks = 0;
  NodeId true_origin = kNoNode;
  NodeId guess = kNoNode;
  bool correct = false;
  std::size_t anonymity_set = 0;
  double entropy_bits = 0.0;
  bool observed = false;
  int first_phase = 0;
  NodeId initial_vs = kNoNode;
  NodeId final_vs = kNoNode;
  std::uint64_t dc_rounds = 0;
  std::uint32_t collisions = 0;
  std::uint64_t unknown_envelopes = 0;
};

struct RunResult {
  RunReport report;
  Trace trace;
  std::vector<std::vector<NodeId>> groups;
  std::vector<NodeId> adversaries;
};

// Resolves the configured depth against a topology ("auto" = ceil(diameter / 2)).
std::uint32_t resolve_depth(const DiffusionDepth& depth, const Topology& topology);

RunResult run(const RunConfig& config, std::uint64_t seed, std::uint64_t run_id = 0);
RunResult run_on(const Topology& topology, const RunConfig& config, std::uint64_t seed,
                 std::uint64_t run_id = 0);

}  // namespace privbcast
