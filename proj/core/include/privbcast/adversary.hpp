#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "privbcast/rng.hpp"
#include "privbcast/topology.hpp"
#include "privbcast/trace.hpp"
#include "privbcast/types.hpp"

namespace privbcast::adversary {

struct AdversarySet {
  std::vector<bool> member;  // indexed by node
  std::vector<NodeId> nodes; // sorted
  double fraction = 0.0;

  bool contains(NodeId v) const { return v < member.size() && member[v]; }
  std::size_t size() const { return nodes.size(); }
};

// round(fraction * n) nodes drawn uniformly, never from `exclude`. The count
// is clamped to the number of eligible nodes.
AdversarySet select_adversaries(const Topology& topology, double fraction, Rng& rng,
                                std::span<const NodeId> exclude = {});
AdversarySet make_adversary_set(std::size_t n, std::span<const NodeId> nodes);

struct EstimateReport {
  NodeId guess = kNoNode;
  std::vector<double> posterior;  // indexed by node, sums to 1
  std::size_t anonymity_set_size = 0;
  double entropy_bits = 0.0;
  bool observed = false;
  bool exposed = false;   // point mass forced by an all-corrupt or corrupt-sender group
  int first_phase = 0;    // phase of the earliest observation, 0 if none
};

// Fills guess, anonymity set and entropy from the posterior.
void summarize(EstimateReport& report);

// The records an adversary coalition sees: its own inbox, nothing else.
std::vector<TraceRecord> observe(const Trace& trace, const AdversarySet& adversaries,
                                 std::optional<MessageId> message = std::nullopt);

// Earliest-relayer estimator with weight exp(-(t_u - t_min)) per honest relayer.
// Without any observation the posterior is uniform over honest nodes.
EstimateReport first_timestamp_estimate(const Trace& trace, const AdversarySet& adversaries,
                                        const Topology& topology,
                                        std::optional<MessageId> message = std::nullopt);

// Posterior over a DC group from a coalition holding some of its members.
// Uniform over the honest members; a point mass on `sender` when the sender
// is corrupt or no member is honest.
EstimateReport dc_group_estimate(const AdversarySet& adversaries, std::span<const NodeId> group,
                                 NodeId sender, std::size_t n);

struct PrecisionReport {
  std::size_t runs = 0;
  std::size_t correct = 0;
  double precision = 0.0;
  double mean_anonymity_set = 0.0;
  double mean_entropy_bits = 0.0;
  std::array<std::size_t, 4> first_phase{};  // index 0 = never observed
};

struct Outcome {
  EstimateReport estimate;
  NodeId truth = kNoNode;
};

PrecisionReport evaluate(std::span<const Outcome> outcomes);

}  // namespace privbcast::adversary
