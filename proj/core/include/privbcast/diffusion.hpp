#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "privbcast/envelope.hpp"
#include "privbcast/flood.hpp"
#include "privbcast/rng.hpp"
#include "privbcast/simulator.hpp"
#include "privbcast/topology.hpp"

// Adaptive diffusion. A virtual-source token performs a non-backtracking
// walk; after every round (timestep t, always even) the infected set is the
// ball of radius t/2 around the current token holder. On a tree this is
// exact. On graphs with cycles the same rules run over the first-parent
// infection tree, with duplicate deliveries dropped.
namespace privbcast::diffusion {

enum class AlphaKind { kFallback, kObfuscating };

std::string to_string(AlphaKind kind);
AlphaKind alpha_kind_from_string(const std::string& name);

// Token-transfer probability alpha(t, h): t the even timestep, h the number
// of passes made so far. alpha(0, 0) is 1 for every schedule.
//
// kFallback: 2 / (t + 2), independent of h and of the graph.
//
// kObfuscating: tabulated for a d-regular tree. The distribution q_t of h is
// carried forward step by step and alpha(t, 1..t/2) is chosen, smallest h
// first, so that q_{t+2}(h) is proportional to d (d-1)^(h-1), the number of
// ball nodes at distance h from the center. Once the first pass has happened
// the center itself can no longer hold the initial source, so h = 0 is
// excluded from the target.
class AlphaSchedule {
 public:
  static AlphaSchedule fallback();
  static AlphaSchedule obfuscating(std::uint32_t degree, std::uint32_t max_timestep = 120);
  // The same probability everywhere, t = 0 included. For experiments.
  static AlphaSchedule constant(double probability);

  double operator()(std::uint32_t timestep, std::uint32_t hops) const;

  AlphaKind kind() const { return kind_; }
  std::uint32_t degree() const { return degree_; }

  // Distribution of h after `timestep` under this schedule (obfuscating only,
  // timestep within the table).
  std::span<const double> hop_distribution(std::uint32_t timestep) const;

 private:
  AlphaKind kind_ = AlphaKind::kFallback;
  std::uint32_t degree_ = 0;
  std::optional<double> constant_;
  std::vector<std::vector<double>> alpha_;  // [t/2][h]
  std::vector<std::vector<double>> q_;      // [t/2][h]
};

// Nodes at distance exactly h from the center of a d-regular tree.
double shell_size(std::uint32_t degree, std::uint32_t h);

class NoEligibleNeighbor : public Error {
 public:
  using Error::Error;
};

struct TokenDecision {
  enum class Action { kKeep, kPass, kForcedKeep };
  Action action = Action::kKeep;
  NodeId to = kNoNode;
};

// With probability alpha(t, h) hand the token to a uniform member of
// `eligible` (the caller excludes the `from` neighbor), otherwise keep it.
// An empty candidate list forces a keep.
TokenDecision pass_or_keep(const VirtualSourceToken& token, std::span<const NodeId> eligible,
                           const AlphaSchedule& schedule, Rng& rng);

// Per-node view of one message.
class DiffusionState {
 public:
  explicit DiffusionState(std::uint32_t n);

  bool infected(NodeId v) const { return infected_[v] != 0; }
  NodeId parent(NodeId v) const { return parent_[v]; }
  bool expanded(NodeId v) const { return expanded_[v] != 0; }
  bool is_virtual_source(NodeId v) const { return vs_ == v; }
  const std::vector<NodeId>& children(NodeId v) const { return children_[v]; }
  bool tree_adjacent(NodeId a, NodeId b) const;
  std::size_t infected_count() const { return infected_count_; }
  std::vector<NodeId> infected_nodes() const;

 private:
  friend class DiffusionProcess;

  void infect(NodeId v, NodeId parent);

  std::vector<std::uint8_t> infected_;
  std::vector<NodeId> parent_;
  std::vector<std::uint8_t> expanded_;
  std::vector<std::uint8_t> switched_;
  std::vector<std::int64_t> last_request_;
  std::vector<std::vector<NodeId>> children_;
  std::size_t infected_count_ = 0;
  NodeId vs_ = kNoNode;
};

struct DiffusionParams {
  // Rounds before the final switch (t reaches 2 * max_rounds).
  std::uint32_t max_rounds = 2;
  // Keep playing rounds until every node of the initial source's component
  // is infected and a further round infects nobody, instead of stopping at
  // max_rounds. No final switch.
  bool until_coverage = false;
  // With until_coverage: stop as soon as the component is covered, skipping
  // the quiescent round. Needs global knowledge; for measurement only.
  bool stop_at_coverage = false;
  // At the last round hand over to flood-and-prune; otherwise just stop.
  bool final_switch = true;
  std::uint32_t payload_size = 0;
};

struct RoundSnapshot {
  std::uint32_t timestep;
  NodeId virtual_source;
  std::uint32_t hops;
  const DiffusionState& state;
};

// Drives one message through adaptive diffusion. Handlers touch only the
// receiving node's entry, except that a node learns a neighbor accepted it
// as parent.
class DiffusionProcess {
 public:
  DiffusionProcess(const Topology& topology, const AlphaSchedule& schedule, MessageId message,
                   DiffusionParams params, Rng token_rng, flood::SeenSet* seen = nullptr);

  // Creates the token at `initial` (t = 0, h = 0) and plays the first round.
  void start(NodeId initial, Outbox& out);

  // TokenPass, DiffusionSpread or FinalSwitch addressed to env.dst.
  void on_envelope(const Envelope& env, Outbox& out);

  // Round timer of the current token holder.
  void on_timer(const Timer& timer, Outbox& out);

  const DiffusionState& state() const { return state_; }
  const VirtualSourceToken& token() const { return token_; }
  NodeId virtual_source() const { return state_.vs_; }
  NodeId initial_source() const { return initial_; }
  bool finished() const { return finished_; }
  std::uint32_t passes() const { return token_.hops; }

  // Called at every round boundary, before the holder decides, including
  // the final one.
  void set_round_observer(std::function<void(const RoundSnapshot&)> observer) {
    observer_ = std::move(observer);
  }

 private:
  void play_round(NodeId holder, Outbox& out);
  void finalize(NodeId holder, Outbox& out);
  void schedule_next(NodeId holder, Outbox& out);
  void expand(NodeId node, NodeId except, std::uint32_t budget, Outbox& out);
  void relay(NodeId node, NodeId except, std::uint32_t budget, Outbox& out);
  void switch_to_flood(NodeId node, NodeId except, Outbox& out);
  void send_spread(NodeId from, NodeId to, std::uint32_t budget, Outbox& out);
  std::vector<NodeId> tree_neighbors(NodeId node) const;
  void mark_holder(NodeId v);

  const Topology& topology_;
  const AlphaSchedule& schedule_;
  MessageId message_;
  DiffusionParams params_;
  Rng rng_;
  flood::SeenSet* seen_;
  DiffusionState state_;
  VirtualSourceToken token_;
  NodeId initial_ = kNoNode;
  std::size_t component_size_ = 0;
  std::size_t infected_at_last_round_ = 0;
  bool finished_ = false;
  std::function<void(const RoundSnapshot&)> observer_;
};

// Nodes within `radius` hops of `center`.
std::vector<NodeId> ball(const Topology& topology, NodeId center, std::uint32_t radius);

}  // namespace privbcast::diffusion
