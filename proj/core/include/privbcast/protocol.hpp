#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "privbcast/dcnet.hpp"
#include "privbcast/diffusion.hpp"
#include "privbcast/envelope.hpp"
#include "privbcast/flood.hpp"
#include "privbcast/groups.hpp"
#include "privbcast/simulator.hpp"
#include "privbcast/topology.hpp"

namespace privbcast::protocol {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);

// Digest of a node's public identifier, the string "privbcast-node-<id>".
Digest identity_digest(NodeId node);

// Member whose identity digest is closest to the message digest, distance
// being the XOR of the two read as a 256-bit big-endian integer. Ties go to
// the lowest node id. Depends on nothing but the members and the message.
NodeId elect_initial_vs(const groups::GroupView& group, std::span<const std::uint8_t> message);
NodeId elect_initial_vs(std::span<const NodeId> members, std::span<const std::uint8_t> message);

enum class Mode { kFull, kFloodOnly, kDiffusionOnly, kDcOnly };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct ProtocolConfig {
  Mode mode = Mode::kFull;
  std::uint32_t d_max = 2;
  bool until_coverage = false;  // diffusion_only: run to full coverage
  Tick round_interval = 4;      // DC round cadence, >= 3 ticks
  bool length_announcement = true;
  std::uint32_t dc_frame_size = 0;  // fixed frame size without announcements; 0 = fit message
  diffusion::AlphaKind alpha = diffusion::AlphaKind::kFallback;
  std::uint32_t alpha_degree = 0;   // obfuscating schedule; 0 = rounded mean degree
};

// What every node knows about itself.
struct NodeState {
  NodeId node_id = 0;
  Digest identity;
  std::set<groups::GroupId> groups;
};

struct MessageRecord {
  MessageId id = 0;
  NodeId origin = kNoNode;
  Bytes message;
  Tick originated_at = 0;

  std::optional<groups::GroupId> group;
  std::vector<NodeId> group_members;
  bool dc_delivered = false;
  Tick dc_delivered_at = 0;
  std::uint64_t dc_rounds = 0;
  std::uint32_t collisions = 0;

  NodeId initial_vs = kNoNode;
  NodeId final_vs = kNoNode;
  std::uint32_t passes = 0;

  flood::SeenSet seen;
  std::unique_ptr<diffusion::DiffusionProcess> diffusion;
};

// Per-node state machines for every phase, driven by one Simulator.
class ProtocolEngine : public EventHandler {
 public:
  ProtocolEngine(const Topology& topology, const groups::MembershipIndex* membership,
                 ProtocolConfig config, std::uint64_t seed);

  // Starts a broadcast from `origin` at the simulator's current time.
  // Throws groups::NetworkTooSmall when a DC phase is needed but the origin
  // has no group, dcnet::OversizeMessage when the message cannot be framed.
  MessageId originate(NodeId origin, Bytes message, Simulator& sim);

  void on_deliver(const Envelope& envelope, Simulator& sim) override;
  void on_timer(const Timer& timer, Simulator& sim) override;

  const MessageRecord& record(MessageId id) const;
  const std::map<MessageId, MessageRecord>& records() const { return messages_; }
  const NodeState& node(NodeId id) const { return nodes_.at(id); }
  std::uint64_t unknown_envelopes() const { return unknown_envelopes_; }

  const diffusion::AlphaSchedule& schedule() const { return schedule_; }

  // Observer installed on every diffusion process created from now on.
  void set_round_observer(std::function<void(MessageId, const diffusion::RoundSnapshot&)> obs) {
    round_observer_ = std::move(obs);
  }

 private:
  struct MemberQueue {
    std::deque<MessageId> pending;
    unsigned attempts = 0;
    std::uint64_t backoff_until = 0;
  };

  struct GroupSession {
    groups::GroupId group = 0;
    std::vector<NodeId> members;
    std::map<NodeId, MemberQueue> queues;
    bool scheduled = false;
    std::uint64_t round_index = 0;
    dcnet::RoundKind kind = dcnet::RoundKind::kAnnouncement;
    std::size_t frame_size = 0;
    std::optional<std::uint32_t> follow_up;
    MessageId attribution = 0;
    std::map<NodeId, dcnet::RoundState> states;
    std::size_t done = 0;
  };

  void start_diffusion(MessageRecord& rec, NodeId initial, Simulator& sim);
  void start_flood(MessageRecord& rec, NodeId origin, Simulator& sim);

  bool has_pending(const GroupSession& s) const;
  void schedule_round(GroupSession& s, Simulator& sim);
  void begin_round(GroupSession& s, Simulator& sim);
  void send_dc(GroupSession& s, EnvelopeKind kind, NodeId from, std::vector<dcnet::Outgoing> out,
               Simulator& sim);
  void on_dc(const Envelope& env, Simulator& sim);
  void finish_round(GroupSession& s, Simulator& sim);
  void on_dc_delivered(GroupSession& s, MessageId id, Simulator& sim);
  std::uint32_t framed_size(const MessageRecord& rec) const;

  const Topology& topology_;
  const groups::MembershipIndex* membership_;
  ProtocolConfig config_;
  std::uint64_t seed_;
  diffusion::AlphaSchedule schedule_;
  Rng group_rng_;
  Rng share_rng_;
  Rng backoff_rng_;
  std::vector<NodeState> nodes_;
  std::map<MessageId, MessageRecord> messages_;
  std::map<groups::GroupId, GroupSession> sessions_;
  MessageId next_message_ = 1;
  std::uint64_t unknown_envelopes_ = 0;
  std::function<void(MessageId, const diffusion::RoundSnapshot&)> round_observer_;
};

}  // namespace privbcast::protocol
