#include "privbcast/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <openssl/evp.h>

namespace privbcast::protocol {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}

Digest identity_digest(NodeId node) {
  std::string id = "privbcast-node-" + std::to_string(node);
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(id.data()), id.size()));
}

NodeId elect_initial_vs(std::span<const NodeId> members, std::span<const std::uint8_t> message) {
  if (members.empty()) throw Error("election over an empty group");
  const Digest target = sha256(message);
  NodeId best = kNoNode;
  Digest best_distance{};
  for (NodeId m : members) {
    const Digest id = identity_digest(m);
    Digest distance;
    for (std::size_t i = 0; i < distance.size(); ++i) distance[i] = id[i] ^ target[i];
    // Lexicographic order on big-endian bytes is the integer order.
    if (best == kNoNode || distance < best_distance || (distance == best_distance && m < best)) {
      best = m;
      best_distance = distance;
    }
  }
  return best;
}

NodeId elect_initial_vs(const groups::GroupView& group, std::span<const std::uint8_t> message) {
  std::vector<NodeId> members(group.members.begin(), group.members.end());
  return elect_initial_vs(members, message);
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kFull: return "full";
    case Mode::kFloodOnly: return "flood_only";
    case Mode::kDiffusionOnly: return "diffusion_only";
    case Mode::kDcOnly: return "dc_only";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& name) {
  if (name == "full") return Mode::kFull;
  if (name == "flood_only") return Mode::kFloodOnly;
  if (name == "diffusion_only") return Mode::kDiffusionOnly;
  if (name == "dc_only") return Mode::kDcOnly;
  throw Error("unknown mode '" + name + "'");
}

namespace {

diffusion::AlphaSchedule make_schedule(const Topology& topology, const ProtocolConfig& config) {
  if (config.alpha == diffusion::AlphaKind::kFallback) return diffusion::AlphaSchedule::fallback();
  std::uint32_t degree = config.alpha_degree;
  if (degree == 0) degree = static_cast<std::uint32_t>(std::lround(topology.mean_degree()));
  return diffusion::AlphaSchedule::obfuscating(std::max<std::uint32_t>(degree, 2));
}

}  // namespace

ProtocolEngine::ProtocolEngine(const Topology& topology, const groups::MembershipIndex* membership,
                               ProtocolConfig config, std::uint64_t seed)
    : topology_(topology),
      membership_(membership),
      config_(config),
      seed_(seed),
      schedule_(make_schedule(topology, config)),
      group_rng_(seed, Stream::kGroups, 1),
      share_rng_(seed, Stream::kShares),
      backoff_rng_(seed, Stream::kBackoff) {
  if (config_.round_interval < 3) throw Error("round_interval must be at least 3 ticks");
  nodes_.reserve(topology.size());
  for (NodeId v = 0; v < topology.size(); ++v) {
    NodeState st;
    st.node_id = v;
    st.identity = identity_digest(v);
    if (membership_) st.groups = membership_->groups_of(v);
    nodes_.push_back(std::move(st));
  }
}

const MessageRecord& ProtocolEngine::record(MessageId id) const {
  auto it = messages_.find(id);
  if (it == messages_.end()) throw Error("unknown message " + std::to_string(id));
  return it->second;
}

std::uint32_t ProtocolEngine::framed_size(const MessageRecord& rec) const {
  if (!config_.length_announcement && config_.dc_frame_size > 0) return config_.dc_frame_size;
  return static_cast<std::uint32_t>(rec.message.size() + dcnet::kFrameOverhead);
}

MessageId ProtocolEngine::originate(NodeId origin, Bytes message, Simulator& sim) {
  if (origin >= topology_.size()) throw Error("origin out of range");
  const MessageId id = next_message_++;
  MessageRecord& rec = messages_[id];
  rec.id = id;
  rec.origin = origin;
  rec.message = std::move(message);
  rec.originated_at = sim.now();
  rec.seen = flood::SeenSet(topology_.size());

  switch (config_.mode) {
    case Mode::kFloodOnly:
      start_flood(rec, origin, sim);
      return id;
    case Mode::kDiffusionOnly:
      start_diffusion(rec, origin, sim);
      return id;
    case Mode::kFull:
    case Mode::kDcOnly:
      break;
  }

  if (!membership_ || membership_->groups_of(origin).empty()) {
    messages_.erase(id);
    throw groups::NetworkTooSmall("node " + std::to_string(origin) + " belongs to no DC group");
  }
  if (rec.message.size() + dcnet::kFrameOverhead > framed_size(rec)) {
    std::size_t size = rec.message.size();
    messages_.erase(id);
    throw dcnet::OversizeMessage("message of " + std::to_string(size) +
                                 " bytes exceeds the fixed DC frame");
  }
  const groups::GroupId gid = membership_->select_group(origin, group_rng_);
  rec.group = gid;

  auto [it, created] = sessions_.try_emplace(gid);
  GroupSession& s = it->second;
  if (created) {
    s.group = gid;
    const auto& view = membership_->group(gid);
    s.members.assign(view.members.begin(), view.members.end());
  }
  s.queues[origin].pending.push_back(id);
  if (!s.scheduled) schedule_round(s, sim);
  return id;
}

void ProtocolEngine::start_flood(MessageRecord& rec, NodeId origin, Simulator& sim) {
  rec.seen.mark(origin);
  Outbox out;
  flood::forward(topology_, origin, kNoNode, rec.id, static_cast<std::uint32_t>(rec.message.size()),
                 out);
  sim.flush(std::move(out));
}

void ProtocolEngine::start_diffusion(MessageRecord& rec, NodeId initial, Simulator& sim) {
  diffusion::DiffusionParams params;
  params.max_rounds = config_.d_max;
  params.until_coverage = config_.mode == Mode::kDiffusionOnly && config_.until_coverage;
  params.final_switch = config_.mode == Mode::kFull;
  params.payload_size = static_cast<std::uint32_t>(rec.message.size());
  rec.initial_vs = initial;
  rec.diffusion = std::make_unique<diffusion::DiffusionProcess>(
      topology_, schedule_, rec.id, params, Rng(seed_, Stream::kToken, rec.id), &rec.seen);
  if (round_observer_) {
    const MessageId id = rec.id;
    rec.diffusion->set_round_observer(
        [this, id](const diffusion::RoundSnapshot& snap) { round_observer_(id, snap); });
  }
  Outbox out;
  rec.diffusion->start(initial, out);
  if (rec.diffusion->finished()) {
    rec.final_vs = rec.diffusion->virtual_source();
    rec.passes = rec.diffusion->passes();
  }
  sim.flush(std::move(out));
}

bool ProtocolEngine::has_pending(const GroupSession& s) const {
  return std::any_of(s.queues.begin(), s.queues.end(),
                     [](const auto& kv) { return !kv.second.pending.empty(); });
}

void ProtocolEngine::schedule_round(GroupSession& s, Simulator& sim) {
  const Tick interval = config_.round_interval;
  std::uint64_t index = (sim.now() + interval - 1) / interval;
  if (s.scheduled || s.done > 0 || !s.states.empty()) index = std::max(index, s.round_index + 1);
  s.scheduled = true;
  sim.schedule(index * interval - sim.now(),
               Timer{TimerKind::kDcRound, kNoNode, 0, static_cast<std::uint64_t>(s.group)});
}

void ProtocolEngine::begin_round(GroupSession& s, Simulator& sim) {
  s.round_index = sim.now() / config_.round_interval;
  s.states.clear();
  s.done = 0;

  if (config_.length_announcement) {
    if (s.follow_up) {
      s.kind = dcnet::RoundKind::kMessage;
      s.frame_size = *s.follow_up;
      s.follow_up.reset();
    } else {
      s.kind = dcnet::RoundKind::kAnnouncement;
      s.frame_size = dcnet::kAnnouncementSize;
    }
  } else {
    s.kind = dcnet::RoundKind::kMessage;
    s.frame_size = 0;
  }

  // Bookkeeping only: DC envelopes are attributed to the oldest pending
  // message so that per-message counts include the rounds spent on it.
  s.attribution = 0;
  for (const auto& [member, q] : s.queues) {
    if (!q.pending.empty() && (s.attribution == 0 || q.pending.front() < s.attribution)) {
      s.attribution = q.pending.front();
    }
  }
  if (s.frame_size == 0) {
    s.frame_size = s.attribution ? framed_size(messages_.at(s.attribution))
                                 : static_cast<std::size_t>(config_.dc_frame_size);
  }

  for (NodeId m : s.members) {
    Bytes input(s.frame_size, 0);
    auto qit = s.queues.find(m);
    if (qit != s.queues.end() && !qit->second.pending.empty() &&
        s.round_index >= qit->second.backoff_until) {
      const MessageRecord& rec = messages_.at(qit->second.pending.front());
      const std::uint32_t wanted = framed_size(rec);
      if (s.kind == dcnet::RoundKind::kAnnouncement) {
        input = dcnet::encode_announcement(wanted);
      } else if (wanted <= s.frame_size) {
        input = dcnet::frame(rec.message, s.frame_size).bytes;
      }
    }
    std::vector<NodeId> peers;
    for (NodeId p : s.members) {
      if (p != m) peers.push_back(p);
    }
    s.states.emplace(m, dcnet::RoundState(m, std::move(peers), s.round_index, std::move(input), s.kind));
  }
  if (s.attribution) ++messages_.at(s.attribution).dc_rounds;

  for (auto& [m, st] : s.states) {
    auto out = st.start(share_rng_);
    if (st.step() == dcnet::RoundStep::kDone) ++s.done;
    send_dc(s, EnvelopeKind::kDcShare, m, std::move(out), sim);
  }
  if (s.done == s.members.size()) finish_round(s, sim);
}

void ProtocolEngine::send_dc(GroupSession& s, EnvelopeKind kind, NodeId from,
                             std::vector<dcnet::Outgoing> out, Simulator& sim) {
  for (auto& o : out) {
    Envelope e;
    e.kind = kind;
    e.message_id = s.attribution;
    e.src = from;
    e.dst = o.to;
    e.round = s.round_index;
    e.channel = s.group;
    e.payload_size = static_cast<std::uint32_t>(o.value.size());
    e.payload = std::move(o.value);
    sim.send(std::move(e));
  }
}

void ProtocolEngine::on_dc(const Envelope& env, Simulator& sim) {
  auto sit = sessions_.find(env.channel);
  if (sit == sessions_.end()) {
    ++unknown_envelopes_;
    return;
  }
  GroupSession& s = sit->second;
  auto it = s.states.find(env.dst);
  if (it == s.states.end() || env.round != s.round_index) {
    ++unknown_envelopes_;
    return;
  }
  dcnet::RoundState& st = it->second;
  switch (env.kind) {
    case EnvelopeKind::kDcShare:
      send_dc(s, EnvelopeKind::kDcAccumS, env.dst, st.on_share(env.src, env.payload), sim);
      break;
    case EnvelopeKind::kDcAccumS:
      send_dc(s, EnvelopeKind::kDcAccumT, env.dst, st.on_accum_s(env.src, env.payload), sim);
      break;
    case EnvelopeKind::kDcAccumT:
      st.on_accum_t(env.src, env.payload);
      if (st.step() == dcnet::RoundStep::kDone && ++s.done == s.members.size()) {
        finish_round(s, sim);
      }
      break;
    default:
      break;
  }
}

void ProtocolEngine::finish_round(GroupSession& s, Simulator& sim) {
  s.scheduled = false;
  const dcnet::RecoveryOutcome& outcome = *s.states.begin()->second.outcome();

  std::vector<NodeId> contenders;
  for (const auto& [m, st] : s.states) {
    if (!dcnet::all_zero(st.own_input())) contenders.push_back(m);
  }
  auto back_off = [&](NodeId m) {
    MemberQueue& q = s.queues[m];
    ++q.attempts;
    q.backoff_until = dcnet::schedule_backoff(s.round_index, q.attempts, backoff_rng_);
    if (s.attribution) ++messages_.at(s.attribution).collisions;
  };

  if (s.kind == dcnet::RoundKind::kAnnouncement) {
    auto decision = dcnet::announce_length(outcome);
    if (decision.next == dcnet::AnnouncementDecision::Next::kFollowUp) {
      s.follow_up = decision.follow_up_size;
    }
    // Two equal announcements cancel to silence and three can forge a valid
    // one, so every announcer that did not get its own value back retries.
    for (NodeId m : contenders) {
      if (!s.states.at(m).outcome()->own_delivered) back_off(m);
    }
  } else if (outcome.outcome == dcnet::Outcome::kCollision) {
    for (NodeId m : contenders) back_off(m);
  } else if (outcome.outcome == dcnet::Outcome::kMessage) {
    for (NodeId m : contenders) {
      const auto& own = *s.states.at(m).outcome();
      if (!own.own_delivered) {
        back_off(m);
        continue;
      }
      MemberQueue& q = s.queues[m];
      const MessageId delivered = q.pending.front();
      q.pending.pop_front();
      q.attempts = 0;
      on_dc_delivered(s, delivered, sim);
    }
  }

  if (has_pending(s) || s.follow_up) schedule_round(s, sim);
}

void ProtocolEngine::on_dc_delivered(GroupSession& s, MessageId id, Simulator& sim) {
  MessageRecord& rec = messages_.at(id);
  rec.dc_delivered = true;
  rec.dc_delivered_at = sim.now();
  rec.group_members = s.members;
  const NodeId elected = elect_initial_vs(s.members, rec.message);
  rec.initial_vs = elected;
  if (config_.mode == Mode::kFull) start_diffusion(rec, elected, sim);
}

void ProtocolEngine::on_deliver(const Envelope& env, Simulator& sim) {
  switch (env.kind) {
    case EnvelopeKind::kDcShare:
    case EnvelopeKind::kDcAccumS:
    case EnvelopeKind::kDcAccumT:
      on_dc(env, sim);
      return;
    case EnvelopeKind::kTokenPass:
    case EnvelopeKind::kDiffusionSpread:
    case EnvelopeKind::kFinalSwitch: {
      auto it = messages_.find(env.message_id);
      if (it == messages_.end() || !it->second.diffusion) {
        ++unknown_envelopes_;
        return;
      }
      MessageRecord& rec = it->second;
      Outbox out;
      rec.diffusion->on_envelope(env, out);
      sim.flush(std::move(out));
      return;
    }
    case EnvelopeKind::kFlood: {
      auto it = messages_.find(env.message_id);
      if (it == messages_.end()) {
        ++unknown_envelopes_;
        return;
      }
      MessageRecord& rec = it->second;
      for (auto& e : flood::on_flood_receive(topology_, rec.seen, env.dst, env.message_id, env.src,
                                             env.payload_size)) {
        sim.send(std::move(e));
      }
      return;
    }
  }
  ++unknown_envelopes_;
}

void ProtocolEngine::on_timer(const Timer& timer, Simulator& sim) {
  switch (timer.kind) {
    case TimerKind::kDcRound: {
      auto it = sessions_.find(static_cast<groups::GroupId>(timer.value));
      if (it != sessions_.end()) begin_round(it->second, sim);
      return;
    }
    case TimerKind::kDiffusionRound: {
      auto it = messages_.find(timer.message_id);
      if (it == messages_.end() || !it->second.diffusion) return;
      MessageRecord& rec = it->second;
      Outbox out;
      rec.diffusion->on_timer(timer, out);
      if (rec.diffusion->finished()) {
        rec.final_vs = rec.diffusion->virtual_source();
        rec.passes = rec.diffusion->passes();
      }
      sim.flush(std::move(out));
      return;
    }
    case TimerKind::kOriginate:
      return;
  }
}

}  // namespace privbcast::protocol
