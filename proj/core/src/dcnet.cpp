#include "privbcast/dcnet.hpp"

#include <algorithm>
#include <string>

#include <zlib.h>

namespace privbcast::dcnet {

namespace {

void put_be32(std::uint8_t* out, std::uint32_t v) {
  out[0] = static_cast<std::uint8_t>(v >> 24);
  out[1] = static_cast<std::uint8_t>(v >> 16);
  out[2] = static_cast<std::uint8_t>(v >> 8);
  out[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_be32(const std::uint8_t* in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; frames are far below 4 GiB.
  crc = ::crc32(crc, data.data(), static_cast<uInt>(data.size()));
  return static_cast<std::uint32_t>(crc);
}

Payload Payload::parse(Bytes raw) {
  Payload p;
  p.bytes = std::move(raw);
  if (p.bytes.size() < kFrameOverhead) return p;
  std::uint32_t length = get_be32(p.bytes.data());
  if (static_cast<std::uint64_t>(length) + kFrameOverhead > p.bytes.size()) return p;
  p.crc = get_be32(p.bytes.data() + 4 + length);
  // Padding must be zero as well, or corrupted padding would pass.
  p.valid = p.crc == crc32(std::span(p.bytes).first(4 + length)) &&
            all_zero(std::span(p.bytes).subspan(length + kFrameOverhead));
  return p;
}

std::span<const std::uint8_t> Payload::message() const {
  std::uint32_t length = get_be32(bytes.data());
  return std::span(bytes).subspan(4, length);
}

Payload frame(std::span<const std::uint8_t> message, std::size_t size) {
  if (message.size() + kFrameOverhead > size) {
    throw OversizeMessage("message of " + std::to_string(message.size()) +
                          " bytes does not fit a " + std::to_string(size) + "-byte frame");
  }
  Payload p;
  p.bytes.assign(size, 0);
  put_be32(p.bytes.data(), static_cast<std::uint32_t>(message.size()));
  std::copy(message.begin(), message.end(), p.bytes.begin() + 4);
  p.crc = crc32(std::span(p.bytes).first(4 + message.size()));
  put_be32(p.bytes.data() + 4 + message.size(), p.crc);
  p.valid = true;
  return p;
}

std::optional<Bytes> unframe(std::span<const std::uint8_t> raw) {
  Payload p = Payload::parse(Bytes(raw.begin(), raw.end()));
  if (!p.valid) return std::nullopt;
  auto m = p.message();
  return Bytes(m.begin(), m.end());
}

Bytes encode_announcement(std::uint32_t length) {
  Bytes out(kAnnouncementSize);
  put_be32(out.data(), length);
  put_be32(out.data() + 4, crc32(std::span(out).first(4)));
  return out;
}

std::optional<std::uint32_t> decode_announcement(std::span<const std::uint8_t> raw) {
  if (raw.size() != kAnnouncementSize) return std::nullopt;
  if (get_be32(raw.data() + 4) != crc32(raw.first(4))) return std::nullopt;
  return get_be32(raw.data());
}

bool is_valid_frame(RoundKind kind, std::span<const std::uint8_t> raw) {
  if (kind == RoundKind::kAnnouncement) return decode_announcement(raw).has_value();
  return unframe(raw).has_value();
}

void xor_into(std::span<std::uint8_t> acc, std::span<const std::uint8_t> value) {
  if (acc.size() != value.size()) throw ProtocolViolation("XOR operands differ in length");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] ^= value[i];
}

Bytes xor_all(const std::vector<Bytes>& values, std::size_t size) {
  Bytes acc(size, 0);
  for (const auto& v : values) xor_into(acc, v);
  return acc;
}

bool all_zero(std::span<const std::uint8_t> data) {
  return std::all_of(data.begin(), data.end(), [](std::uint8_t b) { return b == 0; });
}

ShareVector split_shares(std::span<const std::uint8_t> payload, std::size_t k, Rng& rng) {
  if (k == 0) throw ProtocolViolation("split_shares needs k >= 1");
  ShareVector shares(k, Bytes(payload.size()));
  Bytes last(payload.begin(), payload.end());
  for (std::size_t i = 0; i + 1 < k; ++i) {
    rng.fill(shares[i]);
    xor_into(last, shares[i]);
  }
  shares[k - 1] = std::move(last);
  return shares;
}

Accumulation accumulate(const std::map<NodeId, Bytes>& received) {
  Accumulation acc;
  if (received.empty()) return acc;
  acc.total.assign(received.begin()->second.size(), 0);
  for (const auto& [member, value] : received) xor_into(acc.total, value);
  for (const auto& [member, value] : received) {
    Bytes reply = acc.total;
    xor_into(reply, value);
    acc.replies.emplace(member, std::move(reply));
  }
  return acc;
}

RecoveryOutcome recover(std::span<const std::uint8_t> t_total, std::span<const std::uint8_t> s_total,
                        std::span<const std::uint8_t> own_input, RoundKind kind) {
  Bytes combined(t_total.begin(), t_total.end());
  xor_into(combined, s_total);
  xor_into(combined, own_input);

  RecoveryOutcome out;
  if (all_zero(combined)) {
    out.outcome = Outcome::kSilence;
  } else if (is_valid_frame(kind, combined)) {
    out.outcome = Outcome::kMessage;
    out.own_delivered = std::equal(combined.begin(), combined.end(), own_input.begin(), own_input.end());
    out.bytes = std::move(combined);
  } else {
    out.outcome = Outcome::kCollision;
  }
  return out;
}

std::uint64_t backoff_delay(unsigned attempt, Rng& rng) {
  if (attempt == 0) throw ProtocolViolation("backoff needs a prior collision");
  const unsigned exponent = std::min(attempt, 6u);
  const std::uint64_t window = std::uint64_t{1} << exponent;
  const std::uint64_t lowest = attempt > 1 ? 2 : 1;
  return rng.between(lowest, window);
}

std::uint64_t schedule_backoff(std::uint64_t round_id, unsigned attempt, Rng& rng) {
  return round_id + backoff_delay(attempt, rng);
}

AnnouncementDecision announce_length(const RecoveryOutcome& announcement) {
  AnnouncementDecision d;
  switch (announcement.outcome) {
    case Outcome::kSilence:
      d.next = AnnouncementDecision::Next::kBaseRound;
      break;
    case Outcome::kCollision:
      d.next = AnnouncementDecision::Next::kBackoff;
      break;
    case Outcome::kMessage: {
      auto length = decode_announcement(announcement.bytes);
      if (!length || *length == 0) {
        d.next = AnnouncementDecision::Next::kBaseRound;
      } else {
        d.next = AnnouncementDecision::Next::kFollowUp;
        d.follow_up_size = *length;
      }
      break;
    }
  }
  return d;
}

RoundState::RoundState(NodeId self, std::vector<NodeId> peers, std::uint64_t round_id,
                       Bytes own_input, RoundKind kind)
    : self_(self), peers_(std::move(peers)), round_id_(round_id), own_input_(std::move(own_input)),
      kind_(kind) {
  std::sort(peers_.begin(), peers_.end());
  if (std::find(peers_.begin(), peers_.end(), self_) != peers_.end()) {
    throw ProtocolViolation("a member is not its own peer");
  }
}

std::vector<Outgoing> RoundState::start(Rng& rng) {
  if (started_) throw ProtocolViolation("round already started");
  started_ = true;
  std::vector<Outgoing> out;
  if (peers_.empty()) {
    // Group of one: nothing to exchange, the input is the round output.
    s_total_.assign(own_input_.size(), 0);
    t_total_ = own_input_;
    xor_into(t_total_, own_input_);
    step_ = RoundStep::kDone;
    outcome_ = recover(t_total_, s_total_, own_input_, kind_);
    return out;
  }
  ShareVector shares = split_shares(own_input_, peers_.size(), rng);
  out.reserve(peers_.size());
  for (std::size_t i = 0; i < peers_.size(); ++i) out.push_back({peers_[i], std::move(shares[i])});
  return out;
}

void RoundState::require_peer(NodeId from) const {
  if (!std::binary_search(peers_.begin(), peers_.end(), from)) {
    throw ProtocolViolation("value from non-member " + std::to_string(from));
  }
}

std::vector<Outgoing> RoundState::on_share(NodeId from, Bytes value) {
  require_peer(from);
  if (step_ != RoundStep::kSharesOut) throw ProtocolViolation("share after step 3 completed");
  if (!received_s_.emplace(from, std::move(value)).second) {
    throw ProtocolViolation("duplicate share from " + std::to_string(from));
  }
  std::vector<Outgoing> out;
  if (received_s_.size() < peers_.size()) return out;

  Accumulation acc = accumulate(received_s_);
  s_total_ = std::move(acc.total);
  step_ = RoundStep::kSCollected;
  for (auto& [member, reply] : acc.replies) out.push_back({member, std::move(reply)});
  return out;
}

std::vector<Outgoing> RoundState::on_accum_s(NodeId from, Bytes value) {
  require_peer(from);
  if (step_ != RoundStep::kSCollected) throw ProtocolViolation("accumulation out of order");
  if (!received_t_.emplace(from, std::move(value)).second) {
    throw ProtocolViolation("duplicate accumulation from " + std::to_string(from));
  }
  std::vector<Outgoing> out;
  if (received_t_.size() < peers_.size()) return out;

  Accumulation acc = accumulate(received_t_);
  t_total_ = std::move(acc.total);
  step_ = RoundStep::kTCollected;
  for (auto& [member, reply] : acc.replies) out.push_back({member, std::move(reply)});
  return out;
}

void RoundState::on_accum_t(NodeId from, Bytes value) {
  require_peer(from);
  if (step_ != RoundStep::kTCollected) throw ProtocolViolation("final accumulation out of order");
  if (!received_final_.emplace(from, std::move(value)).second) {
    throw ProtocolViolation("duplicate final accumulation from " + std::to_string(from));
  }
  if (received_final_.size() < peers_.size()) return;
  step_ = RoundStep::kDone;
  outcome_ = recover(t_total_, s_total_, own_input_, kind_);
}

void RoundState::check_deadline() const {
  const std::map<NodeId, Bytes>* pending = nullptr;
  switch (step_) {
    case RoundStep::kSharesOut: pending = &received_s_; break;
    case RoundStep::kSCollected: pending = &received_t_; break;
    case RoundStep::kTCollected: pending = &received_final_; break;
    case RoundStep::kDone: return;
  }
  for (NodeId p : peers_) {
    if (!pending->contains(p)) {
      throw MissingShare("round " + std::to_string(round_id_) + ": member " +
                         std::to_string(self_) + " has nothing from " + std::to_string(p));
    }
  }
}

}  // namespace privbcast::dcnet
