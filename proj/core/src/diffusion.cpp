#include "privbcast/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace privbcast::diffusion {

std::string to_string(AlphaKind kind) {
  return kind == AlphaKind::kFallback ? "fallback" : "obfuscating";
}

AlphaKind alpha_kind_from_string(const std::string& name) {
  if (name == "fallback") return AlphaKind::kFallback;
  if (name == "obfuscating" || name == "dp") return AlphaKind::kObfuscating;
  throw Error("unknown alpha schedule '" + name + "'");
}

double shell_size(std::uint32_t degree, std::uint32_t h) {
  if (h == 0) return 1.0;
  return static_cast<double>(degree) * std::pow(static_cast<double>(degree - 1), h - 1.0);
}

AlphaSchedule AlphaSchedule::fallback() { return AlphaSchedule{}; }

AlphaSchedule AlphaSchedule::constant(double probability) {
  AlphaSchedule s;
  s.constant_ = std::clamp(probability, 0.0, 1.0);
  return s;
}

AlphaSchedule AlphaSchedule::obfuscating(std::uint32_t degree, std::uint32_t max_timestep) {
  if (degree < 2) throw Error("obfuscating schedule needs degree >= 2");
  AlphaSchedule s;
  s.kind_ = AlphaKind::kObfuscating;
  s.degree_ = degree;
  const std::uint32_t rounds = std::max<std::uint32_t>(max_timestep / 2, 1);

  s.q_.push_back({1.0});
  s.alpha_.push_back({1.0});
  s.q_.push_back({0.0, 1.0});

  for (std::uint32_t r = 1; r < rounds; ++r) {
    const std::vector<double>& q = s.q_[r];
    // Target at radius r + 1 over h = 1..r+1, scaled by the outermost shell
    // so that large radii do not overflow.
    std::vector<double> target(r + 2, 0.0);
    double total = 0.0;
    for (std::uint32_t h = 1; h <= r + 1; ++h) {
      target[h] = std::pow(static_cast<double>(degree - 1), static_cast<double>(h) - (r + 1.0));
      total += target[h];
    }
    for (double& w : target) w /= total;

    std::vector<double> alpha(r + 1, 1.0);
    double cum_q = 0.0;
    double cum_target = 0.0;
    for (std::uint32_t h = 1; h <= r; ++h) {
      cum_q += q[h];
      cum_target += target[h];
      double a = q[h] > 0.0 ? (cum_q - cum_target) / q[h] : 1.0;
      alpha[h] = std::clamp(a, 0.0, 1.0);
    }

    std::vector<double> next(r + 2, 0.0);
    for (std::uint32_t h = 0; h <= r; ++h) {
      next[h] += q[h] * (1.0 - alpha[h]);
      next[h + 1] += q[h] * alpha[h];
    }
    s.alpha_.push_back(std::move(alpha));
    s.q_.push_back(std::move(next));
  }
  return s;
}

double AlphaSchedule::operator()(std::uint32_t timestep, std::uint32_t hops) const {
  if (constant_) return *constant_;
  if (timestep == 0) return 1.0;
  if (kind_ == AlphaKind::kFallback) return 2.0 / (static_cast<double>(timestep) + 2.0);
  std::size_t row = std::min<std::size_t>(timestep / 2, alpha_.size() - 1);
  const auto& a = alpha_[row];
  return hops < a.size() ? a[hops] : a.back();
}

std::span<const double> AlphaSchedule::hop_distribution(std::uint32_t timestep) const {
  if (kind_ != AlphaKind::kObfuscating) throw Error("hop distribution is tabulated for the obfuscating schedule only");
  std::size_t row = timestep / 2;
  if (row >= q_.size()) throw Error("timestep beyond the tabulated range");
  return q_[row];
}

TokenDecision pass_or_keep(const VirtualSourceToken& token, std::span<const NodeId> eligible,
                           const AlphaSchedule& schedule, Rng& rng) {
  TokenDecision d;
  if (eligible.empty()) {
    d.action = TokenDecision::Action::kForcedKeep;
    return d;
  }
  if (!rng.bernoulli(schedule(token.timestep, token.hops))) {
    d.action = TokenDecision::Action::kKeep;
    return d;
  }
  d.action = TokenDecision::Action::kPass;
  d.to = eligible[rng.below(eligible.size())];
  return d;
}

DiffusionState::DiffusionState(std::uint32_t n)
    : infected_(n, 0),
      parent_(n, kNoNode),
      expanded_(n, 0),
      switched_(n, 0),
      last_request_(n, -1),
      children_(n) {}

void DiffusionState::infect(NodeId v, NodeId parent) {
  infected_[v] = 1;
  parent_[v] = parent;
  ++infected_count_;
  if (parent != kNoNode) children_[parent].push_back(v);
}

bool DiffusionState::tree_adjacent(NodeId a, NodeId b) const {
  if (parent_[a] == b || parent_[b] == a) return true;
  return false;
}

std::vector<NodeId> DiffusionState::infected_nodes() const {
  std::vector<NodeId> out;
  out.reserve(infected_count_);
  for (NodeId v = 0; v < infected_.size(); ++v) {
    if (infected_[v]) out.push_back(v);
  }
  return out;
}

DiffusionProcess::DiffusionProcess(const Topology& topology, const AlphaSchedule& schedule,
                                   MessageId message, DiffusionParams params, Rng token_rng,
                                   flood::SeenSet* seen)
    : topology_(topology),
      schedule_(schedule),
      message_(message),
      params_(params),
      rng_(std::move(token_rng)),
      seen_(seen),
      state_(topology.size()) {}

void DiffusionProcess::mark_holder(NodeId v) {
  if (seen_) seen_->mark(v);
}

std::vector<NodeId> DiffusionProcess::tree_neighbors(NodeId node) const {
  std::vector<NodeId> out = state_.children_[node];
  if (state_.parent_[node] != kNoNode) out.push_back(state_.parent_[node]);
  std::sort(out.begin(), out.end());
  return out;
}

void DiffusionProcess::start(NodeId initial, Outbox& out) {
  initial_ = initial;
  token_ = VirtualSourceToken{message_, 0, 0, kNoNode, params_.max_rounds};
  state_.infect(initial, kNoNode);
  state_.last_request_[initial] = 0;
  state_.vs_ = initial;
  mark_holder(initial);
  if (params_.until_coverage) {
    auto dist = topology_.distances_from(initial);
    component_size_ = static_cast<std::size_t>(
        std::count_if(dist.begin(), dist.end(), [](std::uint32_t d) { return d != kUnreachable; }));
  }
  play_round(initial, out);
}

void DiffusionProcess::play_round(NodeId holder, Outbox& out) {
  if (observer_) observer_(RoundSnapshot{token_.timestep, holder, token_.hops, state_});

  if (params_.until_coverage) {
    const bool covered = state_.infected_count_ >= component_size_;
    const bool quiet = state_.infected_count_ == infected_at_last_round_;
    if (covered && (quiet || params_.stop_at_coverage)) {
      finished_ = true;
      return;
    }
    infected_at_last_round_ = state_.infected_count_;
  } else if (token_.timestep >= 2 * params_.max_rounds) {
    finalize(holder, out);
    return;
  }

  std::vector<NodeId> eligible;
  if (state_.expanded(holder)) {
    eligible = tree_neighbors(holder);
  } else {
    auto adj = topology_.neighbors(holder);
    eligible.assign(adj.begin(), adj.end());
  }
  std::erase(eligible, token_.from);

  TokenDecision decision = pass_or_keep(token_, eligible, schedule_, rng_);
  if (decision.action == TokenDecision::Action::kPass) {
    Envelope e;
    e.kind = EnvelopeKind::kTokenPass;
    e.message_id = message_;
    e.src = holder;
    e.dst = decision.to;
    e.payload_size = kControlPayloadBytes;
    e.token = token_;
    e.token.from = holder;
    e.round = token_.timestep + 2;
    state_.vs_ = kNoNode;
    out.send(std::move(e));
    return;
  }

  token_.timestep += 2;
  const auto round = static_cast<std::int64_t>(token_.timestep);
  state_.last_request_[holder] = round;
  if (state_.expanded(holder)) {
    relay(holder, kNoNode, 1, out);
  } else {
    expand(holder, kNoNode, 1, out);
  }
  schedule_next(holder, out);
}

void DiffusionProcess::schedule_next(NodeId holder, Outbox& out) {
  // A round's requests reach the frontier within radius ticks of the start.
  const Tick wait = token_.timestep / 2 + 1;
  out.schedule(wait, Timer{TimerKind::kDiffusionRound, holder, message_, token_.timestep});
}

void DiffusionProcess::on_timer(const Timer& timer, Outbox& out) {
  if (finished_ || timer.node != state_.vs_ || timer.value != token_.timestep) return;
  play_round(timer.node, out);
}

void DiffusionProcess::send_spread(NodeId from, NodeId to, std::uint32_t budget, Outbox& out) {
  Envelope e;
  e.kind = EnvelopeKind::kDiffusionSpread;
  e.message_id = message_;
  e.src = from;
  e.dst = to;
  e.payload_size = params_.payload_size;
  e.round = static_cast<std::uint64_t>(state_.last_request_[from]);
  e.budget = budget;
  out.send(std::move(e));
}

void DiffusionProcess::expand(NodeId node, NodeId except, std::uint32_t budget, Outbox& out) {
  state_.expanded_[node] = 1;
  for (NodeId v : topology_.neighbors(node)) {
    if (v != except) send_spread(node, v, budget, out);
  }
}

void DiffusionProcess::relay(NodeId node, NodeId except, std::uint32_t budget, Outbox& out) {
  for (NodeId v : tree_neighbors(node)) {
    if (v != except) send_spread(node, v, budget, out);
  }
}

void DiffusionProcess::switch_to_flood(NodeId node, NodeId except, Outbox& out) {
  state_.expanded_[node] = 1;
  flood::forward(topology_, node, except, message_, params_.payload_size, out);
}

void DiffusionProcess::finalize(NodeId holder, Outbox& out) {
  finished_ = true;
  if (!params_.final_switch) return;
  state_.switched_[holder] = 1;
  if (!state_.expanded(holder)) {
    switch_to_flood(holder, kNoNode, out);
    return;
  }
  for (NodeId v : tree_neighbors(holder)) {
    Envelope e;
    e.kind = EnvelopeKind::kFinalSwitch;
    e.message_id = message_;
    e.src = holder;
    e.dst = v;
    e.payload_size = kControlPayloadBytes;
    out.send(std::move(e));
  }
}

void DiffusionProcess::on_envelope(const Envelope& env, Outbox& out) {
  const NodeId node = env.dst;
  const NodeId from = env.src;

  if (env.kind == EnvelopeKind::kFinalSwitch) {
    if (!state_.infected(node) || state_.switched_[node]) return;
    state_.switched_[node] = 1;
    if (!state_.expanded(node)) {
      switch_to_flood(node, from, out);
      return;
    }
    for (NodeId v : tree_neighbors(node)) {
      if (v == from) continue;
      Envelope e;
      e.kind = EnvelopeKind::kFinalSwitch;
      e.message_id = message_;
      e.src = node;
      e.dst = v;
      e.payload_size = kControlPayloadBytes;
      out.send(std::move(e));
    }
    return;
  }

  const auto round = static_cast<std::int64_t>(env.round);
  std::uint32_t budget = env.budget;
  const bool token = env.kind == EnvelopeKind::kTokenPass;
  if (token) {
    token_ = env.token;
    token_.timestep += 2;
    token_.hops += 1;
    token_.from = from;
    state_.vs_ = node;
    budget = 2;
  }

  if (!state_.infected(node)) {
    state_.infect(node, from);
    state_.last_request_[node] = round;
    mark_holder(node);
    if (budget > 1) expand(node, from, budget - 1, out);
  } else if (state_.last_request_[node] != round && (token || state_.tree_adjacent(node, from))) {
    state_.last_request_[node] = round;
    if (state_.expanded(node)) {
      relay(node, from, budget, out);
    } else {
      expand(node, from, budget, out);
    }
  }

  if (token) schedule_next(node, out);
}

std::vector<NodeId> ball(const Topology& topology, NodeId center, std::uint32_t radius) {
  auto dist = topology.distances_from(center);
  std::vector<NodeId> out;
  for (NodeId v = 0; v < dist.size(); ++v) {
    if (dist[v] <= radius) out.push_back(v);
  }
  return out;
}

}  // namespace privbcast::diffusion
