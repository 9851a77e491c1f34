#include "privbcast/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace privbcast::adversary {

AdversarySet make_adversary_set(std::size_t n, std::span<const NodeId> nodes) {
  AdversarySet set;
  set.member.assign(n, false);
  for (NodeId v : nodes) {
    if (v >= n) throw Error("adversary node out of range");
    set.member[v] = true;
  }
  for (NodeId v = 0; v < n; ++v) {
    if (set.member[v]) set.nodes.push_back(v);
  }
  set.fraction = n ? static_cast<double>(set.nodes.size()) / static_cast<double>(n) : 0.0;
  return set;
}

AdversarySet select_adversaries(const Topology& topology, double fraction, Rng& rng,
                                std::span<const NodeId> exclude) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("adversary fraction must be in [0, 1)");
  const std::size_t n = topology.size();
  std::vector<bool> banned(n, false);
  for (NodeId v : exclude) {
    if (v < n) banned[v] = true;
  }
  std::vector<NodeId> pool;
  for (NodeId v = 0; v < n; ++v) {
    if (!banned[v]) pool.push_back(v);
  }
  std::size_t count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  count = std::min(count, pool.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  AdversarySet set = make_adversary_set(n, pool);
  set.fraction = fraction;
  return set;
}

void summarize(EstimateReport& report) {
  double best = -1.0;
  report.guess = kNoNode;
  for (NodeId v = 0; v < report.posterior.size(); ++v) {
    if (report.posterior[v] > best) {
      best = report.posterior[v];
      report.guess = v;
    }
  }
  report.anonymity_set_size = 0;
  report.entropy_bits = 0.0;
  const double cutoff = best / std::exp(1.0);
  for (double p : report.posterior) {
    if (p > 0.0) {
      report.entropy_bits -= p * std::log2(p);
      if (p >= cutoff) ++report.anonymity_set_size;
    }
  }
  if (report.entropy_bits < 0.0) report.entropy_bits = 0.0;
}

std::vector<TraceRecord> observe(const Trace& trace, const AdversarySet& adversaries,
                                 std::optional<MessageId> message) {
  std::vector<TraceRecord> seen;
  for (const auto& r : trace.records()) {
    if (message && r.message_id != *message) continue;
    if (adversaries.contains(r.dst)) seen.push_back(r);
  }
  return seen;
}

namespace {

EstimateReport uniform_over_honest(const AdversarySet& adversaries, std::size_t n) {
  EstimateReport report;
  report.posterior.assign(n, 0.0);
  std::size_t honest = 0;
  for (NodeId v = 0; v < n; ++v) honest += adversaries.contains(v) ? 0 : 1;
  for (NodeId v = 0; v < n; ++v) {
    if (!adversaries.contains(v)) report.posterior[v] = 1.0 / static_cast<double>(honest);
  }
  summarize(report);
  return report;
}

}  // namespace

EstimateReport first_timestamp_estimate(const Trace& trace, const AdversarySet& adversaries,
                                        const Topology& topology,
                                        std::optional<MessageId> message) {
  const std::size_t n = topology.size();
  constexpr Tick kNever = std::numeric_limits<Tick>::max();
  std::vector<Tick> first(n, kNever);
  Tick earliest = kNever;
  int first_phase = 0;
  for (const auto& r : observe(trace, adversaries, message)) {
    if (adversaries.contains(r.src)) continue;
    if (r.time < first[r.src]) first[r.src] = r.time;
    if (r.time < earliest) {
      earliest = r.time;
      first_phase = phase_of(r.kind);
    }
  }
  if (earliest == kNever) return uniform_over_honest(adversaries, n);

  EstimateReport report;
  report.observed = true;
  report.first_phase = first_phase;
  report.posterior.assign(n, 0.0);
  double total = 0.0;
  for (NodeId v = 0; v < n; ++v) {
    if (first[v] == kNever) continue;
    report.posterior[v] = std::exp(-static_cast<double>(first[v] - earliest));
    total += report.posterior[v];
  }
  for (double& p : report.posterior) p /= total;
  summarize(report);
  return report;
}

EstimateReport dc_group_estimate(const AdversarySet& adversaries, std::span<const NodeId> group,
                                 NodeId sender, std::size_t n) {
  EstimateReport report;
  report.observed = true;
  report.first_phase = 1;
  report.posterior.assign(n, 0.0);
  std::vector<NodeId> honest;
  for (NodeId m : group) {
    if (!adversaries.contains(m)) honest.push_back(m);
  }
  if (honest.empty() || adversaries.contains(sender)) {
    report.exposed = true;
    report.posterior.at(sender) = 1.0;
  } else {
    for (NodeId m : honest) report.posterior.at(m) = 1.0 / static_cast<double>(honest.size());
  }
  summarize(report);
  return report;
}

PrecisionReport evaluate(std::span<const Outcome> outcomes) {
  PrecisionReport out;
  out.runs = outcomes.size();
  if (outcomes.empty()) return out;
  double anon = 0.0;
  double entropy = 0.0;
  for (const auto& o : outcomes) {
    if (o.estimate.guess == o.truth) ++out.correct;
    anon += static_cast<double>(o.estimate.anonymity_set_size);
    entropy += o.estimate.entropy_bits;
    ++out.first_phase[static_cast<std::size_t>(std::clamp(o.estimate.first_phase, 0, 3))];
  }
  const double runs = static_cast<double>(out.runs);
  out.precision = static_cast<double>(out.correct) / runs;
  out.mean_anonymity_set = anon / runs;
  out.mean_entropy_bits = entropy / runs;
  return out;
}

}  // namespace privbcast::adversary
