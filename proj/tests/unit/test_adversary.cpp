#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "harness.hpp"
#include "privbcast/adversary.hpp"
#include "privbcast/runner.hpp"

using namespace privbcast;
using namespace privbcast::adversary;

namespace {

Trace flood_trace(const Topology& t, NodeId origin) {
  RunConfig cfg;
  cfg.mode = protocol::Mode::kFloodOnly;
  protocol::ProtocolConfig pc;
  pc.mode = protocol::Mode::kFloodOnly;
  protocol::ProtocolEngine engine(t, nullptr, pc, 1);
  Simulator sim;
  engine.originate(origin, Bytes(8), sim);
  sim.run(engine);
  return sim.take_trace();
}

}  // namespace

TEST(Select, SizeAndExclusion) {
  Topology t = generate_topology(TopologySpec::regular(1000, 8), 1);
  Rng rng(1);
  EXPECT_EQ(select_adversaries(t, 0.0, rng).size(), 0u);
  std::vector<NodeId> origin{5};
  for (int i = 0; i < 50; ++i) {
    auto a = select_adversaries(t, 0.2, rng, origin);
    ASSERT_EQ(a.size(), 200u);
    ASSERT_FALSE(a.contains(5));
    ASSERT_TRUE(std::is_sorted(a.nodes.begin(), a.nodes.end()));
  }
  EXPECT_THROW(select_adversaries(t, 1.0, rng), Error);
  EXPECT_THROW(select_adversaries(t, -0.1, rng), Error);
}

TEST(Select, ClampedToEligiblePool) {
  Topology t = privbcast::testing::path(10);
  Rng rng(1);
  std::vector<NodeId> exclude{0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(select_adversaries(t, 0.9, rng, exclude).size(), 2u);
}

TEST(FirstTimestamp, NeighborsOfOriginFindIt) {
  Topology t = generate_topology(TopologySpec::regular(200, 6), 3);
  for (NodeId origin : {0u, 17u, 150u}) {
    auto nb = t.neighbors(origin);
    auto adv = make_adversary_set(t.size(), std::vector<NodeId>(nb.begin(), nb.end()));
    auto est = first_timestamp_estimate(flood_trace(t, origin), adv, t);
    EXPECT_EQ(est.guess, origin);
    EXPECT_TRUE(est.observed);
    EXPECT_EQ(est.first_phase, 3);
  }
}

TEST(FirstTimestamp, LineGuessesNeighborOnOriginSide) {
  Topology t = privbcast::testing::path(20);
  auto adv = make_adversary_set(20, std::vector<NodeId>{8});
  auto est = first_timestamp_estimate(flood_trace(t, 3), adv, t);
  EXPECT_EQ(est.guess, 7u);
  EXPECT_NE(est.guess, 3u);
  EXPECT_DOUBLE_EQ(est.posterior[7], 1.0);
  EXPECT_EQ(est.anonymity_set_size, 1u);
  EXPECT_DOUBLE_EQ(est.entropy_bits, 0.0);
}

TEST(FirstTimestamp, ExponentialWeights) {
  Topology t(4, {{0, 3}, {1, 3}, {2, 3}});
  Trace trace;
  trace.append({2, EnvelopeKind::kFlood, 0, 3, 1, 16});
  trace.append({3, EnvelopeKind::kFlood, 1, 3, 1, 16});
  trace.append({5, EnvelopeKind::kFlood, 2, 3, 1, 16});
  trace.append({6, EnvelopeKind::kFlood, 0, 3, 1, 16});
  auto adv = make_adversary_set(4, std::vector<NodeId>{3});
  auto est = first_timestamp_estimate(trace, adv, t);
  const double z = 1 + std::exp(-1.0) + std::exp(-3.0);
  EXPECT_NEAR(est.posterior[0], 1 / z, 1e-12);
  EXPECT_NEAR(est.posterior[1], std::exp(-1.0) / z, 1e-12);
  EXPECT_NEAR(est.posterior[2], std::exp(-3.0) / z, 1e-12);
  EXPECT_EQ(est.posterior[3], 0.0);
  // Node 1 sits exactly at max/e.
  EXPECT_EQ(est.anonymity_set_size, 2u);
}

TEST(FirstTimestamp, NoObservationIsUniformOverHonest) {
  Topology t = privbcast::testing::path(16);
  auto adv = make_adversary_set(16, std::vector<NodeId>{});
  auto est = first_timestamp_estimate(Trace{}, adv, t);
  EXPECT_FALSE(est.observed);
  EXPECT_EQ(est.first_phase, 0);
  EXPECT_NEAR(est.entropy_bits, 4.0, 1e-12);
  EXPECT_EQ(est.anonymity_set_size, 16u);
  for (double p : est.posterior) EXPECT_DOUBLE_EQ(p, 1.0 / 16);

  auto some = make_adversary_set(16, std::vector<NodeId>{0, 1, 2, 3, 4, 5, 6, 7});
  auto est2 = first_timestamp_estimate(Trace{}, some, t);
  EXPECT_NEAR(est2.entropy_bits, 3.0, 1e-12);
  EXPECT_EQ(est2.posterior[0], 0.0);
}

TEST(FirstTimestamp, ReadsOnlyAdversaryInbox) {
  Topology t = generate_topology(TopologySpec::regular(100, 4), 2);
  Rng rng(4);
  auto adv = select_adversaries(t, 0.2, rng);
  Trace full = flood_trace(t, 9);
  // Strip every record the coalition could not have seen; the estimate must not move.
  Trace visible;
  for (const auto& r : observe(full, adv)) visible.append(r);
  for (const auto& r : observe(full, adv)) ASSERT_TRUE(adv.contains(r.dst));
  auto a = first_timestamp_estimate(full, adv, t);
  auto b = first_timestamp_estimate(visible, adv, t);
  EXPECT_EQ(a.posterior, b.posterior);
  EXPECT_EQ(a.guess, b.guess);
}

TEST(DcGroup, HonestMembersShareMass) {
  std::vector<NodeId> group{10, 11, 12, 13, 14};
  auto adv = make_adversary_set(20, std::vector<NodeId>{11, 13});
  auto est = dc_group_estimate(adv, group, 12, 20);
  for (NodeId m : {10u, 12u, 14u}) EXPECT_DOUBLE_EQ(est.posterior[m], 1.0 / 3);
  EXPECT_EQ(est.anonymity_set_size, 3u);
  EXPECT_NEAR(est.entropy_bits, std::log2(3.0), 1e-12);
  EXPECT_FALSE(est.exposed);
}

TEST(DcGroup, CorruptSenderOrNoHonestIsPointMass) {
  std::vector<NodeId> group{0, 1, 2};
  auto corrupt = make_adversary_set(5, std::vector<NodeId>{1});
  auto est = dc_group_estimate(corrupt, group, 1, 5);
  EXPECT_TRUE(est.exposed);
  EXPECT_EQ(est.guess, 1u);
  EXPECT_DOUBLE_EQ(est.posterior[1], 1.0);

  auto all = make_adversary_set(5, std::vector<NodeId>{0, 1, 2});
  EXPECT_EQ(dc_group_estimate(all, group, 0, 5).guess, 0u);
}

TEST(Evaluate, CountsAndMeans) {
  auto adv = make_adversary_set(4, std::vector<NodeId>{});
  Topology t = privbcast::testing::path(4);
  std::vector<Outcome> outcomes;
  auto uniform = first_timestamp_estimate(Trace{}, adv, t);
  outcomes.push_back({uniform, 0});
  outcomes.push_back({uniform, 3});
  auto report = evaluate(outcomes);
  EXPECT_EQ(report.runs, 2u);
  EXPECT_EQ(report.correct, 1u);
  EXPECT_DOUBLE_EQ(report.precision, 0.5);
  EXPECT_DOUBLE_EQ(report.mean_anonymity_set, 4.0);
  EXPECT_DOUBLE_EQ(report.mean_entropy_bits, 2.0);
  EXPECT_EQ(report.first_phase[0], 2u);
  EXPECT_EQ(evaluate({}).runs, 0u);
}

TEST(Evaluate, RandomGuessIsChance) {
  const std::size_t n = 20;
  Rng rng(8);
  std::vector<Outcome> outcomes;
  for (int i = 0; i < 20'000; ++i) {
    EstimateReport e;
    e.posterior.assign(n, 0.0);
    e.posterior[rng.below(n)] = 1.0;
    summarize(e);
    outcomes.push_back({e, static_cast<NodeId>(rng.below(n))});
  }
  EXPECT_NEAR(evaluate(outcomes).precision, 1.0 / n, 0.006);
}

TEST(Evaluate, FloodPrecisionGrowsWithFraction) {
  RunConfig cfg;
  cfg.topology = TopologySpec::regular(300, 6);
  cfg.topology_seed = 1;
  cfg.mode = protocol::Mode::kFloodOnly;
  double previous = -1.0;
  for (double f : {0.05, 0.1, 0.2, 0.35}) {
    cfg.adversary_fraction = f;
    std::size_t correct = 0;
    for (std::uint64_t s = 1; s <= 200; ++s) correct += run(cfg, s).report.correct;
    double precision = correct / 200.0;
    EXPECT_GE(precision, previous) << f;
    previous = precision;
  }
}
