#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "privbcast/groups.hpp"

using namespace privbcast;
using namespace privbcast::groups;

namespace {

std::vector<NodeId> iota_nodes(NodeId n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

GroupView make_group(std::set<NodeId> members, std::uint32_t k) {
  GroupView g;
  g.members = std::move(members);
  g.k_min = k;
  return g;
}

}  // namespace

TEST(Join, SixthMemberSplitsGroupOfFive) {
  Rng rng(1);
  auto nodes = iota_nodes(5);
  auto index = MembershipIndex::bootstrap(nodes, 3, 1, rng);
  ASSERT_EQ(index.groups().size(), 1u);
  EXPECT_EQ(index.groups().begin()->second.size(), 5u);
  index.join(5, rng);
  ASSERT_EQ(index.groups().size(), 2u);
  std::set<NodeId> all;
  for (const auto& [id, g] : index.groups()) {
    EXPECT_EQ(g.size(), 3u);
    all.insert(g.members.begin(), g.members.end());
  }
  EXPECT_EQ(all.size(), 6u);
  index.validate();
}

TEST(Join, TooFewNodes) {
  Rng rng(1);
  MembershipIndex index(3);
  EXPECT_THROW(index.join(0, rng), NetworkTooSmall);
  EXPECT_THROW(index.join(1, rng), NetworkTooSmall);
  EXPECT_NO_THROW(index.join(2, rng));
  EXPECT_EQ(index.groups().size(), 1u);
  index.validate();
}

TEST(Join, SequentialJoinsStayInBounds) {
  Rng rng(42);
  MembershipIndex index(4);
  for (NodeId v = 0; v < 100; ++v) {
    try {
      index.join(v, rng);
    } catch (const NetworkTooSmall&) {
      ASSERT_LT(v, 3u);
    }
    if (!index.groups().empty()) index.validate();
  }
  for (const auto& [id, g] : index.groups()) {
    EXPECT_GE(g.size(), 4u);
    EXPECT_LE(g.size(), 7u);
  }
  EXPECT_EQ(index.nodes().size(), 100u);
}

TEST(Split, PartitionOfSixIntoThrees) {
  Rng rng(3);
  auto [a, b] = split(make_group({0, 1, 2, 3, 4, 5}, 3), 10, 11, rng);
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(b.size(), 3u);
  std::set<NodeId> uni = a.members;
  uni.insert(b.members.begin(), b.members.end());
  EXPECT_EQ(uni.size(), 6u);
  EXPECT_EQ(a.id, 10u);
  EXPECT_EQ(b.id, 11u);
}

TEST(Split, WrongSize) {
  Rng rng(3);
  EXPECT_THROW(split(make_group({0, 1, 2, 3, 4}, 3), 0, 1, rng), WrongSize);
}

TEST(Split, CoOccurrenceMatchesUniformPartition) {
  // A given pair lands together with probability (k - 1) / (2k - 1).
  const std::uint32_t k = 3;
  const int trials = 20'000;
  int together = 0;
  for (int seed = 0; seed < trials; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    auto [a, b] = split(make_group({0, 1, 2, 3, 4, 5}, k), 0, 1, rng);
    together += (a.contains(0) && a.contains(1)) || (b.contains(0) && b.contains(1));
  }
  const double p = (k - 1.0) / (2.0 * k - 1.0);
  EXPECT_NEAR(together / double(trials), p, 4 * std::sqrt(p * (1 - p) / trials));
}

TEST(Leave, UndersizedGroupRecruitsFromLargest) {
  Rng rng(5);
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2}, {3, 4, 5, 6, 7}});
  index.leave(0, rng);
  index.validate();
  EXPECT_EQ(index.group(0).size(), 3u);
  EXPECT_EQ(index.group(1).size(), 4u);
}

TEST(Leave, NoActionAboveMinimum) {
  Rng rng(5);
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2, 3}, {4, 5, 6}});
  index.leave(0, rng);
  EXPECT_EQ(index.group(0).members, (std::set<NodeId>{1, 2, 3}));
  EXPECT_EQ(index.group(1).members, (std::set<NodeId>{4, 5, 6}));
}

TEST(Leave, AllAtMinimumDissolvesAndRejoins) {
  // Two groups of exactly k: recruiting would break the donor and merging
  // would reach 2k, so the group dissolves and its members rejoin.
  Rng rng(5);
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2}, {3, 4, 5}});
  index.leave(0, rng);
  index.validate();
  ASSERT_EQ(index.groups().size(), 1u);
  EXPECT_EQ(index.groups().begin()->second.members, (std::set<NodeId>{1, 2, 3, 4, 5}));
}

TEST(Leave, MergeWhenUnionFits) {
  Rng rng(5);
  auto index = MembershipIndex::from_groups(4, 1, {{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11}});
  index.leave(0, rng);
  index.validate();
  // Merged 3 + 4 = 7 <= 2k - 1.
  ASSERT_EQ(index.groups().size(), 2u);
  std::vector<std::size_t> sizes;
  for (const auto& [id, g] : index.groups()) sizes.push_back(g.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 7}));
}

TEST(Leave, ExhaustiveSmallCases) {
  // Every leave from every bounded two- or three-group layout of k = 2
  // leaves a valid index.
  const std::uint32_t k = 2;
  std::vector<std::vector<std::size_t>> layouts;
  for (std::size_t a = k; a <= 2 * k - 1; ++a)
    for (std::size_t b = k; b <= 2 * k - 1; ++b) {
      layouts.push_back({a, b});
      for (std::size_t c = k; c <= 2 * k - 1; ++c) layouts.push_back({a, b, c});
    }
  for (const auto& layout : layouts) {
    std::vector<std::set<NodeId>> gs;
    NodeId next = 0;
    for (auto size : layout) {
      std::set<NodeId> g;
      for (std::size_t i = 0; i < size; ++i) g.insert(next++);
      gs.push_back(g);
    }
    for (NodeId victim = 0; victim < next; ++victim) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Rng rng(seed);
        auto index = MembershipIndex::from_groups(k, 1, gs);
        index.leave(victim, rng);
        EXPECT_NO_THROW(index.validate());
        EXPECT_EQ(index.nodes().size(), next - 1);
      }
    }
  }
}

TEST(Churn, InvariantsHoldOverTenThousandOperations) {
  for (std::uint32_t overlap : {1u, 2u}) {
    Rng rng(77 + overlap);
    auto nodes = iota_nodes(40);
    auto index = MembershipIndex::bootstrap(nodes, 4, overlap, rng);
    std::set<NodeId> present(nodes.begin(), nodes.end());
    NodeId next = 40;
    for (int op = 0; op < 10'000; ++op) {
      if (present.size() > 12 && (rng.bernoulli(0.5) || present.size() > 80)) {
        auto it = present.begin();
        std::advance(it, static_cast<long>(rng.below(present.size())));
        index.leave(*it, rng);
        present.erase(it);
      } else {
        index.join(next, rng);
        present.insert(next++);
      }
      ASSERT_NO_THROW(index.validate()) << "op " << op;
      for (const auto& [id, g] : index.groups()) {
        ASSERT_GE(g.size(), 4u);
        ASSERT_LE(g.size(), 7u);
      }
    }
  }
}

TEST(SelectGroup, SingleGroup) {
  Rng rng(1);
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2}});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(index.select_group(0, rng), 0u);
}

TEST(SelectGroup, TwoGroupsHalfEach) {
  Rng rng(9);
  auto index = MembershipIndex::from_groups(3, 2, {{0, 1, 2}, {0, 3, 4}});
  int first = 0;
  for (int i = 0; i < 10'000; ++i) first += index.select_group(0, rng) == 0;
  EXPECT_NEAR(first / 10'000.0, 0.5, 0.02);
}

TEST(SelectGroup, UngroupedNode) {
  Rng rng(1);
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2}});
  EXPECT_THROW(index.select_group(9, rng), NotAMember);
}

TEST(OriginDistribution, OverlapSkewExample) {
  // A=0 in one group, B=1 and C=2 in two groups each.
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2}, {1, 5, 6}, {2, 7, 8}});
  auto d = index.origin_distribution(0);
  EXPECT_DOUBLE_EQ(d.at(0), 0.5);
  EXPECT_DOUBLE_EQ(d.at(1), 0.25);
  EXPECT_DOUBLE_EQ(d.at(2), 0.25);
}

TEST(OriginDistribution, UniformWithSingleMemberships) {
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2, 3}});
  for (const auto& [m, p] : index.origin_distribution(0)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(OriginDistribution, MixedMemberships) {
  // Memberships (1, 1, 2, 4) give weights (1, 1, 1/2, 1/4).
  auto index = MembershipIndex::from_groups(
      2, 1, {{0, 1, 2, 3}, {2, 10}, {3, 11}, {3, 12}, {3, 13}});
  auto d = index.origin_distribution(0);
  EXPECT_NEAR(d.at(0), 4.0 / 11, 1e-12);
  EXPECT_NEAR(d.at(1), 4.0 / 11, 1e-12);
  EXPECT_NEAR(d.at(2), 2.0 / 11, 1e-12);
  EXPECT_NEAR(d.at(3), 1.0 / 11, 1e-12);
}

TEST(OriginDistribution, SmoothingMakesItUniform) {
  // With every node in exactly c groups the posterior is flat.
  for (std::uint32_t c : {1u, 2u, 3u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      auto nodes = iota_nodes(60);
      auto index = MembershipIndex::bootstrap(nodes, 4, c, rng);
      index.validate();
      for (const auto& [id, g] : index.groups()) {
        auto d = index.origin_distribution(id);
        double lo = 1.0, hi = 0.0, sum = 0.0;
        for (const auto& [m, p] : d) {
          lo = std::min(lo, p);
          hi = std::max(hi, p);
          sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_LE(hi / lo, 1.05);
      }
    }
  }
}

TEST(Filter, PrefersTrustedGroupsAndFallsBack) {
  Rng rng(1);
  auto index = MembershipIndex::from_groups(3, 1, {{0, 1, 2}, {3, 4, 5}});
  index.set_filter([](NodeId, const GroupView& g) { return g.contains(4); });
  index.join(10, rng);
  EXPECT_TRUE(index.group(1).contains(10));
  index.set_filter([](NodeId, const GroupView&) { return false; });
  EXPECT_NO_THROW(index.join(11, rng));
  EXPECT_EQ(index.membership_count(11), 1u);
}

TEST(Bootstrap, DeterministicAndBounded) {
  auto nodes = iota_nodes(103);
  Rng a(5), b(5);
  auto x = MembershipIndex::bootstrap(nodes, 6, 1, a);
  auto y = MembershipIndex::bootstrap(nodes, 6, 1, b);
  ASSERT_EQ(x.groups().size(), y.groups().size());
  for (const auto& [id, g] : x.groups()) EXPECT_EQ(g.members, y.group(id).members);
  x.validate();
  EXPECT_THROW(MembershipIndex::bootstrap(iota_nodes(3), 4, 1, a), NetworkTooSmall);
}
