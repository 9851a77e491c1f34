#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "privbcast/rng.hpp"
#include "privbcast/types.hpp"

// DC-net group membership. Group sizes stay within [k, 2k - 1]: a group that
// reaches 2k splits into two groups of k, a group that falls to k - 1
// recruits, merges or dissolves. Nodes may belong to several overlapping
// groups; with the smoothing policy every node belongs to exactly
// `overlap` groups, which makes the origin posterior of every group uniform.
namespace privbcast::groups {

using GroupId = std::uint32_t;

class NetworkTooSmall : public Error {
 public:
  using Error::Error;
};

class WrongSize : public Error {
 public:
  using Error::Error;
};

class NotAMember : public Error {
 public:
  using Error::Error;
};

struct GroupView {
  GroupId id = 0;
  std::set<NodeId> members;
  std::uint32_t k_min = 0;
  Tick created_at = 0;

  std::size_t size() const { return members.size(); }
  bool contains(NodeId n) const { return members.contains(n); }
};

// Uniform random partition of a group of exactly 2k members into two groups
// of k. Throws WrongSize otherwise.
std::pair<GroupView, GroupView> split(const GroupView& group, GroupId first_id, GroupId second_id,
                                      Rng& rng);

// Optional trust-list hook: returns false for groups the node would rather
// not join. When it rejects every candidate the filter is ignored.
using GroupFilter = std::function<bool(NodeId node, const GroupView& group)>;

class MembershipIndex {
 public:
  explicit MembershipIndex(std::uint32_t k, std::uint32_t overlap = 1);

  // Seeded random partition of `nodes`, repeated once per overlap layer.
  // Throws NetworkTooSmall when fewer than k nodes are given.
  static MembershipIndex bootstrap(std::span<const NodeId> nodes, std::uint32_t k,
                                   std::uint32_t overlap, Rng& rng, Tick now = 0);

  // Index over explicitly given groups, ids assigned in order. Sizes are
  // not checked, so structures outside the bounds can be examined too.
  static MembershipIndex from_groups(std::uint32_t k, std::uint32_t overlap,
                                     const std::vector<std::set<NodeId>>& groups);

  // Adds a node to the smallest eligible group(s), splitting any group that
  // reaches 2k. While no group exists the node waits; once k nodes wait they
  // form the first group. Throws NetworkTooSmall if the node is left waiting.
  void join(NodeId node, Rng& rng, Tick now = 0);

  // One more overlapping membership for a node that already has groups.
  void join_additional(NodeId node, Rng& rng, Tick now = 0);

  // Removes the node everywhere and repairs undersized groups: recruit from
  // the largest group (ties: lowest id) if it can spare a member, otherwise
  // merge with a group small enough to stay <= 2k - 1, otherwise dissolve
  // and let the members rejoin.
  void leave(NodeId node, Rng& rng, Tick now = 0);

  // Uniform over the node's groups. Throws NotAMember for an ungrouped node.
  GroupId select_group(NodeId node, Rng& rng) const;

  // P(member is the origin | message emerged from `group`), assuming every
  // node is equally likely to send and picks its group uniformly.
  std::map<NodeId, double> origin_distribution(GroupId group) const;

  const GroupView& group(GroupId id) const;
  const std::map<GroupId, GroupView>& groups() const { return groups_; }
  const std::set<GroupId>& groups_of(NodeId node) const;
  std::size_t membership_count(NodeId node) const;
  const std::set<NodeId>& waiting() const { return waiting_; }
  std::set<NodeId> nodes() const;

  std::uint32_t k() const { return k_; }
  std::uint32_t overlap() const { return overlap_; }

  void set_filter(GroupFilter filter) { filter_ = std::move(filter); }

  // Throws Error describing the first violated invariant: size bounds,
  // bidirectional consistency, or a node with fewer memberships than the
  // overlap policy requires.
  void validate() const;

 private:
  GroupId add_group(std::set<NodeId> members, Tick now);
  void remove_group(GroupId id);
  void add_member(GroupId id, NodeId node);
  void remove_member(GroupId id, NodeId node);
  void split_if_full(GroupId id, Rng& rng, Tick now);
  void repair(GroupId id, Rng& rng, Tick now);
  void top_up(Rng& rng, Tick now);
  std::size_t target_memberships() const;
  std::vector<GroupId> candidates(NodeId node) const;

  std::uint32_t k_;
  std::uint32_t overlap_;
  GroupId next_id_ = 0;
  std::map<GroupId, GroupView> groups_;
  std::map<NodeId, std::set<GroupId>> node_groups_;
  std::set<NodeId> waiting_;
  GroupFilter filter_;
};

}  // namespace privbcast::groups
