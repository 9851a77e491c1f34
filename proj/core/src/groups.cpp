#include "privbcast/groups.hpp"

#include <algorithm>
#include <string>

namespace privbcast::groups {

namespace {
const std::set<GroupId> kNoGroups;
}

std::pair<GroupView, GroupView> split(const GroupView& group, GroupId first_id, GroupId second_id,
                                      Rng& rng) {
  const std::size_t k = group.k_min;
  if (group.size() != 2 * k) {
    throw WrongSize("split needs exactly " + std::to_string(2 * k) + " members, group " +
                    std::to_string(group.id) + " has " + std::to_string(group.size()));
  }
  std::vector<NodeId> members(group.members.begin(), group.members.end());
  rng.shuffle(std::span(members));
  GroupView a{first_id, {}, group.k_min, group.created_at};
  GroupView b{second_id, {}, group.k_min, group.created_at};
  a.members.insert(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
  b.members.insert(members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
  return {std::move(a), std::move(b)};
}

MembershipIndex::MembershipIndex(std::uint32_t k, std::uint32_t overlap) : k_(k), overlap_(overlap) {
  if (k_ == 0) throw Error("group minimum size k must be >= 1");
  if (overlap_ == 0) throw Error("overlap must be >= 1");
}

MembershipIndex MembershipIndex::bootstrap(std::span<const NodeId> nodes, std::uint32_t k,
                                           std::uint32_t overlap, Rng& rng, Tick now) {
  MembershipIndex index(k, overlap);
  if (nodes.size() < k) {
    throw NetworkTooSmall("need at least k=" + std::to_string(k) + " nodes, have " +
                          std::to_string(nodes.size()));
  }
  const std::size_t group_count = nodes.size() / k;
  for (std::uint32_t layer = 0; layer < overlap; ++layer) {
    std::vector<NodeId> order(nodes.begin(), nodes.end());
    rng.shuffle(std::span(order));
    // group_count groups of k, the remainder (< k) spread one per group.
    std::vector<std::set<NodeId>> parts(group_count);
    std::size_t pos = 0;
    for (auto& part : parts) {
      for (std::uint32_t i = 0; i < k; ++i) part.insert(order[pos++]);
    }
    for (std::size_t g = 0; pos < order.size(); ++pos, g = (g + 1) % group_count) {
      parts[g].insert(order[pos]);
    }
    for (auto& part : parts) index.add_group(std::move(part), now);
  }
  return index;
}

MembershipIndex MembershipIndex::from_groups(std::uint32_t k, std::uint32_t overlap,
                                             const std::vector<std::set<NodeId>>& groups) {
  MembershipIndex index(k, overlap);
  for (const auto& g : groups) index.add_group(g, 0);
  return index;
}

GroupId MembershipIndex::add_group(std::set<NodeId> members, Tick now) {
  GroupId id = next_id_++;
  GroupView view{id, {}, k_, now};
  groups_.emplace(id, std::move(view));
  for (NodeId n : members) add_member(id, n);
  return id;
}

void MembershipIndex::remove_group(GroupId id) {
  auto it = groups_.find(id);
  if (it == groups_.end()) return;
  for (NodeId n : it->second.members) node_groups_[n].erase(id);
  groups_.erase(it);
}

void MembershipIndex::add_member(GroupId id, NodeId node) {
  groups_.at(id).members.insert(node);
  node_groups_[node].insert(id);
  waiting_.erase(node);
}

void MembershipIndex::remove_member(GroupId id, NodeId node) {
  groups_.at(id).members.erase(node);
  node_groups_[node].erase(id);
}

const GroupView& MembershipIndex::group(GroupId id) const {
  auto it = groups_.find(id);
  if (it == groups_.end()) throw Error("unknown group " + std::to_string(id));
  return it->second;
}

const std::set<GroupId>& MembershipIndex::groups_of(NodeId node) const {
  auto it = node_groups_.find(node);
  return it == node_groups_.end() ? kNoGroups : it->second;
}

std::size_t MembershipIndex::membership_count(NodeId node) const { return groups_of(node).size(); }

std::set<NodeId> MembershipIndex::nodes() const {
  std::set<NodeId> out(waiting_.begin(), waiting_.end());
  for (const auto& [n, gs] : node_groups_) out.insert(n);
  return out;
}

std::size_t MembershipIndex::target_memberships() const {
  return std::min<std::size_t>(overlap_, groups_.size());
}

std::vector<GroupId> MembershipIndex::candidates(NodeId node) const {
  std::vector<GroupId> all;
  for (const auto& [id, g] : groups_) {
    if (!g.contains(node)) all.push_back(id);
  }
  std::vector<GroupId> preferred;
  if (filter_) {
    for (GroupId id : all) {
      if (filter_(node, groups_.at(id))) preferred.push_back(id);
    }
  }
  std::vector<GroupId>& out = preferred.empty() ? all : preferred;
  std::stable_sort(out.begin(), out.end(), [this](GroupId a, GroupId b) {
    return groups_.at(a).size() < groups_.at(b).size();
  });
  return std::move(out);
}

void MembershipIndex::split_if_full(GroupId id, Rng& rng, Tick now) {
  const GroupView& g = groups_.at(id);
  if (g.size() < 2 * static_cast<std::size_t>(k_)) return;
  auto [a, b] = split(g, 0, 0, rng);
  remove_group(id);
  add_group(std::move(a.members), now);
  add_group(std::move(b.members), now);
}

void MembershipIndex::join(NodeId node, Rng& rng, Tick now) {
  if (!groups_of(node).empty()) {
    join_additional(node, rng, now);
    return;
  }
  if (groups_.empty()) {
    waiting_.insert(node);
    if (waiting_.size() < k_) {
      throw NetworkTooSmall("only " + std::to_string(waiting_.size()) + " node(s) known, k=" +
                            std::to_string(k_) + "; node " + std::to_string(node) + " waits");
    }
    std::set<NodeId> founders = std::move(waiting_);
    waiting_.clear();
    add_group(std::move(founders), now);
    return;
  }
  const std::size_t want = target_memberships();
  for (std::size_t i = 0; i < want; ++i) join_additional(node, rng, now);
}

void MembershipIndex::join_additional(NodeId node, Rng& rng, Tick now) {
  auto options = candidates(node);
  if (options.empty()) return;
  GroupId chosen = options.front();
  add_member(chosen, node);
  split_if_full(chosen, rng, now);
}

void MembershipIndex::repair(GroupId id, Rng& rng, Tick) {
  while (groups_.contains(id) && groups_.at(id).size() < k_) {
    GroupView& needy = groups_.at(id);

    // Recruit from the largest group that can spare a member.
    GroupId donor = id;
    std::size_t donor_size = 0;
    for (const auto& [gid, g] : groups_) {
      if (gid == id || g.size() <= k_) continue;
      bool has_candidate = std::any_of(g.members.begin(), g.members.end(),
                                       [&](NodeId m) { return !needy.contains(m); });
      if (has_candidate && g.size() > donor_size) {
        donor = gid;
        donor_size = g.size();
      }
    }
    if (donor != id) {
      std::vector<NodeId> movable;
      for (NodeId m : groups_.at(donor).members) {
        if (!needy.contains(m)) movable.push_back(m);
      }
      NodeId recruit = movable[rng.below(movable.size())];
      remove_member(donor, recruit);
      add_member(id, recruit);
      continue;
    }

    // Merge into the smallest group that keeps the union within bounds.
    GroupId partner = id;
    std::size_t partner_union = 0;
    for (const auto& [gid, g] : groups_) {
      if (gid == id) continue;
      std::set<NodeId> merged = g.members;
      merged.insert(needy.members.begin(), needy.members.end());
      if (merged.size() <= 2 * static_cast<std::size_t>(k_) - 1 &&
          (partner == id || merged.size() < partner_union)) {
        partner = gid;
        partner_union = merged.size();
      }
    }
    if (partner != id) {
      std::vector<NodeId> movers(needy.members.begin(), needy.members.end());
      remove_group(id);
      for (NodeId m : movers) add_member(partner, m);
      return;
    }

    // Dissolve; members rejoin through top_up, or wait if nothing is left.
    remove_group(id);
    if (groups_.empty()) {
      for (const auto& [n, gs] : node_groups_) waiting_.insert(n);
      node_groups_.clear();
    }
    return;
  }
}

void MembershipIndex::top_up(Rng& rng, Tick now) {
  for (;;) {
    const std::size_t target = target_memberships();
    std::vector<NodeId> short_nodes;
    for (const auto& [n, gs] : node_groups_) {
      if (gs.size() < target) short_nodes.push_back(n);
    }
    if (short_nodes.empty()) return;
    bool progressed = false;
    for (NodeId n : short_nodes) {
      if (groups_of(n).size() >= target_memberships()) continue;
      std::size_t before = groups_of(n).size();
      join_additional(n, rng, now);
      progressed |= groups_of(n).size() > before || target_memberships() != target;
    }
    if (!progressed) return;
  }
}

void MembershipIndex::leave(NodeId node, Rng& rng, Tick now) {
  if (waiting_.erase(node) > 0) return;
  auto it = node_groups_.find(node);
  if (it == node_groups_.end()) throw NotAMember("node " + std::to_string(node) + " is not a member");
  std::vector<GroupId> affected(it->second.begin(), it->second.end());
  for (GroupId g : affected) remove_member(g, node);
  node_groups_.erase(node);
  for (GroupId g : affected) {
    if (groups_.contains(g) && groups_.at(g).size() < k_) repair(g, rng, now);
  }
  top_up(rng, now);
}

GroupId MembershipIndex::select_group(NodeId node, Rng& rng) const {
  const auto& gs = groups_of(node);
  if (gs.empty()) throw NotAMember("node " + std::to_string(node) + " belongs to no group");
  auto it = gs.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(gs.size())));
  return *it;
}

std::map<NodeId, double> MembershipIndex::origin_distribution(GroupId id) const {
  const GroupView& g = group(id);
  std::map<NodeId, double> weights;
  double total = 0.0;
  for (NodeId m : g.members) {
    double w = 1.0 / static_cast<double>(membership_count(m));
    weights[m] = w;
    total += w;
  }
  for (auto& [m, w] : weights) w /= total;
  return weights;
}

void MembershipIndex::validate() const {
  const std::size_t lo = k_;
  const std::size_t hi = 2 * static_cast<std::size_t>(k_) - 1;
  for (const auto& [id, g] : groups_) {
    if (g.id != id) throw Error("group id mismatch for " + std::to_string(id));
    if (g.size() < lo || g.size() > hi) {
      throw Error("group " + std::to_string(id) + " has size " + std::to_string(g.size()) +
                  " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    for (NodeId m : g.members) {
      if (!groups_of(m).contains(id)) {
        throw Error("node " + std::to_string(m) + " missing back-reference to group " +
                    std::to_string(id));
      }
    }
  }
  const std::size_t target = target_memberships();
  for (const auto& [n, gs] : node_groups_) {
    for (GroupId id : gs) {
      auto it = groups_.find(id);
      if (it == groups_.end() || !it->second.contains(n)) {
        throw Error("node " + std::to_string(n) + " lists group " + std::to_string(id) +
                    " which does not list it");
      }
    }
    if (gs.size() != target) {
      throw Error("node " + std::to_string(n) + " is in " + std::to_string(gs.size()) +
                  " group(s), expected " + std::to_string(target));
    }
    if (waiting_.contains(n)) throw Error("node " + std::to_string(n) + " both grouped and waiting");
  }
  if (!groups_.empty() && !waiting_.empty()) throw Error("nodes waiting while groups exist");
}

}  // namespace privbcast::groups
