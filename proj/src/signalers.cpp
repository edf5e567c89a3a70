#include "adfi/signalers.hpp"

#include <algorithm>

namespace adfi {

bool refresh_due(const PacketSignalerState& state, double sim_time,
                 const PacketSignalerConfig& config) {
  if (state.action_boundary_pending) return true;
  return sim_time - state.last_refresh_time >= config.refresh_interval;
}

int PacketSignalerHub::counter_slot(std::uint64_t tree_id) {
  const auto it = slot_map_.find(tree_id);
  if (it != slot_map_.end()) return it->second;
  const int slot = static_cast<int>(state_.tree_ids.size());
  state_.tree_ids.push_back(tree_id);
  state_.settle_counters.push_back(0);
  slot_map_.emplace(tree_id, slot);
  return slot;
}

int PacketSignalerHub::find_slot(std::uint64_t tree_id) const {
  const auto it = slot_map_.find(tree_id);
  return it == slot_map_.end() ? -1 : it->second;
}

void PacketSignalerHub::load_state(const PacketSignalerState& s) {
  state_ = s;
  slot_map_.clear();
  for (std::size_t i = 0; i < state_.tree_ids.size(); ++i)
    slot_map_.emplace(state_.tree_ids[i], static_cast<int>(i));
  desired_by_slot_.assign(state_.tree_ids.size(), FidelityStatus::High);
}

void PacketSignalerHub::update(double sim_time, const Aabb& inflated_robot_box,
                               const std::vector<PacketView>& packets) {
  const bool refresh = refresh_due(state_, sim_time, config_);
  state_.refresh_active = refresh;
  if (refresh) {
    state_.last_refresh_time = sim_time;
    state_.action_boundary_pending = false;
    for (int& c : state_.settle_counters) c = 0;
    for (const PacketView& p : packets) {
      const int slot = counter_slot(p.tree_id);
      if (slot >= static_cast<int>(desired_by_slot_.size()))
        desired_by_slot_.resize(slot + 1, FidelityStatus::High);
      desired_by_slot_[slot] = FidelityStatus::High;
    }
    return;
  }

  bool all_high_inside = true;
  for (const PacketView& p : packets) {
    const int slot = counter_slot(p.tree_id);
    if (slot >= static_cast<int>(desired_by_slot_.size()))
      desired_by_slot_.resize(slot + 1, FidelityStatus::High);
    const Containment where = classify(p.aabb, inflated_robot_box);
    FidelityStatus want;
    if (where != Containment::Outside) {
      // Promotion is immediate on any box overlap.
      want = FidelityStatus::High;
      state_.settle_counters[slot] = 0;
      if (where == Containment::Intersecting) all_high_inside = false;
    } else if (p.current == FidelityStatus::High) {
      // High and outside: blocks the global Medium->Low condition this step,
      // even when it demotes to Medium right now.
      all_high_inside = false;
      const bool settled = p.linear_speed <= config_.velocity_epsilon_linear &&
                           std::abs(p.angular_speed) <= config_.velocity_epsilon_angular;
      if (settled) {
        ++state_.settle_counters[slot];
        want = state_.settle_counters[slot] >= config_.settle_steps ? FidelityStatus::Medium
                                                                    : FidelityStatus::High;
      } else {
        state_.settle_counters[slot] = 0;
        want = FidelityStatus::High;
      }
    } else {
      // Outside and settled: Medium, lowered to Low below only under the
      // global condition. Low is not sticky, so a High packet straddling the
      // box border pulls neighbors back to respondable.
      want = FidelityStatus::Medium;
      state_.settle_counters[slot] = 0;
    }
    desired_by_slot_[slot] = want;
  }

  if (all_high_inside) {
    for (FidelityStatus& s : desired_by_slot_)
      if (s == FidelityStatus::Medium) s = FidelityStatus::Low;
  }
}

FidelityStatus PacketSignalerHub::desired(std::uint64_t tree_id) const {
  const int slot = find_slot(tree_id);
  if (slot < 0 || slot >= static_cast<int>(desired_by_slot_.size()))
    return FidelityStatus::High;
  return desired_by_slot_[slot];
}

void PlungerSignaler::push(PlungerCommandEvent event) {
  if (event.kind == PlungerCommandEvent::Kind::Retract && !extend_seen_ &&
      std::none_of(pending_.begin(), pending_.end(), [](const PlungerCommandEvent& e) {
        return e.kind == PlungerCommandEvent::Kind::Extend;
      })) {
    throw SignalerProtocolError("plunger Retract without prior Extend");
  }
  pending_.push_back(event);
}

FidelityStatus PlungerSignaler::desired(std::uint64_t step_index) {
  std::size_t consumed = 0;
  for (const PlungerCommandEvent& e : pending_) {
    if (e.step_index > step_index) break;
    current_ = e.kind == PlungerCommandEvent::Kind::Extend ? FidelityStatus::High
                                                           : FidelityStatus::Low;
    if (e.kind == PlungerCommandEvent::Kind::Extend) extend_seen_ = true;
    ++consumed;
  }
  if (consumed > 0)
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(consumed));
  return current_;
}

}  // namespace adfi
