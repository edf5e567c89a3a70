#include "adfi/fidelity.hpp"

#include <algorithm>

namespace adfi {

const ObjectFidelityState& LowProfiles::profile(ObjectType type,
                                                FidelityStatus level) const {
  switch (type) {
    case ObjectType::Shape:
      return level == FidelityStatus::Medium ? shape_medium : shape_low;
    case ObjectType::Joint:
      return joint_low;
    case ObjectType::Sensor:
      return sensor_low;
    case ObjectType::Script:
      return script_low;
  }
  return shape_low;
}

LowProfiles LowProfiles::defaults() {
  LowProfiles p;
  p.shape_medium.type = ObjectType::Shape;
  p.shape_medium.dynamic = false;
  p.shape_medium.respondable = true;
  p.shape_low.type = ObjectType::Shape;
  p.shape_low.dynamic = false;
  p.shape_low.respondable = false;
  p.joint_low.type = ObjectType::Joint;
  p.joint_low.mode = JointMode::Passive;
  p.sensor_low.type = ObjectType::Sensor;
  p.sensor_low.handling = SensorHandling::Explicit;
  p.script_low.type = ObjectType::Script;
  p.script_low.enabled = false;
  return p;
}

FidelityManager::FidelityManager(FidelityBackend& backend, LowProfiles profiles)
    : backend_(backend), profiles_(std::move(profiles)) {}

HelperId FidelityManager::register_tree(const Tree& tree, LevelSet levels,
                                        Signaler signaler) {
  for (const ObjectRef& ref : tree.objects) {
    if (owner_.count(ref))
      throw RegistrationError("object already managed by tree " +
                              std::to_string(owner_.at(ref)));
  }
  FidelityHelper helper;
  helper.id = next_id_++;
  helper.tree = tree;
  helper.levels = levels;
  helper.current_status = FidelityStatus::High;
  helper.initial_snapshot.reserve(tree.objects.size());
  for (const ObjectRef& ref : tree.objects) {
    helper.initial_snapshot.push_back(backend_.capture(ref));
    owner_[ref] = tree.id;
  }
  helper_by_tree_[tree.id] = helpers_.size();
  helpers_.push_back(std::move(helper));
  signalers_.push_back(std::move(signaler));
  return helpers_.back().id;
}

void FidelityManager::deregister_tree(std::uint64_t tree_id) {
  for (FidelityHelper& h : helpers_) {
    if (h.tree.id == tree_id && h.active) {
      h.active = false;
      h.cached_high_state.clear();
      for (const ObjectRef& ref : h.tree.objects) owner_.erase(ref);
      return;
    }
  }
  throw LookupError("deregister: unknown tree " + std::to_string(tree_id));
}

FidelityHelper& FidelityManager::helper_mut(HelperId id) {
  for (FidelityHelper& h : helpers_)
    if (h.id == id) return h;
  throw LookupError("unknown helper " + std::to_string(id));
}

FidelityStatus FidelityManager::status(HelperId helper) const {
  for (const FidelityHelper& h : helpers_)
    if (h.id == helper) return h.current_status;
  throw LookupError("unknown helper " + std::to_string(helper));
}

FidelityStatus FidelityManager::status_of_tree(std::uint64_t tree_id) const {
  const auto it = helper_by_tree_.find(tree_id);
  if (it == helper_by_tree_.end())
    throw LookupError("unknown tree " + std::to_string(tree_id));
  return helpers_[it->second].current_status;
}

TickReport FidelityManager::tick(std::uint64_t step_index) {
  TickReport report;
  for (std::size_t i = 0; i < helpers_.size(); ++i) {
    FidelityHelper& h = helpers_[i];
    if (!h.active) continue;
    const SignalResult signal = signalers_[i](step_index);
    if (!signal.ok) {
      // Fail-safe: hold the current status and report.
      report.failures.push_back({h.id, h.tree.id, signal.error});
      continue;
    }
    if (signal.status == h.current_status) continue;
    const FidelityStatus from = h.current_status;
    apply_status(h.id, signal.status);
    report.transitions.push_back({h.id, h.tree.id, from, signal.status, step_index});
  }
  return report;
}

void FidelityManager::apply_status(HelperId helper, FidelityStatus desired) {
  FidelityHelper& h = helper_mut(helper);
  if (h.levels == LevelSet::TwoLevel && desired == FidelityStatus::Medium)
    throw LevelError("Medium is not a valid level for a two-level helper");
  if (desired == h.current_status) return;

  if (h.current_status == FidelityStatus::High) {
    // Lowering from High: cache, then apply the shared profile.
    h.cached_high_state.clear();
    h.cached_high_state.reserve(h.tree.objects.size());
    for (const ObjectRef& ref : h.tree.objects)
      h.cached_high_state.push_back(backend_.capture(ref));
    ++stats_.cache_captures;
    for (const ObjectRef& ref : h.tree.objects)
      backend_.apply(ref, profiles_.profile(ref.type, desired));
  } else if (desired == FidelityStatus::High) {
    // Raising to High: apply the cached state, clear the cache.
    for (std::size_t i = 0; i < h.tree.objects.size(); ++i)
      backend_.apply(h.tree.objects[i], h.cached_high_state[i]);
    h.cached_high_state.clear();
    ++stats_.cache_applies;
  } else {
    // Medium <-> Low: shared profiles only; cache untouched.
    for (const ObjectRef& ref : h.tree.objects)
      backend_.apply(ref, profiles_.profile(ref.type, desired));
  }
  h.current_status = desired;
  ++stats_.transitions;
}

void FidelityManager::reset_all() {
  for (FidelityHelper& h : helpers_) {
    if (!h.active) continue;
    for (std::size_t i = 0; i < h.tree.objects.size(); ++i)
      backend_.apply(h.tree.objects[i], h.initial_snapshot[i]);
    h.cached_high_state.clear();
    h.current_status = FidelityStatus::High;
  }
  stats_ = {};
}

ManagerState FidelityManager::save_state() const { return {helpers_, stats_}; }

void FidelityManager::load_state(const ManagerState& state) {
  if (state.helpers.size() != helpers_.size())
    throw RestoreError("manager load_state: helper count mismatch");
  for (std::size_t i = 0; i < helpers_.size(); ++i) {
    if (state.helpers[i].id != helpers_[i].id)
      throw RestoreError("manager load_state: helper id mismatch");
  }
  owner_.clear();
  helpers_ = state.helpers;
  for (const FidelityHelper& h : helpers_) {
    if (!h.active) continue;
    for (const ObjectRef& ref : h.tree.objects) owner_[ref] = h.tree.id;
  }
  stats_ = state.stats;
}

}  // namespace adfi
