#include "coordsem/lifecycle.hpp"

namespace coordsem::lifecycle {

using Kind = LifecycleError::Kind;

StateView::StateView(const model::CompiledType& t) : type_(&t), m_(t.states.size(), StateMarking::Waiting), active_(t.start) {
    m_[t.start.idx()] = StateMarking::Activated;
}

void StateView::set(StateIdx s, StateMarking to, std::vector<StateChange>& out) {
    auto& cur = m_[s.idx()];
    if (cur == to) return;
    out.push_back({s, cur, to});
    cur = to;
}

void StateView::activate(StateIdx target, std::vector<StateChange>& out) {
    const auto& t = *type_;
    StateIdx source = active_;
    set(source, StateMarking::Confirmed, out);
    set(target, StateMarking::Activated, out);
    // exclusive alternatives: whatever is only reachable through a sibling branch
    for (StateIdx sib : t.succ[source.idx()]) {
        if (sib == target) continue;
        auto skip = [&](StateIdx x) {
            if (x == target || t.reach[target.idx()][x.idx()]) return;
            if (m_[x.idx()] == StateMarking::Waiting) set(x, StateMarking::Skipped, out);
        };
        skip(sib);
        for (std::size_t x = 0; x < t.states.size(); ++x)
            if (t.reach[sib.idx()][x]) skip(StateIdx(x));
    }
    active_ = target;
    pending_.reset();
}

std::vector<StateChange> StateView::commit(StateIdx target, bool coordinated) {
    const auto& t = *type_;
    if (!t.is_forward(active_, target))
        throw LifecycleError(Kind::NotEnabled, t.name + ": no transition " + t.states[active_.idx()] + " -> " + t.states[target.idx()]);
    std::vector<StateChange> out;
    if (pending_) {
        if (*pending_ == target) return out;
        throw LifecycleError(Kind::PendingBlocks, t.name + ": state " + t.states[pending_->idx()] + " is pending");
    }
    ++version_;
    if (coordinated) {
        set(target, StateMarking::Pending, out);
        pending_ = target;
    } else {
        activate(target, out);
    }
    return out;
}

std::vector<StateChange> StateView::promote(StateIdx s) {
    if (!pending_ || *pending_ != s) throw LifecycleError(Kind::NotPending, type_->name + ": " + type_->states[s.idx()] + " is not pending");
    std::vector<StateChange> out;
    ++version_;
    activate(s, out);
    return out;
}

std::vector<StateChange> StateView::backwards(StateIdx target) {
    const auto& t = *type_;
    bool from_active = t.is_backward(active_, target);
    bool from_pending = pending_ && t.is_backward(*pending_, target);
    if (!from_active && !from_pending)
        throw LifecycleError(Kind::NotBackwards, t.name + ": no backwards transition to " + t.states[target.idx()]);
    std::vector<StateChange> out;
    ++version_;
    for (std::size_t x = 0; x < t.states.size(); ++x)
        if (t.reach[target.idx()][x]) set(StateIdx(x), StateMarking::Waiting, out);
    set(target, StateMarking::Activated, out);
    active_ = target;
    pending_.reset();
    return out;
}

std::optional<StateIdx> StateView::auto_successor() const {
    const auto& t = *type_;
    if (pending_ || !t.activity_free[active_.idx()] || t.succ[active_.idx()].size() != 1) return std::nullopt;
    return t.succ[active_.idx()].front();
}

void StateView::assign(const std::vector<StateMarking>& m, std::uint64_t version) {
    m_ = m;
    version_ = version;
    pending_.reset();
    for (std::size_t i = 0; i < m_.size(); ++i) {
        if (m_[i] == StateMarking::Activated) active_ = StateIdx(i);
        if (m_[i] == StateMarking::Pending) pending_ = StateIdx(i);
    }
}

}  // namespace coordsem::lifecycle
