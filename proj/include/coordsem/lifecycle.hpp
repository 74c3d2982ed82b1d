#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coordsem/ids.hpp"
#include "coordsem/markings.hpp"
#include "coordsem/model.hpp"

namespace coordsem::lifecycle {

struct StateChange {
    StateIdx state;
    StateMarking from;
    StateMarking to;
};

enum class CommitOutcome { Activated, Pending };

struct LifecycleError : std::runtime_error {
    enum class Kind { NotEnabled, NotBackwards, PendingBlocks, NotPending };
    Kind kind;
    LifecycleError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Markings of one state-based view. Pure value type; also used as the mirror
// copy inside coordination processes.
class StateView {
public:
    StateView() = default;
    explicit StateView(const model::CompiledType& t);

    [[nodiscard]] const std::vector<StateMarking>& markings() const { return m_; }
    [[nodiscard]] StateMarking marking(StateIdx s) const { return m_[s.idx()]; }
    [[nodiscard]] StateIdx active() const { return active_; }
    [[nodiscard]] std::optional<StateIdx> pending() const { return pending_; }
    [[nodiscard]] std::uint64_t version() const { return version_; }
    [[nodiscard]] const model::CompiledType& type() const { return *type_; }

    // Forward commit from the active state. coordinated=false activates directly,
    // otherwise the target is marked Pending.
    std::vector<StateChange> commit(StateIdx target, bool coordinated);
    std::vector<StateChange> promote(StateIdx s);
    std::vector<StateChange> backwards(StateIdx target);

    // The active state is activity-free: its sole successor should be committed.
    [[nodiscard]] std::optional<StateIdx> auto_successor() const;

    // Overwrites markings from a report (mirror use).
    void assign(const std::vector<StateMarking>& m, std::uint64_t version);

    bool operator==(const StateView& o) const { return m_ == o.m_; }

private:
    void set(StateIdx s, StateMarking to, std::vector<StateChange>& out);
    void activate(StateIdx target, std::vector<StateChange>& out);

    const model::CompiledType* type_ = nullptr;
    std::vector<StateMarking> m_;
    StateIdx active_;
    std::optional<StateIdx> pending_;
    std::uint64_t version_ = 0;
};

}  // namespace coordsem::lifecycle
