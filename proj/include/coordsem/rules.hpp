#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coordsem/coordgraph.hpp"
#include "coordsem/markings.hpp"

namespace coordsem::rules {

using coordgraph::CoordGraph;

enum class EventType { StateChanged, ProcessCreated, ProcessRemoved, RelationCreated, RelationRemoved, MarkingChanged };
enum class Origin { Ext, Int };
enum class EntityKind { Step, Port, Comp, Instance, Relation };

[[nodiscard]] std::string_view to_string(EventType t);
[[nodiscard]] std::string_view to_string(EntityKind k);

struct EntityRef {
    EntityKind kind = EntityKind::Step;
    std::uint32_t id = 0;
    bool operator==(const EntityRef&) const = default;
};

struct Event {
    EventType type = EventType::MarkingChanged;
    Origin origin = Origin::Int;
    EntityRef entity;
    Marking value = Marking::Inactive;  // announced marking (marking-changed only)
    std::uint64_t seq = 0;
    std::vector<EntityRef> payload;  // entities a structure change touched
};

struct Snapshot {
    std::uint64_t version = 0;
    std::uint64_t timestamp = 0;
    std::size_t pending = 0;
    [[nodiscard]] bool stable() const { return pending == 0; }
};

struct Change {
    EntityKind kind;
    std::string entity;
    Marking from;
    Marking to;
};

struct TraceRecord {
    std::uint64_t version;
    std::string event;
    std::string rule;
    std::string context;
    std::vector<Change> effects;
};

[[nodiscard]] std::string format(const TraceRecord& r);

struct BudgetExceeded : std::runtime_error {
    std::string dump;
    BudgetExceeded(const std::string& what, std::string d) : std::runtime_error(what), dump(std::move(d)) {}
};

enum class RuleClass { Notification, Update };

class RuleEngine;

// A process rule: context entity kind, ordered preconditions evaluated with
// short-circuit, and effects. Paths are kept as text for the rule catalog.
struct Precondition {
    std::string path;
    std::function<bool(const RuleEngine&, const Event&)> test;
};

struct Effect {
    std::string path;
    std::function<void(RuleEngine&, const Event&)> apply;
};

struct ProcessRule {
    std::string name;
    EntityKind context;
    EventType trigger;
    RuleClass cls;
    std::vector<Precondition> pre;
    std::vector<Effect> effects;
};

// Rules of the engine, in evaluation order.
[[nodiscard]] const std::vector<ProcessRule>& catalog();
[[nodiscard]] std::string catalog_text();

struct Options {
    bool trace = false;
    std::size_t budget_factor = 64;
};

class RuleEngine {
public:
    explicit RuleEngine(CoordGraph& g, Options o = {});

    // External events. The graph has already been mutated; the delta names
    // what changed so the matching rules can mark it for re-evaluation.
    void raise_structure(EventType t, EntityRef e, const coordgraph::Delta& d);
    void raise_state_changed(InstanceId w);
    void raise(Event e);

    // Runs the cascade to a stable snapshot. Throws BudgetExceeded.
    Snapshot run_cascade();
    [[nodiscard]] Snapshot snapshot() const { return {version_, timestamp_, queue_.size()}; }

    // Pending states whose step became Active (FIFO, de-duplicated).
    [[nodiscard]] std::optional<std::pair<InstanceId, StateIdx>> next_promotion();
    void queue_promotion(InstanceId w, StateIdx s);

    // Marking tables: pure functions over neighbor markings and mirrored views.
    [[nodiscard]] Marking compute_step(StepId s) const;
    [[nodiscard]] Marking compute_port(PortId p) const;
    [[nodiscard]] Marking compute_comp(CompId c) const;
    [[nodiscard]] Marking port_forward(PortId p) const;
    [[nodiscard]] bool condition(CompId c) const;
    [[nodiscard]] std::int64_t count(CompId c, expr::CountFn fn, int state_index) const;

    // Entities whose stored marking differs from the recomputed one, or that carry Update.
    [[nodiscard]] std::vector<std::string> self_consistency_violations() const;

    [[nodiscard]] const std::vector<TraceRecord>& trace() const { return trace_; }
    void clear_trace() { trace_.clear(); }
    void set_trace(bool on) { opt_.trace = on; }
    [[nodiscard]] std::size_t dropped_events() const { return dropped_; }
    [[nodiscard]] std::size_t applications() const { return total_applications_; }
    [[nodiscard]] const CoordGraph& graph() const { return g_; }
    [[nodiscard]] CoordGraph& graph() { return g_; }

    // Used by rule effects.
    void mark_update(EntityRef e);
    void assign(EntityRef e, Marking m);
    [[nodiscard]] Marking marking(EntityRef e) const;
    [[nodiscard]] Marking value(EntityRef e) const;  // Update reads as the prior marking
    [[nodiscard]] Marking before(EntityRef e) const;
    [[nodiscard]] Marking compute(EntityRef e) const;
    [[nodiscard]] bool alive(EntityRef e) const;
    [[nodiscard]] std::string name(EntityRef e) const;

private:
    void dispatch(const Event& ev);
    std::string describe(const Event& ev) const;

    CoordGraph& g_;
    Options opt_;
    std::deque<Event> queue_;
    std::deque<std::pair<InstanceId, StateIdx>> promotions_;
    std::uint64_t version_ = 0;
    std::uint64_t timestamp_ = 0;
    std::uint64_t seq_ = 0;
    std::size_t dropped_ = 0;
    std::size_t total_applications_ = 0;
    std::vector<TraceRecord> trace_;
    // effects of the rule currently applied
    std::vector<Change>* collecting_ = nullptr;
};

}  // namespace coordsem::rules
