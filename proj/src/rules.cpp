#include "coordsem/rules.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace coordsem::rules {

using coordgraph::CompInst;
using coordgraph::PortInst;
using coordgraph::StepInst;
using model::RelKind;

std::string_view to_string(EventType t) {
    switch (t) {
        case EventType::StateChanged: return "state-changed";
        case EventType::ProcessCreated: return "process-created";
        case EventType::ProcessRemoved: return "process-removed";
        case EventType::RelationCreated: return "relation-created";
        case EventType::RelationRemoved: return "relation-removed";
        case EventType::MarkingChanged: return "marking-changed";
    }
    return "?";
}

std::string_view to_string(EntityKind k) {
    switch (k) {
        case EntityKind::Step: return "step";
        case EntityKind::Port: return "port";
        case EntityKind::Comp: return "comp";
        case EntityKind::Instance: return "instance";
        case EntityKind::Relation: return "relation";
    }
    return "?";
}

std::string format(const TraceRecord& r) {
    std::string eff;
    for (const auto& c : r.effects) {
        if (!eff.empty()) eff += "; ";
        eff += fmt::format("{} {} {}->{}", to_string(c.kind), c.entity, to_string(c.from), to_string(c.to));
    }
    return fmt::format("({}, {}, {}, {}, {})", r.version, r.event, r.rule, r.context, eff);
}

namespace {

EntityRef step_ref(StepId s) { return {EntityKind::Step, s.v}; }
EntityRef port_ref(PortId p) { return {EntityKind::Port, p.v}; }
EntityRef comp_ref(CompId c) { return {EntityKind::Comp, c.v}; }

bool is_update(const RuleEngine& e, const Event& ev) { return e.marking(ev.entity) == Marking::Update; }
bool was_active(const RuleEngine& e, const Event& ev) {
    Marking b = e.before(ev.entity);
    return b == Marking::Active || b == Marking::Completed;
}

std::vector<ProcessRule> build_catalog() {
    std::vector<ProcessRule> rules;

    // update rules, one family per entity kind; first match wins because each
    // effect overwrites Update
    struct Kind {
        EntityKind kind;
        const char* prefix;
        const char* sym;
    };
    for (Kind k : {Kind{EntityKind::Step, "step", "β"}, Kind{EntityKind::Port, "port", "η"}, Kind{EntityKind::Comp, "comp", "s"}}) {
        std::string sym = k.sym;
        rules.push_back({std::string(k.prefix) + "-revive",
                         k.kind,
                         EventType::MarkingChanged,
                         RuleClass::Update,
                         {{sym + ".μ = Update", [](const RuleEngine& e, const Event& ev) { return is_update(e, ev); }},
                          {sym + ".before = Eliminated", [](const RuleEngine& e, const Event& ev) { return e.before(ev.entity) == Marking::Eliminated; }},
                          {"table(" + sym + ") ≠ Eliminated", [](const RuleEngine& e, const Event& ev) { return e.compute(ev.entity) != Marking::Eliminated; }}},
                         {{sym + ".μ := Inactive", [](RuleEngine& e, const Event& ev) { e.assign(ev.entity, Marking::Inactive); }},
                          {sym + ".μ := Update", [](RuleEngine& e, const Event& ev) { e.mark_update(ev.entity); }}}});
        struct Outcome {
            const char* name;
            Marking m;
        };
        for (Outcome o : {Outcome{"eliminate", Marking::Eliminated}, Outcome{"complete", Marking::Completed}, Outcome{"activate", Marking::Active},
                          Outcome{"deactivate", Marking::Inactive}}) {
            Marking m = o.m;
            ProcessRule r{std::string(k.prefix) + "-" + o.name,
                          k.kind,
                          EventType::MarkingChanged,
                          RuleClass::Update,
                          {{sym + ".μ = Update", [](const RuleEngine& e, const Event& ev) { return is_update(e, ev); }},
                           {"table(" + sym + ") = " + std::string(to_string(m)), [m](const RuleEngine& e, const Event& ev) { return e.compute(ev.entity) == m; }}},
                          {{sym + ".μ := " + std::string(to_string(m)), [m](RuleEngine& e, const Event& ev) { e.assign(ev.entity, m); }}}};
            bool staged = k.kind == EntityKind::Comp && m == Marking::Completed;
            if (staged) r.pre.push_back({"s.before ∈ {Active, Completed}", [](const RuleEngine& e, const Event& ev) { return was_active(e, ev); }});
            rules.push_back(std::move(r));
            // a component becomes Active before its condition is evaluated
            if (staged)
                rules.push_back({"comp-activate-and-evaluate",
                                 k.kind,
                                 EventType::MarkingChanged,
                                 RuleClass::Update,
                                 {{"s.μ = Update", [](const RuleEngine& e, const Event& ev) { return is_update(e, ev); }},
                                  {"table(s) = Completed", [](const RuleEngine& e, const Event& ev) { return e.compute(ev.entity) == Marking::Completed; }},
                                  {"s.before ∉ {Active, Completed}", [](const RuleEngine& e, const Event& ev) { return !was_active(e, ev); }}},
                                 {{"s.μ := Active", [](RuleEngine& e, const Event& ev) { e.assign(ev.entity, Marking::Active); }},
                                  {"s.μ := Update", [](RuleEngine& e, const Event& ev) { e.mark_update(ev.entity); }}}});
        }
    }

    auto announced = [](Marking m) {
        return Precondition{"ε.value = " + std::string(to_string(m)), [m](const RuleEngine&, const Event& ev) { return ev.value == m; }};
    };
    const Precondition not_update{"ε.value ≠ Update", [](const RuleEngine&, const Event& ev) { return ev.value != Marking::Update; }};

    rules.push_back({"step-completed-and-split", EntityKind::Step, EventType::MarkingChanged, RuleClass::Notification,
                     {announced(Marking::Completed)},
                     {{"β.S_out[.μ ∉ {Active, Completed, Update}] := Active", [](RuleEngine& e, const Event& ev) {
                           const auto& s = e.graph().step(StepId(ev.entity.id));
                           for (CompId c : std::vector<CompId>(s.out)) {
                               Marking m = e.marking(comp_ref(c));
                               if (m != Marking::Active && m != Marking::Completed && m != Marking::Update) e.assign(comp_ref(c), Marking::Active);
                           }
                       }}}});
    rules.push_back({"step-notify-components", EntityKind::Step, EventType::MarkingChanged, RuleClass::Notification,
                     {not_update},
                     {{"β.S_out[.μ] := Update", [](RuleEngine& e, const Event& ev) {
                           for (CompId c : std::vector<CompId>(e.graph().step(StepId(ev.entity.id)).out)) e.mark_update(comp_ref(c));
                       }}}});
    rules.push_back({"step-notify-ports", EntityKind::Step, EventType::MarkingChanged, RuleClass::Notification,
                     {not_update},
                     {{"β.H[.μ] := Update", [](RuleEngine& e, const Event& ev) {
                           for (PortId p : std::vector<PortId>(e.graph().step(StepId(ev.entity.id)).ports)) e.mark_update(port_ref(p));
                       }}}});
    rules.push_back({"step-notify-state", EntityKind::Step, EventType::MarkingChanged, RuleClass::Notification,
                     {announced(Marking::Active),
                      {"β.σ.μ = Pending", [](const RuleEngine& e, const Event& ev) { return e.graph().state_of(StepId(ev.entity.id)) == StateMarking::Pending; }}},
                     {{"request activation of β.σ", [](RuleEngine& e, const Event& ev) {
                           const auto& g = e.graph();
                           const auto& s = g.step(StepId(ev.entity.id));
                           e.queue_promotion(s.inst, g.type().steps[s.type.idx()].state);
                       }}}});
    rules.push_back({"port-notify-step", EntityKind::Port, EventType::MarkingChanged, RuleClass::Notification,
                     {not_update},
                     {{"η.β.μ := Update", [](RuleEngine& e, const Event& ev) { e.mark_update(step_ref(e.graph().port(PortId(ev.entity.id)).step)); }}}});
    rules.push_back({"comp-notify-ports", EntityKind::Comp, EventType::MarkingChanged, RuleClass::Notification,
                     {not_update},
                     {{"s.H_tar[.μ] := Update", [](RuleEngine& e, const Event& ev) {
                           for (PortId p : std::vector<PortId>(e.graph().comp(CompId(ev.entity.id)).tar)) e.mark_update(port_ref(p));
                       }}}});

    rules.push_back({"state-changed-notify", EntityKind::Instance, EventType::StateChanged, RuleClass::Notification,
                     {},
                     {{"ω.B[.μ] := Update", [](RuleEngine& e, const Event& ev) {
                           for (StepId s : e.graph().steps_of(InstanceId(ev.entity.id))) e.mark_update(step_ref(s));
                       }},
                      {"ω.B[.S_out[.μ]] := Update", [](RuleEngine& e, const Event& ev) {
                           for (StepId s : e.graph().steps_of(InstanceId(ev.entity.id)))
                               for (CompId c : std::vector<CompId>(e.graph().step(s).out)) e.mark_update(comp_ref(c));
                       }},
                      {"ω.B[.H[.S_in[.μ]]] := Update", [](RuleEngine& e, const Event& ev) {
                           for (StepId s : e.graph().steps_of(InstanceId(ev.entity.id)))
                               for (PortId p : e.graph().step(s).ports)
                                   for (CompId c : std::vector<CompId>(e.graph().port(p).in)) e.mark_update(comp_ref(c));
                       }},
                      {"ω.B[.H[.μ]] := Update", [](RuleEngine& e, const Event& ev) {
                           for (StepId s : e.graph().steps_of(InstanceId(ev.entity.id)))
                               for (PortId p : std::vector<PortId>(e.graph().step(s).ports)) e.mark_update(port_ref(p));
                       }},
                      {"request activation of ω.σ_pending", [](RuleEngine& e, const Event& ev) {
                           InstanceId w(ev.entity.id);
                           const auto& g = e.graph();
                           if (!g.has_view(w)) return;
                           auto p = g.view(w).pending();
                           if (p && g.type().step_for(g.scope().type(w), *p)) e.queue_promotion(w, *p);
                       }}}});

    for (auto [t, name, ctx] : {std::tuple{EventType::ProcessCreated, "process-created-notify", EntityKind::Instance},
                                std::tuple{EventType::ProcessRemoved, "process-removed-notify", EntityKind::Instance},
                                std::tuple{EventType::RelationCreated, "relation-created-notify", EntityKind::Relation},
                                std::tuple{EventType::RelationRemoved, "relation-removed-notify", EntityKind::Relation}}) {
        rules.push_back({name, ctx, t, RuleClass::Notification,
                         {},
                         {{"ε.touched[.μ] := Update", [](RuleEngine& e, const Event& ev) {
                               for (const auto& r : ev.payload)
                                   if (e.alive(r)) e.mark_update(r);
                           }}}});
    }
    // notification rules before update rules; the two classes match disjoint events
    std::stable_partition(rules.begin(), rules.end(), [](const ProcessRule& r) { return r.cls == RuleClass::Notification; });
    return rules;
}

class CompCounter : public expr::Counter {
public:
    CompCounter(const RuleEngine& e, CompId c) : e_(e), c_(c) {}
    std::int64_t count(expr::CountFn fn, int state_index) const override { return e_.count(c_, fn, state_index); }

private:
    const RuleEngine& e_;
    CompId c_;
};

}  // namespace

const std::vector<ProcessRule>& catalog() {
    static const std::vector<ProcessRule> rules = build_catalog();
    return rules;
}

std::string catalog_text() {
    std::string out;
    for (const auto& r : catalog()) {
        out += fmt::format("rule {}\n  class: {}\n  context: {}\n  trigger: {}\n", r.name, r.cls == RuleClass::Update ? "update" : "notification",
                           to_string(r.context), to_string(r.trigger));
        for (const auto& p : r.pre) out += "  pre: " + p.path + "\n";
        for (const auto& f : r.effects) out += "  effect: " + f.path + "\n";
    }
    return out;
}

RuleEngine::RuleEngine(CoordGraph& g, Options o) : g_(g), opt_(o) {}

// ---------------------------------------------------------------------------
// entity access

bool RuleEngine::alive(EntityRef e) const {
    switch (e.kind) {
        case EntityKind::Step: return e.id < g_.step_count() && g_.step(StepId(e.id)).alive;
        case EntityKind::Port: return e.id < g_.port_count() && g_.port(PortId(e.id)).alive;
        case EntityKind::Comp: return e.id < g_.comp_count() && g_.comp(CompId(e.id)).alive;
        case EntityKind::Instance: return g_.in_scope(InstanceId(e.id));
        case EntityKind::Relation: return true;
    }
    return false;
}

Marking RuleEngine::marking(EntityRef e) const {
    switch (e.kind) {
        case EntityKind::Step: return g_.step(StepId(e.id)).m;
        case EntityKind::Port: return g_.port(PortId(e.id)).m;
        case EntityKind::Comp: return g_.comp(CompId(e.id)).m;
        default: return Marking::Inactive;
    }
}

Marking RuleEngine::before(EntityRef e) const {
    switch (e.kind) {
        case EntityKind::Step: return g_.step(StepId(e.id)).before;
        case EntityKind::Port: return g_.port(PortId(e.id)).before;
        case EntityKind::Comp: return g_.comp(CompId(e.id)).before;
        default: return Marking::Inactive;
    }
}

Marking RuleEngine::value(EntityRef e) const {
    Marking m = marking(e);
    return m == Marking::Update ? before(e) : m;
}

std::string RuleEngine::name(EntityRef e) const {
    switch (e.kind) {
        case EntityKind::Step: return g_.step_name(StepId(e.id));
        case EntityKind::Port: return g_.port_name(PortId(e.id));
        case EntityKind::Comp: return g_.comp_name(CompId(e.id));
        case EntityKind::Instance: return g_.instance_name(InstanceId(e.id));
        case EntityKind::Relation: return fmt::format("relation {}", e.id);
    }
    return "?";
}

Marking RuleEngine::compute(EntityRef e) const {
    switch (e.kind) {
        case EntityKind::Step: return compute_step(StepId(e.id));
        case EntityKind::Port: return compute_port(PortId(e.id));
        case EntityKind::Comp: return compute_comp(CompId(e.id));
        default: return Marking::Inactive;
    }
}

void RuleEngine::mark_update(EntityRef e) {
    Marking* slot = nullptr;
    Marking* prior = nullptr;
    switch (e.kind) {
        case EntityKind::Step: slot = &g_.step(StepId(e.id)).m, prior = &g_.step(StepId(e.id)).before; break;
        case EntityKind::Port: slot = &g_.port(PortId(e.id)).m, prior = &g_.port(PortId(e.id)).before; break;
        case EntityKind::Comp: slot = &g_.comp(CompId(e.id)).m, prior = &g_.comp(CompId(e.id)).before; break;
        default: return;
    }
    if (*slot == Marking::Update) return;
    if (collecting_ && opt_.trace) collecting_->push_back({e.kind, name(e), *slot, Marking::Update});
    *prior = *slot;
    *slot = Marking::Update;
    raise({EventType::MarkingChanged, Origin::Int, e, Marking::Update, 0, {}});
}

void RuleEngine::assign(EntityRef e, Marking m) {
    Marking* slot = nullptr;
    Marking prior = Marking::Inactive;
    switch (e.kind) {
        case EntityKind::Step: slot = &g_.step(StepId(e.id)).m, prior = g_.step(StepId(e.id)).before; break;
        case EntityKind::Port: slot = &g_.port(PortId(e.id)).m, prior = g_.port(PortId(e.id)).before; break;
        case EntityKind::Comp: slot = &g_.comp(CompId(e.id)).m, prior = g_.comp(CompId(e.id)).before; break;
        default: return;
    }
    Marking from = *slot;
    if (collecting_ && opt_.trace) collecting_->push_back({e.kind, name(e), from, m});
    *slot = m;
    // returning from Update to the prior marking is no change for the neighbours
    if (from == Marking::Update && m == prior) return;
    if (from == m) return;
    raise({EventType::MarkingChanged, Origin::Int, e, m, 0, {}});
}

// ---------------------------------------------------------------------------
// marking tables

std::int64_t RuleEngine::count(CompId c, expr::CountFn fn, int state_index) const {
    const auto& x = g_.comp(c);
    const auto& cp = g_.type();
    const auto& tt = cp.transitions[x.trans.idx()];
    std::int64_t n = 0;
    if (fn == expr::CountFn::TargetActive) {
        StateIdx st = state_index >= 0 ? StateIdx(state_index) : cp.steps[cp.ports[tt.target.idx()].step.idx()].state;
        for (PortId p : x.tar)
            if (g_.view(g_.step(g_.port(p).step).inst).marking(st) == StateMarking::Activated) ++n;
        return n;
    }
    if (fn == expr::CountFn::SourceTotal) return static_cast<std::int64_t>(x.src.size());
    StateIdx st = state_index >= 0 ? StateIdx(state_index) : cp.steps[tt.source.idx()].state;
    for (StepId s : x.src) {
        StateMarking m = g_.view(g_.step(s).inst).marking(st);
        switch (fn) {
            case expr::CountFn::SourceIn: n += m == StateMarking::Activated; break;
            case expr::CountFn::SourceAfter: n += m == StateMarking::Confirmed; break;
            case expr::CountFn::SourceBefore: n += m == StateMarking::Waiting || m == StateMarking::Pending; break;
            default: break;
        }
    }
    return n;
}

bool RuleEngine::condition(CompId c) const {
    const auto& x = g_.comp(c);
    if (x.lambda.empty()) return true;
    return x.lambda.evaluate(CompCounter(*this, c));
}

Marking RuleEngine::port_forward(PortId p) const {
    const auto& in = g_.port(p).in;
    if (in.empty()) return Marking::Inactive;
    bool all_elim = true;
    bool all_done = true;
    for (CompId c : in) {
        Marking m = value(comp_ref(c));
        all_elim = all_elim && m == Marking::Eliminated;
        all_done = all_done && m == Marking::Completed;
    }
    if (all_elim) return Marking::Eliminated;
    if (all_done) return Marking::Active;
    return Marking::Inactive;
}

Marking RuleEngine::compute_step(StepId sid) const {
    const auto& s = g_.step(sid);
    StateMarking st = g_.state_of(sid);
    if (st == StateMarking::Skipped) return Marking::Eliminated;
    bool reached = st == StateMarking::Activated || st == StateMarking::Confirmed;
    if (s.ports.empty()) return reached ? Marking::Completed : Marking::Active;
    if (st == StateMarking::Confirmed) return Marking::Completed;
    bool all_elim = std::all_of(s.ports.begin(), s.ports.end(), [&](PortId p) { return port_forward(p) == Marking::Eliminated; });
    if (all_elim) return Marking::Eliminated;
    bool any_active = false;
    bool any_open = false;
    for (PortId p : s.ports) {
        Marking m = value(port_ref(p));
        any_active = any_active || m == Marking::Active;
        any_open = any_open || m == Marking::Active || m == Marking::Completed;
    }
    if (st == StateMarking::Activated && any_open) return Marking::Completed;
    if (any_active) return Marking::Active;
    return Marking::Inactive;
}

Marking RuleEngine::compute_port(PortId pid) const {
    const auto& p = g_.port(pid);
    if (g_.state_of(p.step) == StateMarking::Skipped) return Marking::Eliminated;
    if (value(step_ref(p.step)) == Marking::Completed) return Marking::Completed;
    return port_forward(pid);
}

Marking RuleEngine::compute_comp(CompId cid) const {
    const auto& x = g_.comp(cid);
    const auto& tt = g_.type().transitions[x.trans.idx()];
    switch (x.kind) {
        case RelKind::Self: {
            Marking m = value(step_ref(x.anchor_step));
            if (m == Marking::Completed) return Marking::Completed;
            if (m == Marking::Eliminated) return Marking::Eliminated;
            return Marking::Inactive;
        }
        case RelKind::TopDown: {
            Marking m = value(step_ref(x.anchor_step));
            if (m == Marking::Eliminated) return Marking::Eliminated;
            const auto& v = g_.view(g_.step(x.anchor_step).inst);
            if (!tt.valid_states.empty()) {
                bool all_skipped = std::all_of(tt.valid_states.begin(), tt.valid_states.end(),
                                               [&](StateIdx s) { return v.marking(s) == StateMarking::Skipped; });
                if (all_skipped) return Marking::Eliminated;
            }
            if (m != Marking::Completed) return Marking::Inactive;
            bool valid = tt.valid_states.empty() ||
                         std::find(tt.valid_states.begin(), tt.valid_states.end(), v.active()) != tt.valid_states.end();
            return valid ? Marking::Completed : Marking::Active;
        }
        default: {
            if (x.src.empty()) return Marking::Inactive;
            bool all_elim = true;
            bool any_done = false;
            for (StepId s : x.src) {
                Marking m = value(step_ref(s));
                all_elim = all_elim && m == Marking::Eliminated;
                any_done = any_done || m == Marking::Completed;
            }
            if (all_elim) return Marking::Eliminated;
            if (!any_done) return Marking::Inactive;
            return condition(cid) ? Marking::Completed : Marking::Active;
        }
    }
}

std::vector<std::string> RuleEngine::self_consistency_violations() const {
    std::vector<std::string> out;
    auto check = [&](EntityRef e) {
        if (!alive(e)) return;
        Marking m = marking(e);
        if (m == Marking::Update) {
            out.push_back(fmt::format("{} {} carries Update", to_string(e.kind), name(e)));
            return;
        }
        Marking c = compute(e);
        if (c != m) out.push_back(fmt::format("{} {} stored {} recomputed {}", to_string(e.kind), name(e), to_string(m), to_string(c)));
    };
    for (std::uint32_t i = 0; i < g_.step_count(); ++i) check({EntityKind::Step, i});
    for (std::uint32_t i = 0; i < g_.port_count(); ++i) check({EntityKind::Port, i});
    for (std::uint32_t i = 0; i < g_.comp_count(); ++i) check({EntityKind::Comp, i});
    return out;
}

// ---------------------------------------------------------------------------
// events and cascade

void RuleEngine::raise(Event e) {
    e.seq = ++seq_;
    ++timestamp_;
    queue_.push_back(std::move(e));
}

void RuleEngine::raise_state_changed(InstanceId w) { raise({EventType::StateChanged, Origin::Ext, {EntityKind::Instance, w.v}, Marking::Inactive, 0, {}}); }

void RuleEngine::raise_structure(EventType t, EntityRef e, const coordgraph::Delta& d) {
    Event ev{t, Origin::Ext, e, Marking::Inactive, 0, {}};
    // new and rewired entities, sources before targets
    for (StepId s : d.new_steps) ev.payload.push_back(step_ref(s));
    for (CompId c : d.new_comps) ev.payload.push_back(comp_ref(c));
    for (CompId c : d.changed_comps) ev.payload.push_back(comp_ref(c));
    for (PortId p : d.new_ports) ev.payload.push_back(port_ref(p));
    for (PortId p : d.changed_ports) ev.payload.push_back(port_ref(p));
    for (StepId s : d.changed_steps) ev.payload.push_back(step_ref(s));
    raise(std::move(ev));
}

void RuleEngine::queue_promotion(InstanceId w, StateIdx s) {
    auto key = std::pair{w, s};
    if (std::find(promotions_.begin(), promotions_.end(), key) == promotions_.end()) promotions_.push_back(key);
}

std::optional<std::pair<InstanceId, StateIdx>> RuleEngine::next_promotion() {
    if (promotions_.empty()) return std::nullopt;
    auto p = promotions_.front();
    promotions_.pop_front();
    return p;
}

std::string RuleEngine::describe(const Event& ev) const {
    if (ev.type == EventType::MarkingChanged) return fmt::format("marking-changed({} -> {})", name(ev.entity), to_string(ev.value));
    return fmt::format("{}({})", to_string(ev.type), name(ev.entity));
}

namespace {

// catalog rules per (trigger, context), in catalog order
const std::vector<const ProcessRule*>& rules_for(EventType t, EntityKind k) {
    constexpr std::size_t kinds = 5;
    static const auto index = [] {
        std::vector<std::vector<const ProcessRule*>> ix(6 * kinds);
        for (const auto& r : catalog()) ix[static_cast<std::size_t>(r.trigger) * kinds + static_cast<std::size_t>(r.context)].push_back(&r);
        return ix;
    }();
    return index[static_cast<std::size_t>(t) * kinds + static_cast<std::size_t>(k)];
}

}  // namespace

void RuleEngine::dispatch(const Event& ev) {
    for (const ProcessRule* rp : rules_for(ev.type, ev.entity.kind)) {
        const auto& r = *rp;
        bool ok = true;
        for (const auto& p : r.pre)
            if (!p.test(*this, ev)) {
                ok = false;
                break;
            }
        if (!ok) continue;
        std::vector<Change> changes;
        collecting_ = &changes;
        for (const auto& f : r.effects) f.apply(*this, ev);
        collecting_ = nullptr;
        ++version_;
        ++total_applications_;
        if (opt_.trace) trace_.push_back({version_, describe(ev), r.name, name(ev.entity), std::move(changes)});
    }
}

Snapshot RuleEngine::run_cascade() {
    std::size_t entities = g_.step_count() + g_.port_count() + g_.comp_count();
    std::size_t budget = opt_.budget_factor * (entities + 1) * 5 + 1000;
    std::size_t used = 0;
    while (!queue_.empty()) {
        Event ev = std::move(queue_.front());
        queue_.pop_front();
        // structure events name entities that may be gone by design; the payload is filtered instead
        bool structural = ev.type != EventType::MarkingChanged && ev.type != EventType::StateChanged;
        if (!structural && !alive(ev.entity)) {
            ++dropped_;
            if (opt_.trace) trace_.push_back({version_, describe(ev), "dropped", "dead entity", {}});
            continue;
        }
        std::size_t before_apps = total_applications_;
        dispatch(ev);
        used += total_applications_ - before_apps;
        if (used > budget)
            throw BudgetExceeded(fmt::format("cascade exceeded {} rule applications", budget), g_.dump());
    }
    return snapshot();
}

}  // namespace coordsem::rules
