#include "coordsem/engine.hpp"

#include <algorithm>
#include <mutex>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace coordsem::engine {

using lifecycle::LifecycleError;
using lifecycle::StateView;
using rules::EntityKind;
using rules::EventType;
using structure::StructureError;

std::string_view to_string(CommitResult r) { return r == CommitResult::Activated ? "Activated" : "Pending"; }

namespace {

template <class R>
struct Slot {
    std::optional<R> value;
    std::exception_ptr error;
};
struct Done {};

}  // namespace

struct Ctx {
    runtime::Runtime& rt;
    model::ModelPtr model;
    rules::Options opt;
    StructureUnit* su = nullptr;
    UnitId su_unit;
    // per-view state changes, shared by all process units
    std::mutex trace_mu;
    std::vector<StateTraceRecord> states;
    std::uint64_t state_seq = 0;

    void record(InstanceId w, const std::vector<lifecycle::StateChange>& ch, const char* cause) {
        if (!opt.trace || ch.empty()) return;
        std::lock_guard lock(trace_mu);
        for (const auto& c : ch) states.push_back({++state_seq, w, c.state, c.from, c.to, cause});
    }
};

struct ProcAddr {
    UnitId unit;
    ProcessUnit* p = nullptr;
};

struct CpAddr {
    UnitId unit;
    CpUnit* c = nullptr;
    CpTypeIdx type;
};

struct Joined {
    coordgraph::InstanceEntry entry;
    std::uint64_t seq = 0;
    ProcAddr proc;
};

struct ScopeDelta {
    std::vector<Joined> joined;
    std::vector<coordgraph::RelationEntry> added;
    std::vector<RelationId> removed;
    std::vector<InstanceId> left;
    [[nodiscard]] bool empty() const { return joined.empty() && added.empty() && removed.empty() && left.empty(); }
};

// ---------------------------------------------------------------------------

class StructureUnit {
public:
    explicit StructureUnit(Ctx& ctx) : ctx_(ctx), s_(ctx.model) {}

    void run(std::function<void()> op) {
        if (busy_)
            deferred_.push_back(std::move(op));
        else
            op();
    }

    void instantiate(TypeIdx t, Slot<InstanceId>& slot);
    void link(InstanceId a, InstanceId b, bool arrangement, std::shared_ptr<Slot<RelationId>> slot);
    void unlink(RelationId r, Slot<Done>& slot);
    void remove(InstanceId w, Slot<Done>& slot);
    void set_attribute(InstanceId w, const std::string& n, const std::string& v, Slot<Done>& slot);
    void on_report(InstanceId w, Report r);
    void on_veto_reply(std::uint64_t query, std::optional<std::string> reason);

    [[nodiscard]] const structure::Structure& structure() const { return s_; }
    [[nodiscard]] ProcessUnit* proc(InstanceId w) const {
        auto it = procs_.find(w);
        return it == procs_.end() ? nullptr : it->second.get();
    }
    [[nodiscard]] std::vector<const CpUnit*> cps() const;
    [[nodiscard]] std::vector<CpUnit*> cps_mut();

private:
    struct CpEntry {
        CpAddr addr;
        InstanceId coordinating;
        std::unique_ptr<CpUnit> unit;
        std::set<InstanceId> scope;
        std::set<RelationId> rels;
        bool alive = true;
    };
    struct Query {
        structure::LinkPlan plan;
        std::shared_ptr<Slot<RelationId>> slot;
        std::size_t remaining = 0;
        std::optional<std::string> veto;
    };

    void finish_link(const structure::LinkPlan& p, Slot<RelationId>& slot);
    void sync_scopes();
    void resume();

    Ctx& ctx_;
    structure::Structure s_;
    std::map<InstanceId, std::unique_ptr<ProcessUnit>> procs_;
    std::map<InstanceId, UnitId> proc_units_;
    std::vector<std::unique_ptr<ProcessUnit>> retired_procs_;
    std::vector<CpEntry> cps_;
    std::unordered_map<InstanceId, Report> replica_;
    bool busy_ = false;
    std::deque<std::function<void()>> deferred_;
    std::uint64_t next_query_ = 0;
    std::map<std::uint64_t, Query> queries_;

    friend class Engine;
};

// ---------------------------------------------------------------------------

class ProcessUnit {
public:
    ProcessUnit(Ctx& ctx, InstanceId id, TypeIdx t, UnitId self) : ctx_(ctx), id_(id), type_(t), self_(self), view_(ctx.model->type(t)) {}

    void commit(StateIdx target) {
        bool coord = coordinated(target);
        auto changes = view_.commit(target, coord);
        if (changes.empty()) return;
        ctx_.record(id_, changes, "commit");
        grants_.clear();
        advance();
        publish();
    }

    void backwards(StateIdx target) {
        ctx_.record(id_, view_.backwards(target), "backwards");
        grants_.clear();
        publish();
    }

    void grant(UnitId from, StateIdx s, std::uint64_t version) {
        auto it = std::find_if(cps_.begin(), cps_.end(), [&](const CpAddr& c) { return c.unit == from; });
        if (it == cps_.end()) return;
        if (view_.pending() != s || view_.version() != version) {
            send_report(*it);  // stale: let the coordination process resync its mirror
            return;
        }
        grants_.insert(from);
        for (const auto& c : cps_)
            if (ctx_.model->cp(c.type).step_for(type_, s) && !grants_.count(c.unit)) return;
        grants_.clear();
        ctx_.record(id_, view_.promote(s), "promote");
        advance();
        publish();
    }

    void join(CpAddr c) {
        if (std::none_of(cps_.begin(), cps_.end(), [&](const CpAddr& x) { return x.unit == c.unit; })) cps_.push_back(c);
        send_report(c);
    }

    void leave(UnitId u) {
        std::erase_if(cps_, [&](const CpAddr& x) { return x.unit == u; });
        grants_.erase(u);
        // nothing coordinates the pending state any more, or every remaining
        // coordination process already granted it
        auto p = view_.pending();
        if (!p) return;
        for (const auto& c : cps_)
            if (ctx_.model->cp(c.type).step_for(type_, *p) && !grants_.count(c.unit)) return;
        grants_.clear();
        ctx_.record(id_, view_.promote(*p), "promote");
        advance();
        publish();
    }

    [[nodiscard]] const StateView& view() const { return view_; }
    [[nodiscard]] UnitId unit() const { return self_; }

private:
    [[nodiscard]] bool coordinated(StateIdx s) const {
        return std::any_of(cps_.begin(), cps_.end(), [&](const CpAddr& c) { return ctx_.model->cp(c.type).step_for(type_, s).has_value(); });
    }

    // activity-free states pass straight on
    void advance() {
        while (auto next = view_.auto_successor()) ctx_.record(id_, view_.commit(*next, coordinated(*next)), "activity-free");
    }

    Report report() { return {view_.markings(), view_.version(), ++seq_}; }

    void send_report(const CpAddr& c);
    void publish();

    Ctx& ctx_;
    InstanceId id_;
    TypeIdx type_;
    UnitId self_;
    StateView view_;
    std::uint64_t seq_ = 0;
    std::vector<CpAddr> cps_;
    std::set<UnitId> grants_;
};

// ---------------------------------------------------------------------------

class CpUnit {
public:
    CpUnit(Ctx& ctx, CpTypeIdx t, InstanceId coord, UnitId self) : ctx_(ctx), self_(self), g_(ctx.model, t, coord), re_(g_, ctx.opt) {}

    void apply(ScopeDelta d) {
        if (!d.removed.empty()) {
            auto delta = g_.remove_relations(d.removed);
            re_.raise_structure(EventType::RelationRemoved, {EntityKind::Relation, d.removed.front().v}, delta);
        }
        if (!d.left.empty()) {
            for (InstanceId w : d.left) procs_.erase(w);
            auto delta = g_.remove_instances(d.left);
            re_.raise_structure(EventType::ProcessRemoved, {EntityKind::Instance, d.left.front().v}, delta);
        }
        if (!d.joined.empty() || !d.added.empty()) {
            std::vector<coordgraph::InstanceEntry> entries;
            for (auto& j : d.joined) {
                auto& e = j.entry;
                auto it = latest_.find(e.id);
                if (it != latest_.end() && it->second.seq > j.seq) {
                    e.view = it->second.markings;
                    e.version = it->second.version;
                } else {
                    latest_[e.id] = Report{e.view, e.version, j.seq};
                }
                procs_[e.id] = j.proc;
                entries.push_back(std::move(e));
            }
            auto delta = g_.add_instances(entries, d.added);
            if (!d.joined.empty())
                re_.raise_structure(EventType::ProcessCreated, {EntityKind::Instance, d.joined.front().entry.id.v}, delta);
            else
                re_.raise_structure(EventType::RelationCreated, {EntityKind::Relation, d.added.front().id.v}, delta);
        }
        settle();
    }

    void report(InstanceId w, Report r) {
        auto it = latest_.find(w);
        if (it != latest_.end() && it->second.seq >= r.seq) return;
        if (g_.has_view(w)) g_.view_mut(w).assign(r.markings, r.version);
        latest_[w] = std::move(r);
        if (!g_.has_view(w)) return;
        re_.raise_state_changed(w);
        settle();
    }

    // Start-state special case: the linked instance may not enter while the
    // top-down component that would gate its start step is unfulfilled.
    [[nodiscard]] std::optional<std::string> veto_check(TypeIdx xt, StateIdx st, const std::vector<InstanceId>& anchors) const {
        const auto& cp = g_.type();
        auto step = cp.step_for(xt, st);
        if (!step) return std::nullopt;
        for (PortTypeIdx pt : cp.steps[step->idx()].ports)
            for (TransTypeIdx t : cp.ports[pt.idx()].incoming) {
                const auto& tt = cp.transitions[t.idx()];
                if (tt.kind != model::RelKind::TopDown) continue;
                TypeIdx srct = cp.steps[tt.source.idx()].type;
                for (InstanceId h : anchors) {
                    if (!g_.in_scope(h) || g_.scope().type(h) != srct) continue;
                    auto sid = g_.step_of(tt.source, h);
                    if (!sid) continue;
                    for (CompId c : g_.step(*sid).out) {
                        const auto& x = g_.comp(c);
                        if (x.trans != t || x.anchor_step != *sid) continue;
                        if (x.m != Marking::Completed)
                            return fmt::format("{} is {}", g_.comp_name(c), coordsem::to_string(x.m));
                    }
                }
            }
        return std::nullopt;
    }

    [[nodiscard]] const rules::RuleEngine& engine() const { return re_; }
    [[nodiscard]] rules::RuleEngine& engine() { return re_; }

private:
    void settle() {
        re_.run_cascade();
        while (auto p = re_.next_promotion()) {
            auto [w, s] = *p;
            if (!g_.has_view(w)) continue;
            auto& v = g_.view_mut(w);
            if (v.pending() != s) continue;
            auto st = g_.type().step_for(g_.scope().type(w), s);
            if (!st) continue;
            auto sid = g_.step_of(*st, w);
            if (!sid || g_.step(*sid).m != Marking::Active) continue;
            std::uint64_t version = v.version();
            v.promote(s);
            auto proc = procs_.find(w);
            if (proc != procs_.end()) {
                ProcessUnit* pu = proc->second.p;
                UnitId self = self_;
                ctx_.rt.send(self_, proc->second.unit, "grant", [pu, self, s, version] { pu->grant(self, s, version); });
            }
            re_.raise_state_changed(w);
            re_.run_cascade();
        }
    }

    Ctx& ctx_;
    UnitId self_;
    coordgraph::CoordGraph g_;
    rules::RuleEngine re_;
    std::unordered_map<InstanceId, Report> latest_;
    std::unordered_map<InstanceId, ProcAddr> procs_;
};

// ---------------------------------------------------------------------------

void ProcessUnit::send_report(const CpAddr& c) {
    CpUnit* cu = c.c;
    InstanceId id = id_;
    ctx_.rt.send(self_, c.unit, "report", [cu, id, r = report()]() mutable { cu->report(id, std::move(r)); });
}

void ProcessUnit::publish() {
    StructureUnit* su = ctx_.su;
    InstanceId id = id_;
    ctx_.rt.send(self_, ctx_.su_unit, "report", [su, id, r = report()]() mutable { su->on_report(id, std::move(r)); });
    for (const auto& c : cps_) send_report(c);
}

void StructureUnit::instantiate(TypeIdx t, Slot<InstanceId>& slot) {
    InstanceId id = s_.create(t);
    const auto& inst = s_.instance(id);
    UnitId pu = ctx_.rt.spawn(inst.label);
    procs_[id] = std::make_unique<ProcessUnit>(ctx_, id, t, pu);
    proc_units_[id] = pu;
    replica_[id] = Report{procs_[id]->view().markings(), 0, 0};
    for (CpTypeIdx c : ctx_.model->cps_coordinating(t)) {
        UnitId cu = ctx_.rt.spawn(ctx_.model->cp(c).name + " of " + inst.label);
        CpEntry e;
        e.unit = std::make_unique<CpUnit>(ctx_, c, id, cu);
        e.addr = {cu, e.unit.get(), c};
        e.coordinating = id;
        cps_.push_back(std::move(e));
    }
    slot.value = id;
    sync_scopes();
}

void StructureUnit::link(InstanceId a, InstanceId b, bool arrangement, std::shared_ptr<Slot<RelationId>> slot) {
    structure::LinkPlan p;
    try {
        p = s_.plan_link(a, b);
    } catch (...) {
        slot->error = std::current_exception();
        return;
    }
    std::vector<CpAddr> ask;
    InstanceId x = p.source;
    TypeIdx xt = s_.instance(x).type;
    StateIdx start = ctx_.model->type(xt).start;
    if (!arrangement && replica_[x].markings[start.idx()] == StateMarking::Activated) {
        const auto& high = s_.higher_level_of(p.target);
        for (const auto& c : cps_)
            if (c.alive && (c.coordinating == p.target || high.count(c.coordinating))) ask.push_back(c.addr);
    }
    if (ask.empty()) {
        finish_link(p, *slot);
        return;
    }
    std::vector<InstanceId> anchors{p.target};
    for (InstanceId h : s_.higher_level_of(p.target)) anchors.push_back(h);
    std::uint64_t q = next_query_++;
    queries_[q] = Query{p, slot, ask.size(), std::nullopt};
    busy_ = true;
    for (const auto& c : ask) {
        CpUnit* cu = c.c;
        UnitId cunit = c.unit;
        StructureUnit* self = this;
        UnitId su = ctx_.su_unit;
        auto& rt = ctx_.rt;
        rt.send(su, cunit, "veto-query", [cu, cunit, self, su, &rt, q, xt, start, anchors] {
            auto reason = cu->veto_check(xt, start, anchors);
            rt.send(cunit, su, "veto-reply", [self, q, reason] { self->on_veto_reply(q, reason); });
        });
    }
}

void StructureUnit::on_veto_reply(std::uint64_t query, std::optional<std::string> reason) {
    auto it = queries_.find(query);
    if (it == queries_.end()) return;
    auto& q = it->second;
    if (reason && !q.veto) q.veto = reason;
    if (--q.remaining > 0) return;
    Query done = std::move(q);
    queries_.erase(it);
    if (done.veto)
        done.slot->error = std::make_exception_ptr(StructureError(StructureError::Kind::Veto, "link vetoed by coordination: " + *done.veto));
    else
        finish_link(done.plan, *done.slot);
    busy_ = false;
    resume();
}

void StructureUnit::resume() {
    while (!busy_ && !deferred_.empty()) {
        auto op = std::move(deferred_.front());
        deferred_.pop_front();
        op();
    }
}

void StructureUnit::finish_link(const structure::LinkPlan& p, Slot<RelationId>& slot) {
    try {
        slot.value = s_.apply_link(p);
    } catch (...) {
        slot.error = std::current_exception();
        return;
    }
    sync_scopes();
}

void StructureUnit::unlink(RelationId r, Slot<Done>& slot) {
    s_.unlink(r);
    slot.value = Done{};
    sync_scopes();
}

void StructureUnit::remove(InstanceId w, Slot<Done>& slot) {
    s_.remove(w);
    for (auto& c : cps_)
        if (c.alive && c.coordinating == w) {
            c.alive = false;
            ctx_.rt.retire(c.addr.unit);
            // members must stop waiting for grants from it
            UnitId u = c.addr.unit;
            for (InstanceId m : c.scope) {
                auto it = procs_.find(m);
                if (m == w || it == procs_.end()) continue;
                ProcessUnit* p = it->second.get();
                ctx_.rt.send(ctx_.su_unit, p->unit(), "scope-leave", [p, u] { p->leave(u); });
            }
        }
    if (auto it = procs_.find(w); it != procs_.end()) {
        ctx_.rt.retire(it->second->unit());
        retired_procs_.push_back(std::move(it->second));
        procs_.erase(it);
    }
    replica_.erase(w);
    slot.value = Done{};
    sync_scopes();
}

void StructureUnit::set_attribute(InstanceId w, const std::string& n, const std::string& v, Slot<Done>& slot) {
    s_.set_attribute(w, n, v);
    slot.value = Done{};
}

void StructureUnit::on_report(InstanceId w, Report r) {
    auto it = replica_.find(w);
    if (it == replica_.end() || it->second.seq >= r.seq) return;
    it->second = std::move(r);
}

// Brings every coordination process's mirrored sub-structure in line with
// {coordinating} ∪ L(coordinating).
void StructureUnit::sync_scopes() {
    for (auto& c : cps_) {
        if (!c.alive) continue;
        std::set<InstanceId> want{c.coordinating};
        const auto& low = s_.lower_level_of(c.coordinating);
        want.insert(low.begin(), low.end());
        ScopeDelta d;
        for (InstanceId w : c.scope)
            if (!want.count(w)) d.left.push_back(w);
        for (InstanceId w : want)
            if (!c.scope.count(w)) {
                const auto& inst = s_.instance(w);
                const auto& rep = replica_.at(w);
                d.joined.push_back({{w, inst.type, inst.label, rep.markings, rep.version}, rep.seq, {procs_.at(w)->unit(), procs_.at(w).get()}});
            }
        std::set<RelationId> rels;
        for (InstanceId w : want)
            for (RelationId r : s_.graph().incoming(w))
                if (want.count(s_.relation(r).source)) rels.insert(r);
        for (RelationId r : c.rels)
            if (!rels.count(r)) d.removed.push_back(r);
        for (RelationId r : rels)
            if (!c.rels.count(r)) d.added.push_back({r, s_.relation(r).source, s_.relation(r).target});
        if (d.empty()) continue;
        c.scope = std::move(want);
        c.rels = std::move(rels);
        std::vector<InstanceId> joined;
        for (const auto& j : d.joined) joined.push_back(j.entry.id);
        std::vector<InstanceId> left = d.left;
        CpUnit* cu = c.addr.c;
        ctx_.rt.send(ctx_.su_unit, c.addr.unit, "scope-delta", [cu, d = std::move(d)]() mutable { cu->apply(std::move(d)); });
        for (InstanceId w : joined) {
            ProcessUnit* p = procs_.at(w).get();
            CpAddr a = c.addr;
            ctx_.rt.send(ctx_.su_unit, p->unit(), "scope-join", [p, a] { p->join(a); });
        }
        for (InstanceId w : left) {
            auto it = procs_.find(w);
            if (it == procs_.end()) continue;
            ProcessUnit* p = it->second.get();
            UnitId u = c.addr.unit;
            ctx_.rt.send(ctx_.su_unit, p->unit(), "scope-leave", [p, u] { p->leave(u); });
        }
    }
}

std::vector<const CpUnit*> StructureUnit::cps() const {
    std::vector<const CpUnit*> out;
    for (const auto& c : cps_)
        if (c.alive) out.push_back(c.unit.get());
    return out;
}

std::vector<CpUnit*> StructureUnit::cps_mut() {
    std::vector<CpUnit*> out;
    for (auto& c : cps_)
        if (c.alive) out.push_back(c.unit.get());
    return out;
}

// ---------------------------------------------------------------------------

Engine::Engine(model::ModelPtr m, Config c) : model_(std::move(m)), cfg_(c), rt_(c.runtime) {
    UnitId su = rt_.spawn("structure");
    ctx_ = std::make_unique<Ctx>(rt_, model_, cfg_.rules, nullptr, su);
    su_ = std::make_unique<StructureUnit>(*ctx_);
    ctx_->su = su_.get();
}

Engine::~Engine() = default;

template <class R, class F>
R Engine::call(UnitId to, const char* label, F f) {
    auto slot = std::make_shared<Slot<R>>();
    rt_.send(runtime::Runtime::client, to, label, [slot, f = std::move(f)]() mutable {
        try {
            f(slot);
        } catch (...) {
            slot->error = std::current_exception();
        }
    });
    rt_.await_quiescence();
    if (slot->error) std::rethrow_exception(slot->error);
    if (!slot->value) throw std::logic_error(std::string(label) + ": no result at quiescence");
    return *slot->value;
}

InstanceId Engine::instantiate(TypeIdx t) {
    return call<InstanceId>(ctx_->su_unit, "instantiate", [su = su_.get(), t](auto slot) { su->run([su, t, slot] {
        try {
            su->instantiate(t, *slot);
        } catch (...) {
            slot->error = std::current_exception();
        }
    }); });
}

InstanceId Engine::instantiate(const std::string& type) {
    auto t = model_->type_index(type);
    if (!t) throw StructureError(StructureError::Kind::UnknownType, "unknown process type '" + type + "'");
    return instantiate(*t);
}

namespace {
template <class S, class F>
auto guarded(S slot, F f) {
    return [slot, f = std::move(f)]() mutable {
        try {
            f();
        } catch (...) {
            slot->error = std::current_exception();
        }
    };
}
}  // namespace

RelationId Engine::link(InstanceId a, InstanceId b) {
    RelationId r;
    try {
        r = call<RelationId>(ctx_->su_unit, "link", [su = su_.get(), a, b](auto slot) { su->run(guarded(slot, [su, a, b, slot] { su->link(a, b, false, slot); })); });
    } catch (const StructureError& e) {
        if (e.kind == StructureError::Kind::Veto) ++vetoes_;
        throw;
    }
    return r;
}

RelationId Engine::link_arrangement(InstanceId root, InstanceId target) {
    return call<RelationId>(ctx_->su_unit, "link-arrangement",
                            [su = su_.get(), root, target](auto slot) { su->run(guarded(slot, [su, root, target, slot] { su->link(root, target, true, slot); })); });
}

void Engine::unlink(RelationId r) {
    call<Done>(ctx_->su_unit, "unlink", [su = su_.get(), r](auto slot) { su->run(guarded(slot, [su, r, slot] { su->unlink(r, *slot); })); });
}

void Engine::remove(InstanceId w) {
    call<Done>(ctx_->su_unit, "remove", [su = su_.get(), w](auto slot) { su->run(guarded(slot, [su, w, slot] { su->remove(w, *slot); })); });
}

void Engine::set_attribute(InstanceId w, const std::string& name, const std::string& value) {
    call<Done>(ctx_->su_unit, "set-attribute",
               [su = su_.get(), w, name, value](auto slot) { su->run(guarded(slot, [su, w, name, value, slot] { su->set_attribute(w, name, value, *slot); })); });
}

CommitResult Engine::commit(InstanceId w, StateIdx target) {
    ProcessUnit* p = su_->proc(w);
    if (!p) throw StructureError(StructureError::Kind::UnknownInstance, fmt::format("unknown instance {}", w.v));
    call<Done>(p->unit(), "commit", [p, target](auto slot) {
        p->commit(target);
        slot->value = Done{};
    });
    return p->view().marking(target) == StateMarking::Pending ? CommitResult::Pending : CommitResult::Activated;
}

namespace {
StateIdx state_named(const model::CompiledModel& m, TypeIdx t, const std::string& s) {
    const auto& ct = m.type(t);
    auto it = ct.state_index.find(s);
    if (it == ct.state_index.end()) throw LifecycleError(LifecycleError::Kind::NotEnabled, ct.name + ": unknown state '" + s + "'");
    return it->second;
}
}  // namespace

CommitResult Engine::commit(InstanceId w, const std::string& state) {
    if (!su_->proc(w)) throw StructureError(StructureError::Kind::UnknownInstance, fmt::format("unknown instance {}", w.v));
    return commit(w, state_named(*model_, su_->structure().instance(w).type, state));
}

void Engine::backwards(InstanceId w, StateIdx target) {
    ProcessUnit* p = su_->proc(w);
    if (!p) throw StructureError(StructureError::Kind::UnknownInstance, fmt::format("unknown instance {}", w.v));
    call<Done>(p->unit(), "backwards", [p, target](auto slot) {
        p->backwards(target);
        slot->value = Done{};
    });
}

void Engine::backwards(InstanceId w, const std::string& state) {
    if (!su_->proc(w)) throw StructureError(StructureError::Kind::UnknownInstance, fmt::format("unknown instance {}", w.v));
    backwards(w, state_named(*model_, su_->structure().instance(w).type, state));
}

const structure::Structure& Engine::structure() const { return su_->structure(); }

const lifecycle::StateView& Engine::view(InstanceId w) const {
    ProcessUnit* p = su_->proc(w);
    if (!p) throw StructureError(StructureError::Kind::UnknownInstance, fmt::format("unknown instance {}", w.v));
    return p->view();
}

bool Engine::exists(InstanceId w) const { return su_->proc(w) != nullptr; }

InstanceId Engine::find(const std::string& label) const {
    for (const auto& [id, inst] : su_->structure().instances())
        if (inst.label == label) return id;
    return InstanceId{};
}

std::vector<const rules::RuleEngine*> Engine::coordination() const {
    std::vector<const rules::RuleEngine*> out;
    for (const CpUnit* c : su_->cps()) out.push_back(&c->engine());
    return out;
}

std::vector<rules::TraceRecord> Engine::trace() const {
    std::vector<rules::TraceRecord> out;
    for (const CpUnit* c : su_->cps()) {
        const auto& t = c->engine().trace();
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

std::vector<StateTraceRecord> Engine::state_trace() const {
    std::lock_guard lock(ctx_->trace_mu);
    return ctx_->states;
}

std::string Engine::format(const StateTraceRecord& r) const {
    const auto& st = su_->structure();
    std::string who = st.exists(r.instance) ? st.instance(r.instance).label : fmt::format("#{}", r.instance.v);
    std::string state = "?";
    if (st.exists(r.instance)) state = model_->type(st.instance(r.instance).type).states[r.state.idx()];
    return fmt::format("({}, {}, {}, {}, {}, {})", r.seq, who, state, coordsem::to_string(r.from), coordsem::to_string(r.to), r.cause);
}

void Engine::clear_trace() {
    {
        std::lock_guard lock(ctx_->trace_mu);
        ctx_->states.clear();
    }
    for (CpUnit* c : su_->cps_mut()) c->engine().clear_trace();
}

void Engine::set_trace(bool on) {
    ctx_->opt.trace = on;
    for (CpUnit* c : su_->cps_mut()) c->engine().set_trace(on);
}

std::vector<std::string> Engine::self_consistency_violations() const {
    std::vector<std::string> out;
    for (const auto* re : coordination()) {
        auto v = re->self_consistency_violations();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

std::string Engine::dump() const {
    std::string out = su_->structure().to_json() + "\n";
    for (const auto& [id, p] : su_->procs_) {
        const auto& v = p->view();
        const auto& t = v.type();
        out += su_->structure().instance(id).label + ":";
        for (std::size_t i = 0; i < t.states.size(); ++i) out += fmt::format(" {}={}", t.states[i], coordsem::to_string(v.markings()[i]));
        out += "\n";
    }
    for (const auto* re : coordination()) out += re->graph().dump();
    return out;
}

}  // namespace coordsem::engine
