#include "support.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "coordsem/coordgraph.hpp"
#include "coordsem/rules.hpp"

#ifndef COORDSEM_SOURCE_DIR
#define COORDSEM_SOURCE_DIR "."
#endif

namespace testkit {

using coordgraph::CoordGraph;
using model::RelKind;

std::string source_dir() { return COORDSEM_SOURCE_DIR; }

model::ModelPtr load(const std::string& name) { return model::CompiledModel::compile(model::load_model(source_dir() + "/models/" + name)); }

model::ModelPtr load_stripped(const std::string& name) {
    return model::CompiledModel::compile(model::strip_coordination(model::load_model(source_dir() + "/models/" + name)));
}

namespace {

std::set<InstanceId> walk(const std::map<RelationId, structure::Relation>& rels, InstanceId x, bool down) {
    std::set<InstanceId> seen;
    std::vector<InstanceId> stack{x};
    while (!stack.empty()) {
        InstanceId y = stack.back();
        stack.pop_back();
        for (const auto& [id, r] : rels) {
            InstanceId from = down ? r.target : r.source;
            InstanceId to = down ? r.source : r.target;
            if (from == y && seen.insert(to).second) stack.push_back(to);
        }
    }
    return seen;
}

std::string ids(const std::set<InstanceId>& s) {
    std::string out;
    for (auto i : s) out += fmt::format("{} ", i.v);
    return out;
}

}  // namespace

std::set<InstanceId> lower_closure(const structure::Structure& s, InstanceId x) { return walk(s.relations(), x, true); }
std::set<InstanceId> higher_closure(const structure::Structure& s, InstanceId x) { return walk(s.relations(), x, false); }

std::vector<std::string> lh_mismatches(const structure::Structure& s) {
    std::vector<std::string> out;
    for (const auto& [x, inst] : s.instances()) {
        auto lo = lower_closure(s, x);
        auto hi = higher_closure(s, x);
        const auto& ml = s.lower_level_of(x);
        const auto& mh = s.higher_level_of(x);
        if (std::set<InstanceId>(ml.begin(), ml.end()) != lo) out.push_back(fmt::format("L({}) = {}, expected {}", inst.label, ids({ml.begin(), ml.end()}), ids(lo)));
        if (std::set<InstanceId>(mh.begin(), mh.end()) != hi) out.push_back(fmt::format("H({}) = {}, expected {}", inst.label, ids({mh.begin(), mh.end()}), ids(hi)));
        for (InstanceId y : ml)
            if (!s.higher_level_of(y).count(x)) out.push_back(fmt::format("{} in L({}) but not the reverse", y.v, x.v));
    }
    return out;
}

std::vector<std::string> graph_mismatches(const structure::RelationGraph& g) {
    std::map<RelationId, structure::Relation> rels;
    for (const auto& [r, e] : g.edges()) rels[r] = structure::Relation{r, RelTypeIdx{}, e.first, e.second};
    std::vector<std::string> out;
    for (InstanceId x : g.nodes()) {
        auto lo = walk(rels, x, true);
        auto hi = walk(rels, x, false);
        if (std::set<InstanceId>(g.lower(x).begin(), g.lower(x).end()) != lo) out.push_back(fmt::format("mirror L({}) differs", x.v));
        if (std::set<InstanceId>(g.higher(x).begin(), g.higher(x).end()) != hi) out.push_back(fmt::format("mirror H({}) differs", x.v));
    }
    return out;
}

namespace {

// lambda counts from the true process views
class TruthCounter : public expr::Counter {
public:
    TruthCounter(const engine::Engine& e, const CoordGraph& g, const std::set<StepId>& src, const std::set<PortId>& tar, const model::CompiledTransition& t)
        : e_(e), g_(g), src_(src), tar_(tar), t_(t) {}

    std::int64_t count(expr::CountFn fn, int state_index) const override {
        const auto& cp = g_.type();
        std::int64_t n = 0;
        if (fn == expr::CountFn::SourceTotal) return static_cast<std::int64_t>(src_.size());
        if (fn == expr::CountFn::TargetActive) {
            StateIdx st = state_index >= 0 ? StateIdx(state_index) : cp.steps[cp.ports[t_.target.idx()].step.idx()].state;
            for (PortId p : tar_) n += e_.view(g_.step(g_.port(p).step).inst).marking(st) == StateMarking::Activated;
            return n;
        }
        StateIdx st = state_index >= 0 ? StateIdx(state_index) : cp.steps[t_.source.idx()].state;
        for (StepId s : src_) {
            auto m = e_.view(g_.step(s).inst).marking(st);
            if (fn == expr::CountFn::SourceIn) n += m == StateMarking::Activated;
            if (fn == expr::CountFn::SourceAfter) n += m == StateMarking::Confirmed;
            if (fn == expr::CountFn::SourceBefore) n += m == StateMarking::Waiting || m == StateMarking::Pending;
        }
        return n;
    }

private:
    const engine::Engine& e_;
    const CoordGraph& g_;
    const std::set<StepId>& src_;
    const std::set<PortId>& tar_;
    const model::CompiledTransition& t_;
};

struct Expected {
    std::set<StepId> src;
    std::set<PortId> tar;
    bool completed = false;
};

}  // namespace

std::vector<std::string> component_mismatches(const engine::Engine& e) {
    std::vector<std::string> out;
    const auto& s = e.structure();
    for (const auto* re : e.coordination()) {
        const CoordGraph& g = re->graph();
        const auto& cp = g.type();
        auto scope = lower_closure(s, g.coordinating());
        scope.insert(g.coordinating());

        auto steps_below = [&](InstanceId a, StepTypeIdx st) {
            std::set<StepId> r;
            for (InstanceId y : lower_closure(s, a))
                if (scope.count(y) && s.instance(y).type == cp.steps[st.idx()].type)
                    if (auto x = g.step_of(st, y)) r.insert(*x);
            return r;
        };
        auto ports_below = [&](InstanceId a, PortTypeIdx pt) {
            std::set<PortId> r;
            for (InstanceId y : lower_closure(s, a))
                if (scope.count(y) && s.instance(y).type == cp.steps[cp.ports[pt.idx()].step.idx()].type)
                    if (auto x = g.port_of(pt, y)) r.insert(*x);
            return r;
        };

        // every step instance must exist for every in-scope instance of its type
        for (InstanceId w : scope)
            for (StepTypeIdx st : cp.steps_of_type[s.instance(w).type.idx()])
                if (!g.step_of(st, w)) out.push_back(fmt::format("{}: missing step {} for {}", cp.name, cp.steps[st.idx()].id, s.instance(w).label));

        // expected anchors per transition
        for (std::size_t ti = 0; ti < cp.transitions.size(); ++ti) {
            TransTypeIdx t(ti);
            const auto& tt = cp.transitions[ti];
            std::map<std::string, Expected> want;
            auto tar_step_type = cp.ports[tt.target.idx()].step;
            auto tar_ptype = cp.steps[tar_step_type.idx()].type;
            auto src_ptype = cp.steps[tt.source.idx()].type;
            for (InstanceId w : scope) {
                TypeIdx wt = s.instance(w).type;
                Expected x;
                std::string key;
                if ((tt.kind == RelKind::Self || tt.kind == RelKind::TopDown) && wt == src_ptype) {
                    StepId a = *g.step_of(tt.source, w);
                    x.src = {a};
                    if (tt.kind == RelKind::Self) {
                        if (auto p = g.port_of(tt.target, w)) x.tar = {*p};
                    } else {
                        x.tar = ports_below(w, tt.target);
                    }
                    key = g.step_name(a);
                    Marking am = g.step(a).m;
                    if (tt.kind == RelKind::Self) {
                        x.completed = am == Marking::Completed;
                    } else {
                        const auto& v = e.view(w);
                        bool valid = tt.valid_states.empty() ||
                                     std::find(tt.valid_states.begin(), tt.valid_states.end(), v.active()) != tt.valid_states.end();
                        bool all_skipped = !tt.valid_states.empty() && std::all_of(tt.valid_states.begin(), tt.valid_states.end(), [&](StateIdx q) {
                            return v.marking(q) == StateMarking::Skipped;
                        });
                        x.completed = am == Marking::Completed && valid && !all_skipped;
                    }
                } else if (tt.kind == RelKind::BottomUp && wt == tar_ptype) {
                    PortId p = *g.port_of(tt.target, w);
                    x.tar = {p};
                    x.src = steps_below(w, tt.source);
                    key = g.port_name(p);
                } else if ((tt.kind == RelKind::Transverse || tt.kind == RelKind::SelfTransverse) && wt == tt.common_ancestor) {
                    x.src = steps_below(w, tt.source);
                    x.tar = ports_below(w, tt.target);
                    key = tt.id + "@" + s.instance(w).label;
                } else {
                    continue;
                }
                if (tt.kind != RelKind::Self && tt.kind != RelKind::TopDown) {
                    bool any_done = std::any_of(x.src.begin(), x.src.end(), [&](StepId q) { return g.step(q).m == Marking::Completed; });
                    bool lambda = !tt.lambda || tt.lambda->evaluate(TruthCounter(e, g, x.src, x.tar, tt));
                    x.completed = any_done && lambda;
                }
                if (key.rfind(tt.id + "@", 0) != 0) key = tt.id + "@" + key;
                want[key] = x;
            }
            std::map<std::string, CompId> have;
            for (CompId c : g.components_of(t))
                if (g.comp(c).alive) have[g.comp_name(c)] = c;
            for (const auto& [k, x] : want) {
                auto it = have.find(k);
                if (it == have.end()) {
                    out.push_back(fmt::format("{}: missing component {}", cp.name, k));
                    continue;
                }
                auto m = coordgraph::membership_of(g, it->second);
                if (m.src != x.src || m.tar != x.tar) {
                    auto names = [&](const auto& steps, const auto& ports) {
                        std::string r;
                        for (StepId q : steps) r += g.step_name(q) + "; ";
                        for (PortId q : ports) r += g.port_name(q) + "; ";
                        return r;
                    };
                    out.push_back(fmt::format("{}: membership of {} is [{}], expected [{}]", cp.name, k, names(m.src, m.tar), names(x.src, x.tar)));
                }
                bool done = g.comp(it->second).m == Marking::Completed;
                if (done != x.completed)
                    out.push_back(fmt::format("{}: {} is {}, evaluator says {}", cp.name, k, to_string(g.comp(it->second).m), x.completed ? "Completed" : "not Completed"));
            }
            for (const auto& [k, c] : have)
                if (!want.count(k)) out.push_back(fmt::format("{}: unexpected component {}", cp.name, k));
        }
    }
    return out;
}

std::vector<std::string> soundness_violations(const engine::Engine& e) {
    auto out = e.self_consistency_violations();
    for (const auto* re : e.coordination()) {
        const auto& g = re->graph();
        if (!re->snapshot().stable()) out.push_back(g.type().name + ": queue not empty");
        for (InstanceId w : g.scope().nodes()) {
            if (!e.exists(w)) {
                out.push_back(fmt::format("{}: mirror of removed instance {}", g.type().name, w.v));
                continue;
            }
            if (!(g.view(w) == e.view(w))) out.push_back(fmt::format("{}: mirror of {} is stale", g.type().name, g.instance_name(w)));
        }
        auto gm = graph_mismatches(g.scope());
        out.insert(out.end(), gm.begin(), gm.end());
    }
    return out;
}

std::map<std::string, std::string> snapshot(const engine::Engine& e) {
    std::map<std::string, std::string> out;
    for (const auto* re : e.coordination()) {
        const auto& g = re->graph();
        std::string cp = g.instance_name(g.coordinating()) + "/";
        for (std::size_t i = 0; i < g.step_count(); ++i)
            if (g.step(StepId(i)).alive) out["step " + cp + g.step_name(StepId(i))] = std::string(to_string(g.step(StepId(i)).m));
        for (std::size_t i = 0; i < g.port_count(); ++i)
            if (g.port(PortId(i)).alive) out["port " + cp + g.port_name(PortId(i))] = std::string(to_string(g.port(PortId(i)).m));
        for (std::size_t i = 0; i < g.comp_count(); ++i)
            if (g.comp(CompId(i)).alive) out["comp " + cp + g.comp_name(CompId(i))] = std::string(to_string(g.comp(CompId(i)).m));
    }
    for (const auto& [id, inst] : e.structure().instances()) {
        const auto& v = e.view(id);
        for (std::size_t i = 0; i < v.markings().size(); ++i) out["state " + inst.label + ":" + v.type().states[i]] = std::string(to_string(v.markings()[i]));
    }
    return out;
}

std::map<std::string, std::vector<std::string>> marking_sequences(const std::vector<rules::TraceRecord>& t) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& r : t)
        for (const auto& c : r.effects) {
            auto& seq = out[std::string(to_string(c.kind)) + " " + c.entity];
            if (seq.empty() && c.from != Marking::Update) seq.emplace_back(to_string(c.from));
            if (c.to == Marking::Update) continue;
            if (seq.empty() || seq.back() != to_string(c.to)) seq.emplace_back(to_string(c.to));
        }
    return out;
}

// ---------------------------------------------------------------------------
// random driver

std::string RandomDriver::step(engine::Engine& e) {
    int k = std::uniform_int_distribution<int>(0, 19)(rng);
    if (k < 3) return do_new(e);
    if (k < 7) return do_link(e);
    if (k < 8) return do_unlink(e);
    if (k < 9) return do_delete(e);
    if (k < 18) return do_commit(e);
    return do_back(e);
}

std::string RandomDriver::structural(engine::Engine& e) {
    switch (std::uniform_int_distribution<int>(0, 5)(rng)) {
        case 0:
        case 1: return do_new(e);
        case 2:
        case 3: return do_link(e);
        case 4: return do_unlink(e);
        default: return do_delete(e);
    }
}

std::string RandomDriver::do_new(engine::Engine& e) {
    const auto& m = e.model();
    TypeIdx t(std::uniform_int_distribution<std::size_t>(0, m.types().size() - 1)(rng));
    std::size_t n = 0;
    for (const auto& [id, inst] : e.structure().instances()) n += inst.type == t;
    if (n >= cap) return "skip new";
    auto id = e.instantiate(t);
    return "new " + e.structure().instance(id).label;
}

std::string RandomDriver::do_link(engine::Engine& e) {
    const auto& insts = e.structure().instances();
    if (insts.size() < 2) return do_new(e);
    InstanceId a = pick(insts).first;
    InstanceId b = pick(insts).first;
    // mostly pairs the model can relate whose source has no relation of that type yet
    if (std::uniform_int_distribution<int>(0, 4)(rng) != 0) {
        std::vector<std::pair<InstanceId, InstanceId>> fit;
        for (const auto& rt : e.model().relation_types())
            for (const auto& [x, xi] : insts) {
                if (xi.type != rt.source) continue;
                bool linked = std::any_of(e.structure().relations().begin(), e.structure().relations().end(),
                                          [&, x = x](const auto& r) { return r.second.source == x && e.structure().instance(r.second.target).type == rt.target; });
                if (linked) continue;
                for (const auto& [y, yi] : insts)
                    if (yi.type == rt.target) fit.emplace_back(x, y);
            }
        if (!fit.empty()) std::tie(a, b) = pick(fit);
    }
    if (a == b) return "skip link";
    std::string d = fmt::format("link {} {}", insts.at(a).label, insts.at(b).label);
    try {
        e.link(a, b);
    } catch (const structure::StructureError& x) {
        return d + " refused: " + x.what();
    }
    return d;
}

std::string RandomDriver::do_unlink(engine::Engine& e) {
    const auto& rels = e.structure().relations();
    if (rels.empty()) return "skip unlink";
    RelationId r = pick(rels).first;
    e.unlink(r);
    return fmt::format("unlink {}", r.v);
}

std::string RandomDriver::do_delete(engine::Engine& e) {
    const auto& insts = e.structure().instances();
    if (insts.empty()) return "skip delete";
    auto [id, inst] = pick(insts);
    std::string d = "delete " + inst.label;
    e.remove(id);
    return d;
}

std::string RandomDriver::do_commit(engine::Engine& e) {
    const auto& insts = e.structure().instances();
    if (insts.empty()) return "skip commit";
    InstanceId w = pick(insts).first;
    const auto& v = e.view(w);
    const auto& succ = v.type().succ[v.active().idx()];
    if (succ.empty()) return "skip commit";
    StateIdx to = pick(succ);
    std::string d = fmt::format("commit {} {}", insts.at(w).label, v.type().states[to.idx()]);
    try {
        auto r = e.commit(w, to);
        return d + (r == engine::CommitResult::Pending ? " pending" : "");
    } catch (const lifecycle::LifecycleError& x) {
        return d + " refused: " + x.what();
    }
}

std::string RandomDriver::do_back(engine::Engine& e) {
    const auto& insts = e.structure().instances();
    if (insts.empty()) return "skip back";
    InstanceId w = pick(insts).first;
    const auto& v = e.view(w);
    StateIdx from = v.pending() ? *v.pending() : v.active();
    const auto& back = v.type().back_targets[from.idx()];
    if (back.empty()) return "skip back";
    StateIdx to = pick(back);
    std::string d = fmt::format("back {} {}", insts.at(w).label, v.type().states[to.idx()]);
    try {
        e.backwards(w, to);
    } catch (const lifecycle::LifecycleError& x) {
        return d + " refused: " + x.what();
    }
    return d;
}

}  // namespace testkit
