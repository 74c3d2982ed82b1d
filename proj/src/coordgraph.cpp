#include "coordsem/coordgraph.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

namespace coordsem::coordgraph {

namespace {

template <class T>
void erase_one(std::vector<T>& v, T x) {
    auto it = std::find(v.begin(), v.end(), x);
    if (it != v.end()) v.erase(it);
}

// progress order used by the monitoring aggregates
int progress(Marking m) {
    switch (m) {
        case Marking::Inactive: return 0;
        case Marking::Update: return 0;
        case Marking::Active: return 1;
        case Marking::Completed: return 2;
        case Marking::Eliminated: return -1;
    }
    return 0;
}

Marking aggregate(const std::vector<Marking>& ms) {
    if (ms.empty()) return Marking::Inactive;
    bool all_elim = std::all_of(ms.begin(), ms.end(), [](Marking m) { return m == Marking::Eliminated; });
    if (all_elim) return Marking::Eliminated;
    int best = 0;
    for (Marking m : ms) best = std::max(best, progress(m));
    return best == 2 ? Marking::Completed : best == 1 ? Marking::Active : Marking::Inactive;
}

}  // namespace

CoordGraph::CoordGraph(model::ModelPtr m, CpTypeIdx cp, InstanceId coordinating)
    : model_(std::move(m)), cp_(&model_->cp(cp)), coord_(coordinating) {
    step_index_.resize(cp_->steps.size());
    port_index_.resize(cp_->ports.size());
    by_trans_.resize(cp_->transitions.size());
}

StateMarking CoordGraph::state_of(StepId s) const {
    const auto& st = steps_[s.idx()];
    return views_.at(st.inst).marking(cp_->steps[st.type.idx()].state);
}

std::optional<StepId> CoordGraph::step_of(StepTypeIdx t, InstanceId w) const {
    const auto& ix = step_index_[t.idx()];
    auto it = ix.find(w);
    if (it == ix.end()) return std::nullopt;
    return it->second;
}

std::optional<PortId> CoordGraph::port_of(PortTypeIdx t, InstanceId w) const {
    const auto& ix = port_index_[t.idx()];
    auto it = ix.find(w);
    if (it == ix.end()) return std::nullopt;
    return it->second;
}

std::vector<StepId> CoordGraph::steps_of(InstanceId w) const {
    std::vector<StepId> out;
    if (!scope_.contains(w)) return out;
    for (StepTypeIdx st : cp_->steps_of_type[scope_.type(w).idx()])
        if (auto s = step_of(st, w)) out.push_back(*s);
    return out;
}

std::vector<StepId> CoordGraph::container(StepTypeIdx t) const {
    std::vector<StepId> out;
    for (const auto& [w, s] : step_index_[t.idx()]) out.push_back(s);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CompId> CoordGraph::components_of(TransTypeIdx t) const {
    std::vector<CompId> out;
    for (CompId c : by_trans_[t.idx()])
        if (comps_[c.idx()].alive) out.push_back(c);
    return out;
}

std::string CoordGraph::instance_name(InstanceId w) const {
    auto it = labels_.find(w);
    return it != labels_.end() ? it->second : fmt::format("#{}", w.v);
}

std::string CoordGraph::step_name(StepId s) const {
    const auto& st = steps_[s.idx()];
    const auto& ct = cp_->steps[st.type.idx()];
    return instance_name(st.inst) + ":" + model_->type(ct.type).states[ct.state.idx()];
}

std::string CoordGraph::port_name(PortId p) const {
    const auto& pt = cp_->ports[ports_[p.idx()].type.idx()];
    return step_name(ports_[p.idx()].step) + pt.id.substr(pt.id.find('#'));
}

std::string CoordGraph::comp_name(CompId c) const {
    const auto& x = comps_[c.idx()];
    const auto& tid = cp_->transitions[x.trans.idx()].id;
    switch (x.kind) {
        case RelKind::Self:
        case RelKind::TopDown: return tid + "@" + step_name(x.anchor_step);
        case RelKind::BottomUp: return tid + "@" + port_name(x.anchor_port);
        default: return tid + "@" + instance_name(x.anchor_inst);
    }
}

// ---------------------------------------------------------------------------
// membership

void CoordGraph::compute_members(CompId c, std::vector<StepId>& src, std::vector<PortId>& tar) const {
    const auto& x = comps_[c.idx()];
    const auto& tt = cp_->transitions[x.trans.idx()];
    StepTypeIdx src_type = tt.source;
    PortTypeIdx tar_type = tt.target;
    TypeIdx src_ptype = cp_->steps[src_type.idx()].type;
    TypeIdx tar_ptype = cp_->steps[cp_->ports[tar_type.idx()].step.idx()].type;
    src.clear();
    tar.clear();
    auto collect_src = [&](InstanceId a) {
        for (InstanceId y : scope_.lower(a))
            if (scope_.type(y) == src_ptype)
                if (auto s = step_of(src_type, y)) src.push_back(*s);
    };
    auto collect_tar = [&](InstanceId a) {
        for (InstanceId y : scope_.lower(a))
            if (scope_.type(y) == tar_ptype)
                if (auto p = port_of(tar_type, y)) tar.push_back(*p);
    };
    switch (x.kind) {
        case RelKind::Self:
            src.push_back(x.anchor_step);
            if (auto p = port_of(tar_type, steps_[x.anchor_step.idx()].inst)) tar.push_back(*p);
            break;
        case RelKind::TopDown:
            src.push_back(x.anchor_step);
            collect_tar(steps_[x.anchor_step.idx()].inst);
            break;
        case RelKind::BottomUp:
            tar.push_back(x.anchor_port);
            collect_src(steps_[ports_[x.anchor_port.idx()].step.idx()].inst);
            break;
        case RelKind::Transverse:
        case RelKind::SelfTransverse:
            collect_src(x.anchor_inst);
            collect_tar(x.anchor_inst);
            break;
    }
    std::sort(src.begin(), src.end());
    std::sort(tar.begin(), tar.end());
}

void CoordGraph::set_members(CompId c, std::vector<StepId> src, std::vector<PortId> tar, Delta& d) {
    auto& x = comps_[c.idx()];
    bool changed = false;
    std::vector<StepId> gone_s, new_s;
    std::set_difference(x.src.begin(), x.src.end(), src.begin(), src.end(), std::back_inserter(gone_s));
    std::set_difference(src.begin(), src.end(), x.src.begin(), x.src.end(), std::back_inserter(new_s));
    for (StepId s : gone_s) erase_one(steps_[s.idx()].out, c);
    for (StepId s : new_s) steps_[s.idx()].out.push_back(c);
    std::vector<PortId> gone_p, new_p;
    std::set_difference(x.tar.begin(), x.tar.end(), tar.begin(), tar.end(), std::back_inserter(gone_p));
    std::set_difference(tar.begin(), tar.end(), x.tar.begin(), x.tar.end(), std::back_inserter(new_p));
    for (PortId p : gone_p) {
        erase_one(ports_[p.idx()].in, c);
        d.changed_ports.push_back(p);
    }
    for (PortId p : new_p) {
        ports_[p.idx()].in.push_back(c);
        d.changed_ports.push_back(p);
    }
    changed = !gone_s.empty() || !new_s.empty() || !gone_p.empty() || !new_p.empty();
    x.src = std::move(src);
    x.tar = std::move(tar);
    if (changed) d.changed_comps.push_back(c);
}

void CoordGraph::refresh(CompId c, Delta& d) {
    std::vector<StepId> src;
    std::vector<PortId> tar;
    compute_members(c, src, tar);
    set_members(c, std::move(src), std::move(tar), d);
}

void CoordGraph::refresh_anchored_at(InstanceId h, Delta& d) {
    auto it = anchored_.find(h);
    if (it == anchored_.end()) return;
    for (CompId c : it->second) {
        auto k = comps_[c.idx()].kind;
        if (k != RelKind::Self && comps_[c.idx()].alive) refresh(c, d);
    }
}

CompId CoordGraph::new_comp(TransTypeIdx t, Delta& d) {
    CompId id(comps_.size());
    CompInst x;
    const auto& tt = cp_->transitions[t.idx()];
    x.trans = t;
    x.kind = tt.kind;
    if (tt.lambda) x.lambda = *tt.lambda;
    comps_.push_back(std::move(x));
    by_trans_[t.idx()].push_back(id);
    d.new_comps.push_back(id);
    return id;
}

void CoordGraph::create_entities(InstanceId w, Delta& d) {
    TypeIdx t = scope_.type(w);
    std::vector<StepId> made_steps;
    std::vector<PortId> made_ports;
    for (StepTypeIdx st : cp_->steps_of_type[t.idx()]) {
        StepId sid(steps_.size());
        StepInst s;
        s.type = st;
        s.inst = w;
        steps_.push_back(std::move(s));
        step_index_[st.idx()][w] = sid;
        for (PortTypeIdx pt : cp_->steps[st.idx()].ports) {
            PortId pid(ports_.size());
            PortInst p;
            p.type = pt;
            p.step = sid;
            ports_.push_back(std::move(p));
            port_index_[pt.idx()][w] = pid;
            steps_[sid.idx()].ports.push_back(pid);
            made_ports.push_back(pid);
        }
        made_steps.push_back(sid);
    }
    d.new_steps.insert(d.new_steps.end(), made_steps.begin(), made_steps.end());
    d.new_ports.insert(d.new_ports.end(), made_ports.begin(), made_ports.end());

    auto& anchored = anchored_[w];
    for (StepId sid : made_steps)
        for (TransTypeIdx tr : cp_->steps[steps_[sid.idx()].type.idx()].out) {
            auto k = cp_->transitions[tr.idx()].kind;
            if (k != RelKind::Self && k != RelKind::TopDown) continue;
            CompId c = new_comp(tr, d);
            comps_[c.idx()].anchor_step = sid;
            anchored.push_back(c);
            refresh(c, d);
        }
    for (PortId pid : made_ports)
        for (TransTypeIdx tr : cp_->ports[ports_[pid.idx()].type.idx()].incoming) {
            if (cp_->transitions[tr.idx()].kind != RelKind::BottomUp) continue;
            CompId c = new_comp(tr, d);
            comps_[c.idx()].anchor_port = pid;
            anchored.push_back(c);
            refresh(c, d);
        }
    for (TransTypeIdx tr : cp_->anchored_at_type[t.idx()]) {
        CompId c = new_comp(tr, d);
        comps_[c.idx()].anchor_inst = w;
        anchored.push_back(c);
        refresh(c, d);
    }
}

Delta CoordGraph::add_instances(const std::vector<InstanceEntry>& joined, const std::vector<RelationEntry>& relations) {
    Delta d;
    for (const auto& e : joined) {
        if (scope_.contains(e.id)) continue;
        scope_.add_node(e.id, e.type);
        lifecycle::StateView v(model_->type(e.type));
        v.assign(e.view, e.version);
        views_.insert_or_assign(e.id, std::move(v));
        labels_[e.id] = e.label;
    }
    std::set<InstanceId> changed;
    for (const auto& r : relations) {
        if (scope_.has_edge(r.id) || !scope_.contains(r.low) || !scope_.contains(r.high)) continue;
        for (InstanceId h : scope_.add_edge(r.id, r.low, r.high)) changed.insert(h);
    }
    std::set<InstanceId> fresh;
    for (const auto& e : joined)
        if (fresh.insert(e.id).second) create_entities(e.id, d);
    // new step/port instances may now be members of components of other
    // instances, including fresh ones created before them in this batch
    std::set<InstanceId> anchors = changed;
    for (InstanceId w : fresh) {
        anchors.insert(w);
        for (InstanceId h : scope_.higher(w)) anchors.insert(h);
    }
    for (InstanceId h : anchors) refresh_anchored_at(h, d);
    return d;
}

Delta CoordGraph::add_relations(const std::vector<RelationEntry>& rels) { return add_instances({}, rels); }

Delta CoordGraph::remove_relations(const std::vector<RelationId>& rels) {
    Delta d;
    std::set<InstanceId> changed;
    for (RelationId r : rels) {
        if (!scope_.has_edge(r)) continue;
        for (InstanceId h : scope_.remove_edge(r)) changed.insert(h);
    }
    for (InstanceId h : changed) refresh_anchored_at(h, d);
    return d;
}

void CoordGraph::kill_comp(CompId c, Delta& d) {
    auto& x = comps_[c.idx()];
    if (!x.alive) return;
    for (StepId s : x.src) erase_one(steps_[s.idx()].out, c);
    for (PortId p : x.tar) {
        erase_one(ports_[p.idx()].in, c);
        d.changed_ports.push_back(p);
    }
    x.src.clear();
    x.tar.clear();
    x.alive = false;
}

void CoordGraph::drop_instance(InstanceId w, Delta& d) {
    if (auto it = anchored_.find(w); it != anchored_.end()) {
        for (CompId c : it->second) kill_comp(c, d);
        anchored_.erase(it);
    }
    for (StepId sid : steps_of(w)) {
        auto& s = steps_[sid.idx()];
        for (CompId c : std::vector<CompId>(s.out)) {
            auto& x = comps_[c.idx()];
            std::vector<StepId> src;
            std::copy_if(x.src.begin(), x.src.end(), std::back_inserter(src), [&](StepId y) { return y != sid; });
            set_members(c, std::move(src), x.tar, d);
        }
        for (PortId pid : s.ports) {
            auto& p = ports_[pid.idx()];
            for (CompId c : std::vector<CompId>(p.in)) {
                auto& x = comps_[c.idx()];
                std::vector<PortId> tar;
                std::copy_if(x.tar.begin(), x.tar.end(), std::back_inserter(tar), [&](PortId y) { return y != pid; });
                set_members(c, x.src, std::move(tar), d);
            }
            p.alive = false;
            port_index_[p.type.idx()].erase(w);
        }
        s.alive = false;
        step_index_[s.type.idx()].erase(w);
    }
    views_.erase(w);
    d.removed.push_back(w);
}

Delta CoordGraph::remove_instances(const std::vector<InstanceId>& left) {
    Delta d;
    std::set<InstanceId> changed;
    for (InstanceId w : left) {
        if (!scope_.contains(w)) continue;
        auto incident = scope_.incoming(w);
        const auto& o = scope_.outgoing(w);
        incident.insert(incident.end(), o.begin(), o.end());
        for (RelationId r : incident)
            for (InstanceId h : scope_.remove_edge(r)) changed.insert(h);
    }
    for (InstanceId w : left)
        if (scope_.contains(w)) drop_instance(w, d);
    for (InstanceId w : left)
        if (scope_.contains(w)) {
            scope_.remove_node(w);
            labels_.erase(w);
            changed.erase(w);
        }
    for (InstanceId h : changed) refresh_anchored_at(h, d);
    return d;
}

// ---------------------------------------------------------------------------
// monitoring

Marking CoordGraph::marking() const {
    for (std::size_t i = 0; i < cp_->steps.size(); ++i) {
        if (!cp_->steps[i].is_end) continue;
        for (const auto& [w, s] : step_index_[i])
            if (steps_[s.idx()].m == Marking::Completed) return Marking::Completed;
    }
    return Marking::Active;
}

Marking CoordGraph::container_marking(StepTypeIdx t) const {
    std::vector<Marking> ms;
    for (const auto& [w, s] : step_index_[t.idx()]) ms.push_back(steps_[s.idx()].m);
    return aggregate(ms);
}

Marking CoordGraph::transition_marking(TransTypeIdx t) const {
    std::vector<Marking> ms;
    for (CompId c : by_trans_[t.idx()])
        if (comps_[c.idx()].alive) ms.push_back(comps_[c.idx()].m);
    return aggregate(ms);
}

Marking CoordGraph::port_container_marking(PortTypeIdx t) const {
    std::vector<Marking> ms;
    for (const auto& [w, p] : port_index_[t.idx()]) ms.push_back(ports_[p.idx()].m);
    return aggregate(ms);
}

std::string CoordGraph::dump() const {
    std::ostringstream out;
    out << "cp " << cp_->name << " coordinating=" << instance_name(coord_) << " marking=" << to_string(marking()) << "\n";
    for (std::size_t i = 0; i < cp_->steps.size(); ++i) {
        StepTypeIdx st(i);
        out << "container " << cp_->steps[i].id << " marking=" << to_string(container_marking(st)) << "\n";
        for (StepId sid : container(st)) {
            const auto& s = steps_[sid.idx()];
            out << "  step " << step_name(sid) << " marking=" << to_string(s.m) << " state=" << to_string(state_of(sid)) << "\n";
            for (PortId pid : s.ports) {
                const auto& p = ports_[pid.idx()];
                std::vector<std::string> in;
                for (CompId c : p.in) in.push_back(comp_name(c));
                std::sort(in.begin(), in.end());
                out << "    port " << port_name(pid) << " marking=" << to_string(p.m) << " in=[" << fmt::format("{}", fmt::join(in, ", ")) << "]\n";
            }
        }
    }
    for (std::size_t i = 0; i < cp_->transitions.size(); ++i) {
        const auto& tt = cp_->transitions[i];
        out << "transition " << tt.id << " " << to_string(tt.kind) << " marking=" << to_string(transition_marking(TransTypeIdx(i))) << "\n";
        for (CompId c : components_of(TransTypeIdx(i))) {
            const auto& x = comps_[c.idx()];
            std::vector<std::string> src, tar;
            for (StepId s : x.src) src.push_back(step_name(s));
            for (PortId p : x.tar) tar.push_back(port_name(p));
            out << "  comp " << comp_name(c) << " marking=" << to_string(x.m);
            if (!x.lambda.empty()) out << " lambda=\"" << x.lambda.text() << "\"";
            out << " src=[" << fmt::format("{}", fmt::join(src, ", ")) << "] tar=[" << fmt::format("{}", fmt::join(tar, ", ")) << "]\n";
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// oracles

Membership membership_of(const CoordGraph& g, CompId c) {
    const auto& x = g.comp(c);
    return {std::set<StepId>(x.src.begin(), x.src.end()), std::set<PortId>(x.tar.begin(), x.tar.end())};
}

Membership membership_oracle(const CoordGraph& g, CompId c, const structure::Structure& truth) {
    // plain depth-first walk over the true relations, no maintained sets
    auto below = [&](InstanceId a) {
        std::set<InstanceId> seen;
        std::vector<InstanceId> stack{a};
        while (!stack.empty()) {
            InstanceId x = stack.back();
            stack.pop_back();
            for (const auto& [rid, r] : truth.relations())
                if (r.target == x && seen.insert(r.source).second) stack.push_back(r.source);
        }
        return seen;
    };
    auto scope = below(g.coordinating());
    scope.insert(g.coordinating());
    const auto& x = g.comp(c);
    const auto& cp = g.type();
    const auto& tt = cp.transitions[x.trans.idx()];
    Membership out;
    auto add_src = [&](InstanceId a) {
        for (InstanceId y : below(a))
            if (scope.count(y))
                if (auto s = g.step_of(tt.source, y)) out.src.insert(*s);
    };
    auto add_tar = [&](InstanceId a) {
        for (InstanceId y : below(a))
            if (scope.count(y))
                if (auto p = g.port_of(tt.target, y)) out.tar.insert(*p);
    };
    switch (x.kind) {
        case RelKind::Self:
            out.src.insert(x.anchor_step);
            if (auto p = g.port_of(tt.target, g.step(x.anchor_step).inst)) out.tar.insert(*p);
            break;
        case RelKind::TopDown:
            out.src.insert(x.anchor_step);
            add_tar(g.step(x.anchor_step).inst);
            break;
        case RelKind::BottomUp:
            out.tar.insert(x.anchor_port);
            add_src(g.step(g.port(x.anchor_port).step).inst);
            break;
        default:
            add_src(x.anchor_inst);
            add_tar(x.anchor_inst);
            break;
    }
    return out;
}

}  // namespace coordsem::coordgraph
