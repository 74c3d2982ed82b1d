#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "coordsem/expression.hpp"
#include "coordsem/ids.hpp"
#include "coordsem/lifecycle.hpp"
#include "coordsem/markings.hpp"
#include "coordsem/model.hpp"
#include "coordsem/structure.hpp"

namespace coordsem::coordgraph {

using model::RelKind;

struct StepInst {
    StepTypeIdx type;
    InstanceId inst;
    Marking m = Marking::Inactive;
    Marking before = Marking::Inactive;  // marking prior to the pending Update
    std::vector<PortId> ports;           // parallel to the container's port containers
    std::vector<CompId> out;             // every component this step is a source member of
    bool alive = true;
};

struct PortInst {
    PortTypeIdx type;
    StepId step;
    Marking m = Marking::Inactive;
    Marking before = Marking::Inactive;
    std::vector<CompId> in;  // every component this port is a target member of
    bool alive = true;
};

// One record for all five variants. src and tar are B_src / H_tar; for
// self and top-down src is the single instantiating step, for self and
// bottom-up tar is the single target port.
struct CompInst {
    TransTypeIdx trans;
    RelKind kind = RelKind::Self;
    Marking m = Marking::Inactive;
    Marking before = Marking::Inactive;
    StepId anchor_step;      // self, top-down
    PortId anchor_port;      // bottom-up
    InstanceId anchor_inst;  // transverse kinds: the common ancestor instance
    std::vector<StepId> src;
    std::vector<PortId> tar;
    expr::Expr lambda;  // private copy
    bool alive = true;
};

// What a graph mutation touched, so the rule engine can raise events.
struct Delta {
    std::vector<StepId> new_steps;
    std::vector<PortId> new_ports;
    std::vector<CompId> new_comps;
    std::vector<CompId> changed_comps;  // membership changed
    std::vector<StepId> changed_steps;  // lost an outgoing component
    std::vector<PortId> changed_ports;  // lost an incoming component
    std::vector<InstanceId> removed;
};

struct InstanceEntry {
    InstanceId id;
    TypeIdx type;
    std::string label;
    std::vector<StateMarking> view;
    std::uint64_t version = 0;
};

struct RelationEntry {
    RelationId id;
    InstanceId low;
    InstanceId high;
};

// Run-time coordination graph of one coordination process instance: static
// containers plus the dynamic entities of every in-scope process instance,
// together with the mirrored sub-structure and state views it needs.
class CoordGraph {
public:
    CoordGraph(model::ModelPtr m, CpTypeIdx cp, InstanceId coordinating);

    [[nodiscard]] const model::CompiledCp& type() const { return *cp_; }
    [[nodiscard]] const model::CompiledModel& model() const { return *model_; }
    [[nodiscard]] InstanceId coordinating() const { return coord_; }

    // Structure changes. Nodes first, then edges.
    Delta add_instances(const std::vector<InstanceEntry>& joined, const std::vector<RelationEntry>& relations);
    Delta remove_relations(const std::vector<RelationId>& rels);
    Delta add_relations(const std::vector<RelationEntry>& rels);
    Delta remove_instances(const std::vector<InstanceId>& left);

    [[nodiscard]] bool in_scope(InstanceId w) const { return scope_.contains(w); }
    [[nodiscard]] const structure::RelationGraph& scope() const { return scope_; }
    [[nodiscard]] const lifecycle::StateView& view(InstanceId w) const { return views_.at(w); }
    [[nodiscard]] lifecycle::StateView& view_mut(InstanceId w) { return views_.at(w); }
    [[nodiscard]] bool has_view(InstanceId w) const { return views_.count(w) != 0; }
    [[nodiscard]] StateMarking state_of(StepId s) const;

    // Entity access. Ids are never reused; dead entities stay with alive=false.
    [[nodiscard]] StepInst& step(StepId s) { return steps_[s.idx()]; }
    [[nodiscard]] const StepInst& step(StepId s) const { return steps_[s.idx()]; }
    [[nodiscard]] PortInst& port(PortId p) { return ports_[p.idx()]; }
    [[nodiscard]] const PortInst& port(PortId p) const { return ports_[p.idx()]; }
    [[nodiscard]] CompInst& comp(CompId c) { return comps_[c.idx()]; }
    [[nodiscard]] const CompInst& comp(CompId c) const { return comps_[c.idx()]; }
    [[nodiscard]] std::size_t step_count() const { return steps_.size(); }
    [[nodiscard]] std::size_t port_count() const { return ports_.size(); }
    [[nodiscard]] std::size_t comp_count() const { return comps_.size(); }

    [[nodiscard]] std::optional<StepId> step_of(StepTypeIdx t, InstanceId w) const;
    [[nodiscard]] std::optional<PortId> port_of(PortTypeIdx t, InstanceId w) const;
    // Step instances of w, in container order.
    [[nodiscard]] std::vector<StepId> steps_of(InstanceId w) const;
    // Live step instances of one container.
    [[nodiscard]] std::vector<StepId> container(StepTypeIdx t) const;
    [[nodiscard]] std::vector<CompId> components_of(TransTypeIdx t) const;

    [[nodiscard]] std::string step_name(StepId s) const;
    [[nodiscard]] std::string port_name(PortId p) const;
    [[nodiscard]] std::string comp_name(CompId c) const;
    [[nodiscard]] std::string instance_name(InstanceId w) const;

    // Monitoring aggregates.
    [[nodiscard]] Marking marking() const;
    [[nodiscard]] Marking container_marking(StepTypeIdx t) const;
    [[nodiscard]] Marking transition_marking(TransTypeIdx t) const;
    [[nodiscard]] Marking port_container_marking(PortTypeIdx t) const;

    [[nodiscard]] std::string dump() const;

private:
    void create_entities(InstanceId w, Delta& d);
    CompId new_comp(TransTypeIdx t, Delta& d);
    void set_members(CompId c, std::vector<StepId> src, std::vector<PortId> tar, Delta& d);
    void refresh_anchored_at(InstanceId h, Delta& d);
    void refresh(CompId c, Delta& d);
    void compute_members(CompId c, std::vector<StepId>& src, std::vector<PortId>& tar) const;
    void kill_comp(CompId c, Delta& d);
    void drop_instance(InstanceId w, Delta& d);

    model::ModelPtr model_;
    const model::CompiledCp* cp_;
    InstanceId coord_;

    structure::RelationGraph scope_;
    std::unordered_map<InstanceId, lifecycle::StateView> views_;
    std::unordered_map<InstanceId, std::string> labels_;

    std::vector<StepInst> steps_;
    std::vector<PortInst> ports_;
    std::vector<CompInst> comps_;
    std::vector<std::unordered_map<InstanceId, StepId>> step_index_;  // per step type
    std::vector<std::unordered_map<InstanceId, PortId>> port_index_;  // per port type
    std::unordered_map<InstanceId, std::vector<CompId>> anchored_;    // components whose anchor lives on the instance
    std::vector<std::vector<CompId>> by_trans_;
};

// Recomputes B_src and H_tar of a component from scratch by walking the
// given structure's relations. Test equipment for the incremental sets.
struct Membership {
    std::set<StepId> src;
    std::set<PortId> tar;
    bool operator==(const Membership&) const = default;
};
[[nodiscard]] Membership membership_oracle(const CoordGraph& g, CompId c, const structure::Structure& truth);
[[nodiscard]] Membership membership_of(const CoordGraph& g, CompId c);

}  // namespace coordsem::coordgraph
