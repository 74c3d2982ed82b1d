#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coordsem/expression.hpp"
#include "coordsem/ids.hpp"

namespace coordsem::model {

inline constexpr std::size_t unbounded = std::numeric_limits<std::size_t>::max();

struct StateViewDef {
    std::vector<std::string> states;
    std::vector<std::pair<std::string, std::string>> transitions;
    std::vector<std::pair<std::string, std::string>> backwards;
    std::string start;
    std::vector<std::string> end_states;
    std::vector<std::string> activity_free;
};

struct ProcessTypeDef {
    std::string name;
    StateViewDef view;
    std::vector<std::string> attributes;
};

struct RelationTypeDef {
    std::string name;
    std::string source;  // lower-level side
    std::string target;  // higher-level side
    std::size_t m_lower = 0;
    std::size_t m_upper = unbounded;
    std::size_t n_lower = 0;
    std::size_t n_upper = unbounded;
};

struct TypeStructure {
    std::string name;
    std::vector<ProcessTypeDef> process_types;
    std::vector<RelationTypeDef> relation_types;
};

enum class RelKind { TopDown, BottomUp, Transverse, Self, SelfTransverse };

[[nodiscard]] std::string_view to_string(RelKind k);
[[nodiscard]] std::optional<RelKind> rel_kind_from_string(std::string_view s);

struct SemanticRelDef {
    RelKind kind = RelKind::Self;
    std::optional<std::string> expression;
    std::optional<std::vector<std::string>> valid_states;
    std::optional<std::string> common_ancestor;
};

struct StepDef {
    std::string id;  // "Type:State"
    std::string type;
    std::string state;
    std::vector<std::string> ports;
};

struct PortDef {
    std::string id;
    std::string step;
    std::vector<std::string> incoming;
};

struct TransitionDef {
    std::string id;
    std::string source_step;
    std::string target_port;
    SemanticRelDef rel;
};

struct CoordProcessDef {
    std::string name;
    std::string coordinating_type;
    std::vector<StepDef> steps;
    std::vector<PortDef> ports;
    std::vector<TransitionDef> transitions;
};

struct Model {
    TypeStructure structure;
    std::vector<CoordProcessDef> coordination_processes;
};

struct LoadError : std::runtime_error {
    enum class Kind { Io, Parse, Reference };
    Kind kind;
    std::string location;
    LoadError(Kind k, std::string loc, const std::string& msg)
        : std::runtime_error(loc.empty() ? msg : loc + ": " + msg), kind(k), location(std::move(loc)) {}
};

[[nodiscard]] Model load_model(const std::filesystem::path& path);
[[nodiscard]] Model parse_model(const std::string& text, const std::string& origin = "<memory>");
[[nodiscard]] std::string serialize_model(const Model& m);

// The same model with every coordination process removed.
[[nodiscard]] Model strip_coordination(const Model& m);

struct Violation {
    std::string rule;
    std::string where;
    std::string message;
    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

[[nodiscard]] ValidationReport validate_model(const Model& m);

// Type-level lower-level sets (transitive), computed over the relation types.
class TypeLattice {
public:
    explicit TypeLattice(const TypeStructure& s);
    [[nodiscard]] bool known(const std::string& t) const { return index_.count(t) != 0; }
    [[nodiscard]] bool lower_of(const std::string& low, const std::string& high) const;
    [[nodiscard]] std::set<std::string> lower_set(const std::string& t) const;
    [[nodiscard]] std::set<std::string> common_ancestors(const std::string& a, const std::string& b) const;
    [[nodiscard]] bool acyclic() const { return acyclic_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<bool>> lower_;  // lower_[h][l]
    bool acyclic_ = true;
};

[[nodiscard]] std::set<RelKind> infer_semantic_relationship(const StepDef& src, const StepDef& tar, const TypeStructure& s);
[[nodiscard]] std::set<std::string> compute_scope(const CoordProcessDef& c, const TypeStructure& s);

// ---------------------------------------------------------------------------
// Index-based form of a validated model, shared read-only by all execution units.

struct CompiledType {
    std::string name;
    std::vector<std::string> states;
    std::unordered_map<std::string, StateIdx> state_index;
    StateIdx start;
    std::vector<bool> is_end;
    std::vector<bool> activity_free;
    std::vector<std::vector<StateIdx>> succ;
    std::vector<std::vector<StateIdx>> pred;
    std::vector<std::vector<StateIdx>> back_targets;  // per source state
    std::vector<std::vector<bool>> reach;             // reach[a][b]: b reachable from a by forward transitions (a != b)
    std::vector<std::string> attributes;

    [[nodiscard]] std::optional<StateIdx> state(const std::string& s) const;
    [[nodiscard]] bool is_forward(StateIdx from, StateIdx to) const;
    [[nodiscard]] bool is_backward(StateIdx from, StateIdx to) const;
};

struct CompiledRelationType {
    std::string name;
    TypeIdx source;
    TypeIdx target;
    std::size_t m_lower, m_upper, n_lower, n_upper;
};

struct CompiledStep {
    std::string id;
    TypeIdx type;
    StateIdx state;
    std::vector<PortTypeIdx> ports;
    std::vector<TransTypeIdx> out;
    bool is_start = false;
    bool is_end = false;
};

struct CompiledPort {
    std::string id;
    StepTypeIdx step;
    std::vector<TransTypeIdx> incoming;
};

struct CompiledTransition {
    std::string id;
    StepTypeIdx source;
    PortTypeIdx target;
    RelKind kind;
    std::optional<expr::Expr> lambda;
    std::vector<StateIdx> valid_states;  // of the source type
    TypeIdx common_ancestor;             // transverse / self-transverse only
};

struct CompiledCp {
    CpTypeIdx index;
    std::string name;
    TypeIdx coordinating_type;
    std::vector<CompiledStep> steps;
    std::vector<CompiledPort> ports;
    std::vector<CompiledTransition> transitions;
    std::vector<bool> in_scope;                        // per type
    std::vector<std::vector<StepTypeIdx>> steps_of_type;  // per type
    std::vector<std::vector<TransTypeIdx>> anchored_at_type;  // transverse kinds keyed by common ancestor type
    std::vector<StepTypeIdx> topo;
    StepTypeIdx start;

    [[nodiscard]] std::optional<StepTypeIdx> step_for(TypeIdx t, StateIdx s) const;
};

class CompiledModel {
public:
    // Throws std::invalid_argument when validate_model reports violations.
    static std::shared_ptr<const CompiledModel> compile(const Model& m);

    [[nodiscard]] const Model& source() const { return source_; }
    [[nodiscard]] const std::vector<CompiledType>& types() const { return types_; }
    [[nodiscard]] const CompiledType& type(TypeIdx t) const { return types_[t.idx()]; }
    [[nodiscard]] const std::vector<CompiledRelationType>& relation_types() const { return rels_; }
    [[nodiscard]] const CompiledRelationType& relation_type(RelTypeIdx r) const { return rels_[r.idx()]; }
    [[nodiscard]] const std::vector<CompiledCp>& cps() const { return cps_; }
    [[nodiscard]] const CompiledCp& cp(CpTypeIdx c) const { return cps_[c.idx()]; }
    [[nodiscard]] const std::vector<CpTypeIdx>& cps_coordinating(TypeIdx t) const { return cps_by_coord_[t.idx()]; }
    [[nodiscard]] std::optional<TypeIdx> type_index(const std::string& name) const;
    [[nodiscard]] bool lower_of(TypeIdx low, TypeIdx high) const { return lower_[high.idx()][low.idx()]; }
    // Relation types between the two types, in either direction.
    [[nodiscard]] std::vector<RelTypeIdx> relation_types_between(TypeIdx a, TypeIdx b) const;
    [[nodiscard]] std::optional<RelTypeIdx> relation_type_index(const std::string& name) const;

private:
    CompiledModel() = default;

    Model source_;
    std::vector<CompiledType> types_;
    std::unordered_map<std::string, TypeIdx> type_index_;
    std::vector<CompiledRelationType> rels_;
    std::vector<CompiledCp> cps_;
    std::vector<std::vector<CpTypeIdx>> cps_by_coord_;
    std::vector<std::vector<bool>> lower_;
};

using ModelPtr = std::shared_ptr<const CompiledModel>;

}  // namespace coordsem::model
