#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "coordsem/ids.hpp"
#include "coordsem/model.hpp"

namespace coordsem::structure {

using InstanceSet = std::set<InstanceId>;

// Directed relation graph (lower -> higher) with maintained transitive
// lower/higher-level sets. Used by the structure itself and mirrored inside
// every coordination process.
class RelationGraph {
public:
    void add_node(InstanceId id, TypeIdx type);
    // The node must have no incident edges.
    void remove_node(InstanceId id);
    // Returns the nodes whose lower-level set changed.
    std::vector<InstanceId> add_edge(RelationId r, InstanceId low, InstanceId high);
    std::vector<InstanceId> remove_edge(RelationId r);

    [[nodiscard]] bool contains(InstanceId id) const { return nodes_.count(id) != 0; }
    [[nodiscard]] bool has_edge(RelationId r) const { return edges_.count(r) != 0; }
    [[nodiscard]] TypeIdx type(InstanceId id) const { return node(id).type; }
    [[nodiscard]] const InstanceSet& lower(InstanceId id) const { return node(id).lower; }
    [[nodiscard]] const InstanceSet& higher(InstanceId id) const { return node(id).higher; }
    [[nodiscard]] const std::vector<RelationId>& incoming(InstanceId id) const { return node(id).in; }
    [[nodiscard]] const std::vector<RelationId>& outgoing(InstanceId id) const { return node(id).out; }
    [[nodiscard]] std::pair<InstanceId, InstanceId> edge(RelationId r) const { return edges_.at(r); }
    [[nodiscard]] const std::map<RelationId, std::pair<InstanceId, InstanceId>>& edges() const { return edges_; }
    [[nodiscard]] std::vector<InstanceId> nodes() const;
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        TypeIdx type;
        std::vector<RelationId> in;   // this node is the higher end
        std::vector<RelationId> out;  // this node is the lower end
        InstanceSet lower;
        InstanceSet higher;
    };
    [[nodiscard]] const Node& node(InstanceId id) const;
    InstanceSet collect(InstanceId start, bool down) const;

    std::map<InstanceId, Node> nodes_;
    std::map<RelationId, std::pair<InstanceId, InstanceId>> edges_;
};

struct StructureError : std::runtime_error {
    enum class Kind { UnknownType, UnknownInstance, UnknownRelation, NoRelationType, AmbiguousRelationType, Cardinality, Veto };
    Kind kind;
    StructureError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct Instance {
    InstanceId id;
    TypeIdx type;
    std::string label;
    std::map<std::string, std::string> attributes;
};

struct Relation {
    RelationId id;
    RelTypeIdx type;
    InstanceId source;  // lower
    InstanceId target;  // higher
};

struct LinkPlan {
    RelTypeIdx type;
    InstanceId source;
    InstanceId target;
};

struct BoundViolation {
    InstanceId instance;
    std::string relation_type;
    std::string message;
};

class Structure {
public:
    explicit Structure(model::ModelPtr m) : model_(std::move(m)) {}

    InstanceId create(TypeIdx type);
    InstanceId create(const std::string& type_name);

    // Resolves direction and relation type, checks upper bounds. Does not mutate.
    [[nodiscard]] LinkPlan plan_link(InstanceId a, InstanceId b, std::optional<RelTypeIdx> type = std::nullopt) const;
    RelationId apply_link(const LinkPlan& p);
    RelationId link(InstanceId a, InstanceId b, std::optional<RelTypeIdx> type = std::nullopt) { return apply_link(plan_link(a, b, type)); }

    void unlink(RelationId r);
    // Removes incident relations first; returns them.
    std::vector<Relation> remove(InstanceId id);

    void set_attribute(InstanceId id, const std::string& name, const std::string& value);

    [[nodiscard]] bool exists(InstanceId id) const { return instances_.count(id) != 0; }
    [[nodiscard]] const Instance& instance(InstanceId id) const;
    [[nodiscard]] const Relation& relation(RelationId r) const;
    [[nodiscard]] const std::map<InstanceId, Instance>& instances() const { return instances_; }
    [[nodiscard]] const std::map<RelationId, Relation>& relations() const { return relations_; }
    [[nodiscard]] const RelationGraph& graph() const { return graph_; }
    [[nodiscard]] const model::CompiledModel& model() const { return *model_; }

    [[nodiscard]] const InstanceSet& lower_level_of(InstanceId id) const;
    [[nodiscard]] const InstanceSet& higher_level_of(InstanceId id) const;
    [[nodiscard]] bool transitively_related(InstanceId a, InstanceId b) const;

    // Lower cardinality bounds are only reported, never enforced.
    [[nodiscard]] std::vector<BoundViolation> health() const;

    [[nodiscard]] std::string to_json() const;

private:
    void require(InstanceId id) const;
    std::size_t count_out(InstanceId src, RelTypeIdx t) const;
    std::size_t count_in(InstanceId tar, RelTypeIdx t) const;

    model::ModelPtr model_;
    std::map<InstanceId, Instance> instances_;
    std::map<RelationId, Relation> relations_;
    RelationGraph graph_;
    std::map<TypeIdx, std::uint32_t> per_type_counter_;
    std::uint32_t next_instance_ = 1;
    std::uint32_t next_relation_ = 1;
};

}  // namespace coordsem::structure
