#include "coordsem/structure.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

namespace coordsem::structure {

using Kind = StructureError::Kind;

// ---------------------------------------------------------------------------
// RelationGraph

const RelationGraph::Node& RelationGraph::node(InstanceId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw StructureError(Kind::UnknownInstance, fmt::format("unknown instance {}", id.v));
    return it->second;
}

std::vector<InstanceId> RelationGraph::nodes() const {
    std::vector<InstanceId> out;
    out.reserve(nodes_.size());
    for (const auto& [id, n] : nodes_) out.push_back(id);
    return out;
}

void RelationGraph::add_node(InstanceId id, TypeIdx type) { nodes_[id].type = type; }

void RelationGraph::remove_node(InstanceId id) {
    const Node& n = node(id);
    if (!n.in.empty() || !n.out.empty()) throw std::logic_error("remove_node with incident edges");
    nodes_.erase(id);
}

InstanceSet RelationGraph::collect(InstanceId start, bool down) const {
    InstanceSet seen;
    std::vector<InstanceId> stack{start};
    while (!stack.empty()) {
        InstanceId x = stack.back();
        stack.pop_back();
        const Node& n = nodes_.at(x);
        for (RelationId r : down ? n.in : n.out) {
            auto [low, high] = edges_.at(r);
            InstanceId y = down ? low : high;
            if (seen.insert(y).second) stack.push_back(y);
        }
    }
    return seen;
}

std::vector<InstanceId> RelationGraph::add_edge(RelationId r, InstanceId low, InstanceId high) {
    Node& lo = nodes_.at(low);
    Node& hi = nodes_.at(high);
    edges_[r] = {low, high};
    lo.out.push_back(r);
    hi.in.push_back(r);

    InstanceSet gained_below = lo.lower;
    gained_below.insert(low);
    InstanceSet gained_above = hi.higher;
    gained_above.insert(high);

    std::vector<InstanceId> changed;
    for (InstanceId h : gained_above) {
        auto& L = nodes_.at(h).lower;
        std::size_t before = L.size();
        L.insert(gained_below.begin(), gained_below.end());
        if (L.size() != before) changed.push_back(h);
    }
    for (InstanceId l : gained_below) {
        auto& H = nodes_.at(l).higher;
        H.insert(gained_above.begin(), gained_above.end());
    }
    return changed;
}

std::vector<InstanceId> RelationGraph::remove_edge(RelationId r) {
    auto it = edges_.find(r);
    if (it == edges_.end()) throw StructureError(Kind::UnknownRelation, fmt::format("unknown relation {}", r.v));
    auto [low, high] = it->second;
    InstanceSet above = nodes_.at(high).higher;
    above.insert(high);
    InstanceSet below = nodes_.at(low).lower;
    below.insert(low);
    edges_.erase(it);
    auto drop = [r](std::vector<RelationId>& v) { v.erase(std::find(v.begin(), v.end(), r)); };
    drop(nodes_.at(low).out);
    drop(nodes_.at(high).in);

    std::vector<InstanceId> changed;
    for (InstanceId h : above) {
        auto fresh = collect(h, true);
        auto& L = nodes_.at(h).lower;
        if (fresh != L) {
            L = std::move(fresh);
            changed.push_back(h);
        }
    }
    for (InstanceId l : below) nodes_.at(l).higher = collect(l, false);
    return changed;
}

// ---------------------------------------------------------------------------
// Structure

void Structure::require(InstanceId id) const {
    if (!instances_.count(id)) throw StructureError(Kind::UnknownInstance, fmt::format("unknown instance {}", id.v));
}

const Instance& Structure::instance(InstanceId id) const {
    require(id);
    return instances_.at(id);
}

const Relation& Structure::relation(RelationId r) const {
    auto it = relations_.find(r);
    if (it == relations_.end()) throw StructureError(Kind::UnknownRelation, fmt::format("unknown relation {}", r.v));
    return it->second;
}

InstanceId Structure::create(TypeIdx type) {
    if (!type.valid() || type.idx() >= model_->types().size())
        throw StructureError(Kind::UnknownType, "unknown process type");
    InstanceId id(next_instance_++);
    auto n = ++per_type_counter_[type];
    instances_[id] = Instance{id, type, fmt::format("{} {}", model_->type(type).name, n), {}};
    graph_.add_node(id, type);
    return id;
}

InstanceId Structure::create(const std::string& type_name) {
    auto t = model_->type_index(type_name);
    if (!t) throw StructureError(Kind::UnknownType, "unknown process type '" + type_name + "'");
    return create(*t);
}

std::size_t Structure::count_out(InstanceId src, RelTypeIdx t) const {
    std::size_t n = 0;
    for (RelationId r : graph_.outgoing(src))
        if (relations_.at(r).type == t) ++n;
    return n;
}

std::size_t Structure::count_in(InstanceId tar, RelTypeIdx t) const {
    std::size_t n = 0;
    for (RelationId r : graph_.incoming(tar))
        if (relations_.at(r).type == t) ++n;
    return n;
}

LinkPlan Structure::plan_link(InstanceId a, InstanceId b, std::optional<RelTypeIdx> type) const {
    require(a);
    require(b);
    TypeIdx ta = instances_.at(a).type;
    TypeIdx tb = instances_.at(b).type;
    LinkPlan p;
    if (type) {
        const auto& rt = model_->relation_type(*type);
        if (rt.source == ta && rt.target == tb) p = {*type, a, b};
        else if (rt.source == tb && rt.target == ta) p = {*type, b, a};
        else throw StructureError(Kind::NoRelationType, "relation type '" + rt.name + "' does not connect these instances");
    } else {
        auto cands = model_->relation_types_between(ta, tb);
        if (cands.empty())
            throw StructureError(Kind::NoRelationType,
                                 fmt::format("no relation type between {} and {}", model_->type(ta).name, model_->type(tb).name));
        if (cands.size() > 1) throw StructureError(Kind::AmbiguousRelationType, "several relation types apply, name one explicitly");
        const auto& rt = model_->relation_type(cands.front());
        p = rt.source == ta ? LinkPlan{cands.front(), a, b} : LinkPlan{cands.front(), b, a};
    }
    const auto& rt = model_->relation_type(p.type);
    if (count_out(p.source, p.type) + 1 > rt.m_upper)
        throw StructureError(Kind::Cardinality, fmt::format("{} already has {} '{}' relation(s), upper bound {}", instances_.at(p.source).label,
                                                            count_out(p.source, p.type), rt.name, rt.m_upper));
    if (count_in(p.target, p.type) + 1 > rt.n_upper)
        throw StructureError(Kind::Cardinality, fmt::format("{} already has {} incoming '{}' relation(s), upper bound {}", instances_.at(p.target).label,
                                                            count_in(p.target, p.type), rt.name, rt.n_upper));
    return p;
}

RelationId Structure::apply_link(const LinkPlan& p) {
    RelationId id(next_relation_++);
    relations_[id] = Relation{id, p.type, p.source, p.target};
    graph_.add_edge(id, p.source, p.target);
    return id;
}

void Structure::unlink(RelationId r) {
    (void)relation(r);  // throws for unknown ids
    graph_.remove_edge(r);
    relations_.erase(r);
}

std::vector<Relation> Structure::remove(InstanceId id) {
    require(id);
    std::vector<Relation> out;
    auto incident = graph_.incoming(id);
    const auto& o = graph_.outgoing(id);
    incident.insert(incident.end(), o.begin(), o.end());
    for (RelationId r : incident) {
        out.push_back(relations_.at(r));
        unlink(r);
    }
    graph_.remove_node(id);
    instances_.erase(id);
    return out;
}

void Structure::set_attribute(InstanceId id, const std::string& name, const std::string& value) {
    require(id);
    instances_.at(id).attributes[name] = value;
}

const InstanceSet& Structure::lower_level_of(InstanceId id) const {
    require(id);
    return graph_.lower(id);
}

const InstanceSet& Structure::higher_level_of(InstanceId id) const {
    require(id);
    return graph_.higher(id);
}

bool Structure::transitively_related(InstanceId a, InstanceId b) const {
    return lower_level_of(a).count(b) || higher_level_of(a).count(b);
}

std::vector<BoundViolation> Structure::health() const {
    std::vector<BoundViolation> out;
    for (const auto& [id, inst] : instances_) {
        for (std::size_t ri = 0; ri < model_->relation_types().size(); ++ri) {
            const auto& rt = model_->relation_types()[ri];
            RelTypeIdx r(ri);
            if (rt.source == inst.type && count_out(id, r) < rt.m_lower)
                out.push_back({id, rt.name, fmt::format("{} has {} '{}' targets, needs {}", inst.label, count_out(id, r), rt.name, rt.m_lower)});
            if (rt.target == inst.type && count_in(id, r) < rt.n_lower)
                out.push_back({id, rt.name, fmt::format("{} has {} '{}' sources, needs {}", inst.label, count_in(id, r), rt.name, rt.n_lower)});
        }
    }
    return out;
}

std::string Structure::to_json() const {
    nlohmann::ordered_json doc;
    doc["instances"] = nlohmann::ordered_json::array();
    for (const auto& [id, inst] : instances_) {
        nlohmann::ordered_json j;
        j["id"] = id.v;
        j["type"] = model_->type(inst.type).name;
        j["label"] = inst.label;
        j["attributes"] = inst.attributes;
        auto ids = [](const InstanceSet& s) {
            std::vector<std::uint32_t> v;
            for (auto x : s) v.push_back(x.v);
            return v;
        };
        j["lower"] = ids(graph_.lower(id));
        j["higher"] = ids(graph_.higher(id));
        doc["instances"].push_back(j);
    }
    doc["relations"] = nlohmann::ordered_json::array();
    for (const auto& [id, r] : relations_)
        doc["relations"].push_back({{"id", id.v}, {"type", model_->relation_type(r.type).name}, {"source", r.source.v}, {"target", r.target.v}});
    return doc.dump(2);
}

}  // namespace coordsem::structure
