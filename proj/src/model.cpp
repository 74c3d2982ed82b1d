#include "coordsem/model.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace coordsem::model {

using json = nlohmann::ordered_json;

std::string_view to_string(RelKind k) {
    switch (k) {
        case RelKind::TopDown: return "top-down";
        case RelKind::BottomUp: return "bottom-up";
        case RelKind::Transverse: return "transverse";
        case RelKind::Self: return "self";
        case RelKind::SelfTransverse: return "self-transverse";
    }
    return "?";
}

std::optional<RelKind> rel_kind_from_string(std::string_view s) {
    for (RelKind k : {RelKind::TopDown, RelKind::BottomUp, RelKind::Transverse, RelKind::Self, RelKind::SelfTransverse})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// loading

namespace {

std::size_t bound(const json& j, const char* key, std::size_t dflt) {
    if (!j.contains(key) || j[key].is_null()) return dflt;
    return j[key].get<std::size_t>();
}

std::vector<std::string> strings(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    return j[key].get<std::vector<std::string>>();
}

std::vector<std::pair<std::string, std::string>> pairs(const json& j, const char* key) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!j.contains(key)) return out;
    for (const auto& p : j[key]) out.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    return out;
}

void check_references(const Model& m) {
    using K = LoadError::Kind;
    std::map<std::string, const ProcessTypeDef*> types;
    for (std::size_t i = 0; i < m.structure.process_types.size(); ++i) {
        const auto& t = m.structure.process_types[i];
        types[t.name] = &t;
        auto has = [&](const std::string& s) { return std::find(t.view.states.begin(), t.view.states.end(), s) != t.view.states.end(); };
        std::string loc = fmt::format("structure.process_types[{}] '{}'", i, t.name);
        if (!t.view.start.empty() && !has(t.view.start)) throw LoadError(K::Reference, loc, "unknown start state '" + t.view.start + "'");
        for (const auto& [a, b] : t.view.transitions)
            if (!has(a) || !has(b)) throw LoadError(K::Reference, loc, "transition references unknown state '" + (has(a) ? b : a) + "'");
        for (const auto& [a, b] : t.view.backwards)
            if (!has(a) || !has(b)) throw LoadError(K::Reference, loc, "backwards transition references unknown state '" + (has(a) ? b : a) + "'");
        for (const auto& s : t.view.end_states)
            if (!has(s)) throw LoadError(K::Reference, loc, "unknown end state '" + s + "'");
        for (const auto& s : t.view.activity_free)
            if (!has(s)) throw LoadError(K::Reference, loc, "unknown activity-free state '" + s + "'");
    }
    for (std::size_t i = 0; i < m.structure.relation_types.size(); ++i) {
        const auto& r = m.structure.relation_types[i];
        std::string loc = fmt::format("structure.relation_types[{}] '{}'", i, r.name);
        if (!types.count(r.source)) throw LoadError(K::Reference, loc, "unknown source type '" + r.source + "'");
        if (!types.count(r.target)) throw LoadError(K::Reference, loc, "unknown target type '" + r.target + "'");
    }
    for (std::size_t c = 0; c < m.coordination_processes.size(); ++c) {
        const auto& cp = m.coordination_processes[c];
        std::string cloc = fmt::format("coordination_processes[{}] '{}'", c, cp.name);
        if (!types.count(cp.coordinating_type)) throw LoadError(K::Reference, cloc, "unknown coordinating type '" + cp.coordinating_type + "'");
        std::set<std::string> steps;
        std::set<std::string> ports;
        for (std::size_t s = 0; s < cp.steps.size(); ++s) {
            const auto& st = cp.steps[s];
            std::string loc = fmt::format("{}.steps[{}] '{}'", cloc, s, st.id);
            auto it = types.find(st.type);
            if (it == types.end()) throw LoadError(K::Reference, loc, "unknown process type '" + st.type + "'");
            const auto& states = it->second->view.states;
            if (std::find(states.begin(), states.end(), st.state) == states.end())
                throw LoadError(K::Reference, loc, "unknown state '" + st.state + "'");
            steps.insert(st.id);
            for (const auto& p : st.ports) ports.insert(p);
        }
        for (std::size_t t = 0; t < cp.transitions.size(); ++t) {
            const auto& tr = cp.transitions[t];
            std::string loc = fmt::format("{}.transitions[{}] '{}'", cloc, t, tr.id);
            if (!steps.count(tr.source_step)) throw LoadError(K::Reference, loc, "unknown source step '" + tr.source_step + "'");
            if (!ports.count(tr.target_port)) throw LoadError(K::Reference, loc, "unknown target port '" + tr.target_port + "'");
            if (tr.rel.common_ancestor && !types.count(*tr.rel.common_ancestor))
                throw LoadError(K::Reference, loc, "unknown common ancestor '" + *tr.rel.common_ancestor + "'");
            if (tr.rel.valid_states) {
                const auto& src = *std::find_if(cp.steps.begin(), cp.steps.end(), [&](const StepDef& s) { return s.id == tr.source_step; });
                const auto& states = types[src.type]->view.states;
                for (const auto& v : *tr.rel.valid_states)
                    if (std::find(states.begin(), states.end(), v) == states.end())
                        throw LoadError(K::Reference, loc, "unknown valid state '" + v + "'");
            }
        }
    }
}

Model from_json(const json& doc) {
    using K = LoadError::Kind;
    Model m;
    if (!doc.is_object()) throw LoadError(K::Parse, "", "model document must be an object");
    if (doc.contains("structure")) {
        const auto& s = doc["structure"];
        m.structure.name = s.value("name", std::string{});
        if (s.contains("process_types"))
            for (const auto& t : s["process_types"]) {
                ProcessTypeDef p;
                p.name = t.at("name").get<std::string>();
                p.attributes = strings(t, "attributes");
                p.view.states = strings(t, "states");
                p.view.start = t.value("start", std::string{});
                p.view.end_states = strings(t, "end");
                p.view.transitions = pairs(t, "transitions");
                p.view.backwards = pairs(t, "backwards");
                p.view.activity_free = strings(t, "activity_free");
                m.structure.process_types.push_back(std::move(p));
            }
        if (s.contains("relation_types"))
            for (const auto& r : s["relation_types"]) {
                RelationTypeDef d;
                d.source = r.at("source").get<std::string>();
                d.target = r.at("target").get<std::string>();
                d.name = r.value("name", d.source + "->" + d.target);
                d.m_lower = bound(r, "m_lower", 0);
                d.m_upper = bound(r, "m_upper", unbounded);
                d.n_lower = bound(r, "n_lower", 0);
                d.n_upper = bound(r, "n_upper", unbounded);
                m.structure.relation_types.push_back(std::move(d));
            }
    }
    if (doc.contains("coordination_processes"))
        for (const auto& c : doc["coordination_processes"]) {
            CoordProcessDef cp;
            cp.name = c.value("name", std::string{});
            cp.coordinating_type = c.at("coordinating_type").get<std::string>();
            std::map<std::string, std::size_t> port_index;
            for (const auto& s : c.at("steps")) {
                StepDef st;
                st.id = s.at("step").get<std::string>();
                auto colon = st.id.find(':');
                if (colon == std::string::npos) throw LoadError(K::Parse, "step '" + st.id + "'", "step key must be 'Type:State'");
                st.type = st.id.substr(0, colon);
                st.state = st.id.substr(colon + 1);
                for (const auto& p : strings(s, "ports")) {
                    std::string pid = st.id + "#" + p;
                    st.ports.push_back(pid);
                    port_index[pid] = cp.ports.size();
                    cp.ports.push_back(PortDef{pid, st.id, {}});
                }
                cp.steps.push_back(std::move(st));
            }
            std::size_t n = 0;
            for (const auto& t : c.at("transitions")) {
                TransitionDef tr;
                tr.id = t.value("id", fmt::format("t{}", ++n));
                tr.source_step = t.at("from").get<std::string>();
                tr.target_port = t.at("to").get<std::string>();
                auto kind = rel_kind_from_string(t.at("kind").get<std::string>());
                if (!kind) throw LoadError(K::Parse, "transition '" + tr.id + "'", "unknown kind '" + t["kind"].get<std::string>() + "'");
                tr.rel.kind = *kind;
                if (t.contains("expression")) tr.rel.expression = t["expression"].get<std::string>();
                if (t.contains("valid_states")) tr.rel.valid_states = t["valid_states"].get<std::vector<std::string>>();
                if (t.contains("common_ancestor")) tr.rel.common_ancestor = t["common_ancestor"].get<std::string>();
                auto pi = port_index.find(tr.target_port);
                if (pi != port_index.end()) cp.ports[pi->second].incoming.push_back(tr.id);
                cp.transitions.push_back(std::move(tr));
            }
            m.coordination_processes.push_back(std::move(cp));
        }
    return m;
}

}  // namespace

Model parse_model(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(LoadError::Kind::Parse, origin, e.what());
    }
    Model m;
    try {
        m = from_json(doc);
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Parse, origin, e.what());
    }
    check_references(m);
    return m;
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(LoadError::Kind::Io, path.string(), "cannot open model file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str(), path.string());
}

std::string serialize_model(const Model& m) {
    json doc;
    json s;
    s["name"] = m.structure.name;
    s["process_types"] = json::array();
    for (const auto& t : m.structure.process_types) {
        json j;
        j["name"] = t.name;
        j["attributes"] = t.attributes;
        j["states"] = t.view.states;
        j["start"] = t.view.start;
        j["end"] = t.view.end_states;
        j["transitions"] = json::array();
        for (const auto& [a, b] : t.view.transitions) j["transitions"].push_back({a, b});
        j["backwards"] = json::array();
        for (const auto& [a, b] : t.view.backwards) j["backwards"].push_back({a, b});
        j["activity_free"] = t.view.activity_free;
        s["process_types"].push_back(j);
    }
    s["relation_types"] = json::array();
    for (const auto& r : m.structure.relation_types) {
        json j;
        j["name"] = r.name;
        j["source"] = r.source;
        j["target"] = r.target;
        auto put = [&](const char* k, std::size_t v) { j[k] = v == unbounded ? json(nullptr) : json(v); };
        put("m_lower", r.m_lower);
        put("m_upper", r.m_upper);
        put("n_lower", r.n_lower);
        put("n_upper", r.n_upper);
        s["relation_types"].push_back(j);
    }
    doc["structure"] = s;
    doc["coordination_processes"] = json::array();
    for (const auto& c : m.coordination_processes) {
        json j;
        j["name"] = c.name;
        j["coordinating_type"] = c.coordinating_type;
        j["steps"] = json::array();
        for (const auto& st : c.steps) {
            json sj;
            sj["step"] = st.id;
            sj["ports"] = json::array();
            for (const auto& p : st.ports) sj["ports"].push_back(p.substr(p.find('#') + 1));
            j["steps"].push_back(sj);
        }
        j["transitions"] = json::array();
        for (const auto& t : c.transitions) {
            json tj;
            tj["id"] = t.id;
            tj["from"] = t.source_step;
            tj["to"] = t.target_port;
            tj["kind"] = std::string(to_string(t.rel.kind));
            if (t.rel.expression) tj["expression"] = *t.rel.expression;
            if (t.rel.valid_states) tj["valid_states"] = *t.rel.valid_states;
            if (t.rel.common_ancestor) tj["common_ancestor"] = *t.rel.common_ancestor;
            j["transitions"].push_back(tj);
        }
        doc["coordination_processes"].push_back(j);
    }
    return doc.dump(2);
}

Model strip_coordination(const Model& m) {
    Model out = m;
    out.coordination_processes.clear();
    return out;
}

// ---------------------------------------------------------------------------
// type lattice

TypeLattice::TypeLattice(const TypeStructure& s) {
    for (const auto& t : s.process_types) {
        if (index_.count(t.name)) continue;
        index_[t.name] = names_.size();
        names_.push_back(t.name);
    }
    std::size_t n = names_.size();
    std::vector<std::vector<std::size_t>> up(n);  // lower -> higher edges
    for (const auto& r : s.relation_types) {
        auto a = index_.find(r.source);
        auto b = index_.find(r.target);
        if (a == index_.end() || b == index_.end()) continue;
        up[a->second].push_back(b->second);
    }
    lower_.assign(n, std::vector<bool>(n, false));
    for (std::size_t low = 0; low < n; ++low) {
        std::vector<std::size_t> stack(up[low].begin(), up[low].end());
        std::vector<bool> seen(n, false);
        while (!stack.empty()) {
            std::size_t h = stack.back();
            stack.pop_back();
            if (seen[h]) continue;
            seen[h] = true;
            lower_[h][low] = true;
            for (std::size_t nx : up[h]) stack.push_back(nx);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (lower_[i][i]) acyclic_ = false;
}

bool TypeLattice::lower_of(const std::string& low, const std::string& high) const {
    auto a = index_.find(low);
    auto b = index_.find(high);
    if (a == index_.end() || b == index_.end()) return false;
    return lower_[b->second][a->second];
}

std::set<std::string> TypeLattice::lower_set(const std::string& t) const {
    std::set<std::string> out;
    auto it = index_.find(t);
    if (it == index_.end()) return out;
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (lower_[it->second][i]) out.insert(names_[i]);
    return out;
}

std::set<std::string> TypeLattice::common_ancestors(const std::string& a, const std::string& b) const {
    std::set<std::string> out;
    for (const auto& h : names_)
        if (lower_of(a, h) && lower_of(b, h)) out.insert(h);
    return out;
}

std::set<RelKind> infer_semantic_relationship(const StepDef& src, const StepDef& tar, const TypeStructure& s) {
    TypeLattice lat(s);
    if (!lat.known(src.type) || !lat.known(tar.type)) return {};
    if (src.type == tar.type) return {RelKind::Self, RelKind::SelfTransverse};
    if (lat.lower_of(tar.type, src.type)) return {RelKind::TopDown};
    if (lat.lower_of(src.type, tar.type)) return {RelKind::BottomUp};
    if (!lat.common_ancestors(src.type, tar.type).empty()) return {RelKind::Transverse};
    return {};
}

std::set<std::string> compute_scope(const CoordProcessDef& c, const TypeStructure& s) {
    TypeLattice lat(s);
    if (!lat.known(c.coordinating_type)) throw std::invalid_argument("unknown coordinating type '" + c.coordinating_type + "'");
    auto out = lat.lower_set(c.coordinating_type);
    out.insert(c.coordinating_type);
    return out;
}

// ---------------------------------------------------------------------------
// validation

namespace {

void validate_view(const ProcessTypeDef& t, ValidationReport& r) {
    const auto& v = t.view;
    std::string where = "type '" + t.name + "'";
    if (v.states.empty()) {
        r.push_back({"view.empty", where, "state view has no states"});
        return;
    }
    std::set<std::string> uniq(v.states.begin(), v.states.end());
    if (uniq.size() != v.states.size()) r.push_back({"view.duplicate_state", where, "state names are not unique"});
    if (v.start.empty()) r.push_back({"view.start", where, "no start state"});
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& [a, b] : v.transitions) succ[a].push_back(b);
    // reachability and cycles
    if (!v.start.empty()) {
        std::set<std::string> seen;
        std::vector<std::string> stack{v.start};
        while (!stack.empty()) {
            auto s = stack.back();
            stack.pop_back();
            if (!seen.insert(s).second) continue;
            for (const auto& n : succ[s]) stack.push_back(n);
        }
        for (const auto& s : v.states)
            if (!seen.count(s)) r.push_back({"view.unreachable", where, "state '" + s + "' is not reachable from the start state"});
    }
    std::map<std::string, int> color;
    bool cyclic = false;
    std::function<void(const std::string&)> dfs = [&](const std::string& s) {
        color[s] = 1;
        for (const auto& n : succ[s]) {
            if (color[n] == 1) cyclic = true;
            else if (color[n] == 0) dfs(n);
        }
        color[s] = 2;
    };
    for (const auto& s : v.states)
        if (color[s] == 0) dfs(s);
    if (cyclic) r.push_back({"view.cycle", where, "forward transitions form a loop"});
    // backwards transitions must point to a transition-predecessor of their source
    for (const auto& [a, b] : v.backwards) {
        std::set<std::string> seen;
        std::vector<std::string> stack{b};
        bool ok = false;
        while (!stack.empty() && !ok) {
            auto s = stack.back();
            stack.pop_back();
            if (!seen.insert(s).second) continue;
            for (const auto& n : succ[s]) {
                if (n == a) ok = true;
                stack.push_back(n);
            }
        }
        if (!ok) r.push_back({"view.backwards", where, "backwards transition " + a + " -> " + b + " does not lead to a predecessor"});
    }
    for (const auto& s : v.activity_free)
        if (succ[s].size() != 1) r.push_back({"view.activity_free", where, "activity-free state '" + s + "' needs exactly one outgoing transition"});
    for (const auto& s : v.end_states)
        if (!succ[s].empty()) r.push_back({"view.end", where, "end state '" + s + "' has outgoing transitions"});
}

void validate_cp(const CoordProcessDef& c, const TypeStructure& s, const TypeLattice& lat, ValidationReport& r) {
    std::string where = "coordination process '" + c.name + "'";
    if (!lat.known(c.coordinating_type)) {
        r.push_back({"cp.coordinating_type", where, "unknown coordinating type"});
        return;
    }
    auto scope = compute_scope(c, s);
    std::map<std::string, const StepDef*> steps;
    std::set<std::pair<std::string, std::string>> pairs_seen;
    for (const auto& st : c.steps) {
        if (!pairs_seen.insert({st.type, st.state}).second)
            r.push_back({"cp.step_unique", where, "step '" + st.id + "' is declared twice"});
        steps[st.id] = &st;
        if (!scope.count(st.type)) r.push_back({"cp.scope", where, "step '" + st.id + "' is outside the scope of " + c.coordinating_type});
    }
    std::map<std::string, const PortDef*> ports;
    for (const auto& p : c.ports) ports[p.id] = &p;

    // start step
    std::vector<std::string> starts;
    for (const auto& st : c.steps)
        if (st.ports.empty()) starts.push_back(st.id);
    if (starts.size() != 1)
        r.push_back({"cp.start", where, fmt::format("expected exactly one start step without ports, found {}", starts.size())});
    for (const auto& p : c.ports)
        if (p.incoming.empty()) r.push_back({"cp.port_incoming", where, "port '" + p.id + "' has no incoming transition"});

    // graph over steps
    std::map<std::string, std::vector<std::string>> succ;
    std::map<std::string, std::vector<std::string>> undirected;
    for (const auto& t : c.transitions) {
        auto pit = ports.find(t.target_port);
        if (pit == ports.end()) continue;
        succ[t.source_step].push_back(pit->second->step);
        undirected[t.source_step].push_back(pit->second->step);
        undirected[pit->second->step].push_back(t.source_step);
    }
    std::map<std::string, int> color;
    bool cyclic = false;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
        color[n] = 1;
        for (const auto& x : succ[n]) {
            if (color[x] == 1) cyclic = true;
            else if (color[x] == 0) dfs(x);
        }
        color[n] = 2;
    };
    for (const auto& st : c.steps)
        if (color[st.id] == 0) dfs(st.id);
    if (cyclic) r.push_back({"cp.cycle", where, "coordination process graph is not acyclic"});
    if (!c.steps.empty()) {
        std::set<std::string> seen;
        std::vector<std::string> stack{c.steps.front().id};
        while (!stack.empty()) {
            auto n = stack.back();
            stack.pop_back();
            if (!seen.insert(n).second) continue;
            for (const auto& x : undirected[n]) stack.push_back(x);
        }
        if (seen.size() != c.steps.size()) r.push_back({"cp.connected", where, "coordination process graph is not connected"});
    }

    for (const auto& t : c.transitions) {
        std::string tw = where + " transition '" + t.id + "'";
        auto sit = steps.find(t.source_step);
        auto pit = ports.find(t.target_port);
        if (sit == steps.end() || pit == ports.end()) continue;
        const StepDef& src = *sit->second;
        const StepDef& tar = *steps[pit->second->step];
        const auto kind = t.rel.kind;
        bool needs_lambda = kind == RelKind::BottomUp || kind == RelKind::Transverse || kind == RelKind::SelfTransverse;
        bool needs_ca = kind == RelKind::Transverse || kind == RelKind::SelfTransverse;
        if (needs_lambda != t.rel.expression.has_value())
            r.push_back({"rel.fields", tw, needs_lambda ? "expression missing" : "expression not allowed for this kind"});
        if (needs_ca != t.rel.common_ancestor.has_value())
            r.push_back({"rel.fields", tw, needs_ca ? "common ancestor missing" : "common ancestor not allowed for this kind"});
        if (t.rel.valid_states && kind != RelKind::TopDown)
            r.push_back({"rel.fields", tw, "valid states only apply to top-down relationships"});
        auto cand = infer_semantic_relationship(src, tar, s);
        if (!cand.count(kind))
            r.push_back({"rel.direction", tw, fmt::format("kind {} does not match the relation direction between {} and {}", to_string(kind), src.type, tar.type)});
        if (needs_ca && t.rel.common_ancestor) {
            const auto& ca = *t.rel.common_ancestor;
            if (!lat.lower_of(src.type, ca) || !lat.lower_of(tar.type, ca))
                r.push_back({"rel.common_ancestor", tw, "'" + ca + "' is not a higher-level type of both ends"});
        }
        if (t.rel.expression) {
            try {
                auto e = expr::Expr::parse(*t.rel.expression);
                const ProcessTypeDef* st = nullptr;
                const ProcessTypeDef* tt = nullptr;
                for (const auto& p : s.process_types) {
                    if (p.name == src.type) st = &p;
                    if (p.name == tar.type) tt = &p;
                }
                for (const auto* n : e.counting_nodes()) {
                    if (n->state.empty()) continue;
                    const auto* owner = expr::is_target_fn(n->fn) ? tt : st;
                    if (owner && std::find(owner->view.states.begin(), owner->view.states.end(), n->state) == owner->view.states.end())
                        r.push_back({"rel.expression", tw, "counting function names unknown state '" + n->state + "'"});
                }
            } catch (const expr::ParseError& e) {
                r.push_back({"rel.expression", tw, fmt::format("{} at column {}", e.what(), e.column)});
            }
        }
    }
}

}  // namespace

ValidationReport validate_model(const Model& m) {
    ValidationReport r;
    std::set<std::string> names;
    for (const auto& t : m.structure.process_types) {
        if (!names.insert(t.name).second) r.push_back({"type.duplicate", "type '" + t.name + "'", "process type name is not unique"});
        validate_view(t, r);
    }
    for (const auto& rel : m.structure.relation_types) {
        std::string where = "relation type '" + rel.name + "'";
        if (rel.m_lower > rel.m_upper || rel.n_lower > rel.n_upper) r.push_back({"relation.bounds", where, "lower bound exceeds upper bound"});
        if (rel.source == rel.target) r.push_back({"relation.self", where, "relation type connects a type to itself"});
    }
    TypeLattice lat(m.structure);
    if (!lat.acyclic()) r.push_back({"structure.cycle", "structure '" + m.structure.name + "'", "relation types form a cycle"});
    for (const auto& c : m.coordination_processes) validate_cp(c, m.structure, lat, r);
    return r;
}

// ---------------------------------------------------------------------------
// compiled form

std::optional<StateIdx> CompiledType::state(const std::string& s) const {
    auto it = state_index.find(s);
    if (it == state_index.end()) return std::nullopt;
    return it->second;
}

bool CompiledType::is_forward(StateIdx from, StateIdx to) const {
    const auto& s = succ[from.idx()];
    return std::find(s.begin(), s.end(), to) != s.end();
}

bool CompiledType::is_backward(StateIdx from, StateIdx to) const {
    const auto& s = back_targets[from.idx()];
    return std::find(s.begin(), s.end(), to) != s.end();
}

std::optional<StepTypeIdx> CompiledCp::step_for(TypeIdx t, StateIdx s) const {
    for (StepTypeIdx st : steps_of_type[t.idx()])
        if (steps[st.idx()].state == s) return st;
    return std::nullopt;
}

std::optional<TypeIdx> CompiledModel::type_index(const std::string& name) const {
    auto it = type_index_.find(name);
    if (it == type_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelTypeIdx> CompiledModel::relation_type_index(const std::string& name) const {
    for (std::size_t i = 0; i < rels_.size(); ++i)
        if (rels_[i].name == name) return RelTypeIdx(i);
    return std::nullopt;
}

std::vector<RelTypeIdx> CompiledModel::relation_types_between(TypeIdx a, TypeIdx b) const {
    std::vector<RelTypeIdx> out;
    for (std::size_t i = 0; i < rels_.size(); ++i) {
        const auto& r = rels_[i];
        if ((r.source == a && r.target == b) || (r.source == b && r.target == a)) out.emplace_back(i);
    }
    return out;
}

std::shared_ptr<const CompiledModel> CompiledModel::compile(const Model& m) {
    auto report = validate_model(m);
    if (!report.empty()) {
        std::string msg = "model is not executable:";
        for (const auto& v : report) msg += "\n  " + v.rule + " (" + v.where + "): " + v.message;
        throw std::invalid_argument(msg);
    }
    std::shared_ptr<CompiledModel> cm(new CompiledModel());
    cm->source_ = m;
    const auto& s = m.structure;
    for (std::size_t i = 0; i < s.process_types.size(); ++i) {
        const auto& t = s.process_types[i];
        CompiledType ct;
        ct.name = t.name;
        ct.states = t.view.states;
        ct.attributes = t.attributes;
        for (std::size_t k = 0; k < ct.states.size(); ++k) ct.state_index[ct.states[k]] = StateIdx(k);
        std::size_t n = ct.states.size();
        ct.start = ct.state_index.at(t.view.start);
        ct.is_end.assign(n, false);
        ct.activity_free.assign(n, false);
        ct.succ.resize(n);
        ct.pred.resize(n);
        ct.back_targets.resize(n);
        for (const auto& e : t.view.end_states) ct.is_end[ct.state_index.at(e).idx()] = true;
        for (const auto& e : t.view.activity_free) ct.activity_free[ct.state_index.at(e).idx()] = true;
        for (const auto& [a, b] : t.view.transitions) {
            auto ai = ct.state_index.at(a);
            auto bi = ct.state_index.at(b);
            ct.succ[ai.idx()].push_back(bi);
            ct.pred[bi.idx()].push_back(ai);
        }
        for (const auto& [a, b] : t.view.backwards) ct.back_targets[ct.state_index.at(a).idx()].push_back(ct.state_index.at(b));
        ct.reach.assign(n, std::vector<bool>(n, false));
        for (std::size_t a = 0; a < n; ++a) {
            std::vector<StateIdx> stack(ct.succ[a].begin(), ct.succ[a].end());
            while (!stack.empty()) {
                auto x = stack.back();
                stack.pop_back();
                if (ct.reach[a][x.idx()]) continue;
                ct.reach[a][x.idx()] = true;
                for (auto y : ct.succ[x.idx()]) stack.push_back(y);
            }
        }
        cm->type_index_[t.name] = TypeIdx(i);
        cm->types_.push_back(std::move(ct));
    }
    std::size_t nt = cm->types_.size();
    for (const auto& r : s.relation_types)
        cm->rels_.push_back({r.name, cm->type_index_.at(r.source), cm->type_index_.at(r.target), r.m_lower, r.m_upper, r.n_lower, r.n_upper});
    TypeLattice lat(s);
    cm->lower_.assign(nt, std::vector<bool>(nt, false));
    for (std::size_t h = 0; h < nt; ++h)
        for (std::size_t l = 0; l < nt; ++l) cm->lower_[h][l] = lat.lower_of(cm->types_[l].name, cm->types_[h].name);
    cm->cps_by_coord_.resize(nt);

    for (std::size_t ci = 0; ci < m.coordination_processes.size(); ++ci) {
        const auto& c = m.coordination_processes[ci];
        CompiledCp cp;
        cp.index = CpTypeIdx(ci);
        cp.name = c.name;
        cp.coordinating_type = cm->type_index_.at(c.coordinating_type);
        cp.in_scope.assign(nt, false);
        cp.in_scope[cp.coordinating_type.idx()] = true;
        for (std::size_t l = 0; l < nt; ++l)
            if (cm->lower_[cp.coordinating_type.idx()][l]) cp.in_scope[l] = true;
        cp.steps_of_type.resize(nt);
        cp.anchored_at_type.resize(nt);
        std::map<std::string, StepTypeIdx> step_ix;
        std::map<std::string, PortTypeIdx> port_ix;
        std::map<std::string, TransTypeIdx> trans_ix;
        for (std::size_t k = 0; k < c.steps.size(); ++k) step_ix[c.steps[k].id] = StepTypeIdx(k);
        for (std::size_t k = 0; k < c.ports.size(); ++k) port_ix[c.ports[k].id] = PortTypeIdx(k);
        for (std::size_t k = 0; k < c.transitions.size(); ++k) trans_ix[c.transitions[k].id] = TransTypeIdx(k);
        for (std::size_t k = 0; k < c.steps.size(); ++k) {
            const auto& sd = c.steps[k];
            CompiledStep st;
            st.id = sd.id;
            st.type = cm->type_index_.at(sd.type);
            st.state = cm->types_[st.type.idx()].state_index.at(sd.state);
            for (const auto& p : sd.ports) st.ports.push_back(port_ix.at(p));
            st.is_start = sd.ports.empty();
            if (st.is_start) cp.start = StepTypeIdx(k);
            cp.steps_of_type[st.type.idx()].emplace_back(k);
            cp.steps.push_back(std::move(st));
        }
        for (const auto& pd : c.ports) {
            CompiledPort p;
            p.id = pd.id;
            p.step = step_ix.at(pd.step);
            for (const auto& t : pd.incoming) p.incoming.push_back(trans_ix.at(t));
            cp.ports.push_back(std::move(p));
        }
        for (std::size_t k = 0; k < c.transitions.size(); ++k) {
            const auto& td = c.transitions[k];
            CompiledTransition t;
            t.id = td.id;
            t.source = step_ix.at(td.source_step);
            t.target = port_ix.at(td.target_port);
            t.kind = td.rel.kind;
            const auto& src_type = cm->types_[cp.steps[t.source.idx()].type.idx()];
            const auto& tar_type = cm->types_[cp.steps[cp.ports[t.target.idx()].step.idx()].type.idx()];
            if (td.rel.expression) {
                auto e = expr::Expr::parse(*td.rel.expression);
                for (auto* n : e.counting_nodes()) {
                    if (n->state.empty()) continue;
                    const auto& owner = expr::is_target_fn(n->fn) ? tar_type : src_type;
                    n->state_index = static_cast<int>(owner.state_index.at(n->state).idx());
                }
                t.lambda = std::move(e);
            }
            if (td.rel.valid_states)
                for (const auto& v : *td.rel.valid_states) t.valid_states.push_back(src_type.state_index.at(v));
            if (td.rel.common_ancestor) {
                t.common_ancestor = cm->type_index_.at(*td.rel.common_ancestor);
                cp.anchored_at_type[t.common_ancestor.idx()].emplace_back(k);
            }
            cp.steps[t.source.idx()].out.emplace_back(k);
            cp.transitions.push_back(std::move(t));
        }
        for (auto& st : cp.steps) st.is_end = st.out.empty();
        // topological order of step types
        std::vector<int> indeg(cp.steps.size(), 0);
        for (const auto& t : cp.transitions) ++indeg[cp.ports[t.target.idx()].step.idx()];
        std::vector<std::size_t> ready;
        for (std::size_t k = 0; k < indeg.size(); ++k)
            if (indeg[k] == 0) ready.push_back(k);
        while (!ready.empty()) {
            std::size_t k = ready.front();
            ready.erase(ready.begin());
            cp.topo.emplace_back(k);
            for (auto ti : cp.steps[k].out) {
                std::size_t tgt = cp.ports[cp.transitions[ti.idx()].target.idx()].step.idx();
                if (--indeg[tgt] == 0) ready.push_back(tgt);
            }
        }
        cm->cps_by_coord_[cp.coordinating_type.idx()].push_back(cp.index);
        cm->cps_.push_back(std::move(cp));
    }
    return cm;
}

}  // namespace coordsem::model
