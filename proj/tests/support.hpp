#pragma once

// Test equipment: independent recomputation of everything the engine
// maintains incrementally. Nothing here reuses the engine's traversal code.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coordsem/engine.hpp"
#include "coordsem/model.hpp"
#include "coordsem/structure.hpp"

namespace testkit {

using namespace coordsem;

std::string source_dir();
model::ModelPtr load(const std::string& name);  // file under models/
model::ModelPtr load_stripped(const std::string& name);

// Depth-first walk over the relation list (no maintained sets).
std::set<InstanceId> lower_closure(const structure::Structure& s, InstanceId x);
std::set<InstanceId> higher_closure(const structure::Structure& s, InstanceId x);
// Maintained L/H against the walks, including y in L(x) <=> x in H(y).
std::vector<std::string> lh_mismatches(const structure::Structure& s);
std::vector<std::string> graph_mismatches(const structure::RelationGraph& g);

// Brute-force component evaluation: component set per anchor, membership by
// traversal, lambda over the true state views, Completed derived from the
// component definition. Returns human-readable differences.
std::vector<std::string> component_mismatches(const engine::Engine& e);

// Update markings, self-consistency, mirror views equal to the process views.
std::vector<std::string> soundness_violations(const engine::Engine& e);

// Every coordination entity's marking keyed by entity name, plus the state
// markings of every instance. Two engines with equal snapshots are marking-equivalent.
std::map<std::string, std::string> snapshot(const engine::Engine& e);

// Random valid mutation over the loaded model. Errors from vetoes, bounds or
// disabled transitions are expected and swallowed; returns a description.
struct RandomDriver {
    explicit RandomDriver(std::uint64_t seed, std::size_t max_per_type = 4) : rng(seed), cap(max_per_type) {}
    std::string step(engine::Engine& e);
    std::string structural(engine::Engine& e);  // link, unlink, delete, new only
    std::mt19937_64 rng;
    std::size_t cap;

private:
    std::string do_new(engine::Engine& e);
    std::string do_link(engine::Engine& e);
    std::string do_unlink(engine::Engine& e);
    std::string do_delete(engine::Engine& e);
    std::string do_commit(engine::Engine& e);
    std::string do_back(engine::Engine& e);
    template <class C>
    auto pick(const C& c) {
        auto it = c.begin();
        std::advance(it, std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(rng));
        return *it;
    }
};

// All steps and marking transitions named in a trace, Update excluded, in order.
// key "kind name", value e.g. {"Inactive","Active","Completed"}.
std::map<std::string, std::vector<std::string>> marking_sequences(const std::vector<rules::TraceRecord>& t);

}  // namespace testkit
