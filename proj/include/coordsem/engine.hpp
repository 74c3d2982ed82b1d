#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coordsem/coordgraph.hpp"
#include "coordsem/lifecycle.hpp"
#include "coordsem/model.hpp"
#include "coordsem/rules.hpp"
#include "coordsem/runtime.hpp"
#include "coordsem/structure.hpp"

namespace coordsem::engine {

struct Config {
    runtime::Config runtime;
    rules::Options rules;
};

enum class CommitResult { Activated, Pending };
[[nodiscard]] std::string_view to_string(CommitResult r);

// Full state-view report a process unit sends after every change.
struct Report {
    std::vector<StateMarking> markings;
    std::uint64_t version = 0;
    std::uint64_t seq = 0;
};

// One state marking change of a process instance's view.
struct StateTraceRecord {
    std::uint64_t seq;
    InstanceId instance;
    StateIdx state;
    StateMarking from;
    StateMarking to;
    std::string cause;  // commit, promote, backwards, activity-free
};

class StructureUnit;
class ProcessUnit;
class CpUnit;
struct Ctx;

// Single client of the unit system. Every call runs to quiescence before it
// returns, so reads between calls observe a global stable point.
class Engine {
public:
    Engine(model::ModelPtr m, Config c = {});
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    InstanceId instantiate(TypeIdx t);
    InstanceId instantiate(const std::string& type);
    // Throws StructureError; Kind::Veto when coordination forbids the link.
    RelationId link(InstanceId a, InstanceId b);
    RelationId link_arrangement(InstanceId root, InstanceId target);
    void unlink(RelationId r);
    void remove(InstanceId w);
    void set_attribute(InstanceId w, const std::string& name, const std::string& value);
    // Throws LifecycleError.
    CommitResult commit(InstanceId w, StateIdx target);
    CommitResult commit(InstanceId w, const std::string& state);
    void backwards(InstanceId w, StateIdx target);
    void backwards(InstanceId w, const std::string& state);

    [[nodiscard]] const model::CompiledModel& model() const { return *model_; }
    [[nodiscard]] model::ModelPtr model_ptr() const { return model_; }
    [[nodiscard]] const structure::Structure& structure() const;
    [[nodiscard]] const lifecycle::StateView& view(InstanceId w) const;
    [[nodiscard]] bool exists(InstanceId w) const;
    [[nodiscard]] InstanceId find(const std::string& label) const;
    // Live coordination process instances in creation order.
    [[nodiscard]] std::vector<const rules::RuleEngine*> coordination() const;
    [[nodiscard]] std::vector<rules::TraceRecord> trace() const;
    [[nodiscard]] std::vector<StateTraceRecord> state_trace() const;
    [[nodiscard]] std::string format(const StateTraceRecord& r) const;
    void clear_trace();
    void set_trace(bool on);
    [[nodiscard]] std::vector<std::string> self_consistency_violations() const;
    [[nodiscard]] std::string dump() const;
    [[nodiscard]] runtime::Runtime& runtime() { return rt_; }
    [[nodiscard]] std::size_t vetoes() const { return vetoes_; }

private:
    template <class R, class F>
    R call(UnitId to, const char* label, F f);

    model::ModelPtr model_;
    Config cfg_;
    // units hold raw pointers into each other; the runtime goes first on destruction
    std::unique_ptr<Ctx> ctx_;
    std::unique_ptr<StructureUnit> su_;
    runtime::Runtime rt_;
    std::size_t vetoes_ = 0;
};

}  // namespace coordsem::engine
