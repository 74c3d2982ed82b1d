#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coordsem/engine.hpp"
#include "coordsem/model.hpp"

namespace coordsem::harness {

enum class Op { New, Link, Arrange, Unlink, Delete, Set, Commit, Back };
[[nodiscard]] std::string_view to_string(Op o);

// Instances are referred to by symbolic names bound by a prior New.
struct Action {
    Op op = Op::New;
    std::string type;      // New
    std::string as;        // New
    std::string a;         // instance (all but New)
    std::string b;         // Link / Arrange / Unlink target
    std::string state;     // Commit / Back
    std::string attribute; // Set
    std::string value;     // Set
};

struct Sequence {
    std::string name;
    std::vector<Action> actions;
};

struct SequenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[nodiscard]] Sequence parse_sequence(const std::string& text);
[[nodiscard]] Sequence load_sequence(const std::string& path);
[[nodiscard]] std::string serialize_sequence(const Sequence& s);
[[nodiscard]] std::string describe(const Action& a);

enum class Outcome { Ok, Pending, Vetoed, Error };
[[nodiscard]] std::string_view to_string(Outcome o);

struct ActionResult {
    std::size_t index = 0;
    Op op = Op::New;
    std::string text;
    Outcome outcome = Outcome::Ok;
    std::string detail;
    double ms = 0;
};

struct InstanceState {
    std::string label;
    std::string type;
    std::string active;
    std::optional<std::string> pending;
};

struct RunReport {
    std::string sequence;
    std::vector<ActionResult> actions;
    std::map<std::string, InstanceState> final_states;  // by symbolic name
    double total_ms = 0;
    bool aborted = false;
    std::size_t vetoes = 0;
    std::size_t pendings = 0;
    std::size_t errors = 0;

    [[nodiscard]] std::string json() const;
    [[nodiscard]] std::string table() const;
};

struct RunOptions {
    engine::Config engine;
    bool strict = false;
    std::optional<std::size_t> stop_after;  // run only this many actions
};

// Executes actions strictly one after another on a fresh engine; every
// action's timer covers the action and the quiescence that follows it.
RunReport run_sequence(model::ModelPtr m, const Sequence& s, const RunOptions& o = {});
// Same on a caller-owned engine; names maps symbolic names to instances.
RunReport run_on(engine::Engine& e, const Sequence& s, const RunOptions& o, std::map<std::string, InstanceId>& names);

struct Stats {
    double max = 0, avg = 0, median = 0, min = 0;
    std::size_t samples = 0;
};
[[nodiscard]] Stats stats_of(std::vector<double> v);

struct MeasureConfig {
    std::size_t min_runs = 6;
    std::size_t max_runs = 30;
    double confidence = 0.95;
    double relative_width = 0.10;
    bool compare = true;  // also measure the model with coordination stripped
    engine::Config engine;
};

struct Series {
    std::vector<double> totals;
    std::vector<double> action_ms;  // every action of every run
    std::map<std::string, std::vector<double>> by_op;
    double mean = 0, ci_low = 0, ci_high = 0;
    bool converged = false;
    [[nodiscard]] std::size_t runs() const { return totals.size(); }
};

struct MeasureReport {
    std::string sequence;
    double confidence = 0.95;
    Series with;
    std::optional<Series> without;
    std::size_t failures = 0;  // runs with vetoes or errors
    [[nodiscard]] double overhead() const;
    // confidence that the true median lies between the fastest and slowest run
    [[nodiscard]] static double median_confidence(std::size_t runs);
    [[nodiscard]] std::string json() const;
    [[nodiscard]] std::string table() const;
};

MeasureReport measure(model::ModelPtr m, const Sequence& s, const MeasureConfig& c = {});

// Interactive session; returns when input ends or on `quit`.
void repl(model::ModelPtr m, std::istream& in, std::ostream& out, const engine::Config& c = {});

// Trace output directory from COORDSEM_TRACE_DIR, if set.
[[nodiscard]] std::optional<std::string> trace_dir();

}  // namespace coordsem::harness
