#include "coordsem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <json.hpp>

namespace coordsem::harness {

using json = nlohmann::ordered_json;
using structure::StructureError;

std::string_view to_string(Op o) {
    switch (o) {
        case Op::New: return "new";
        case Op::Link: return "link";
        case Op::Arrange: return "arrange";
        case Op::Unlink: return "unlink";
        case Op::Delete: return "delete";
        case Op::Set: return "set";
        case Op::Commit: return "commit";
        case Op::Back: return "back";
    }
    return "?";
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Ok: return "ok";
        case Outcome::Pending: return "pending";
        case Outcome::Vetoed: return "vetoed";
        case Outcome::Error: return "error";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// sequences

Sequence parse_sequence(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SequenceError(e.what());
    }
    Sequence s;
    s.name = doc.value("name", std::string{});
    std::set<std::string> bound;
    std::size_t i = 0;
    auto need = [&](const std::string& n) {
        if (!bound.count(n)) throw SequenceError(fmt::format("action {}: '{}' is not bound by an earlier new", i, n));
    };
    try {
        for (const auto& a : doc.at("actions")) {
            Action x;
            auto pair = [&](const char* k) {
                x.a = a[k].at(0).get<std::string>();
                x.b = a[k].at(1).get<std::string>();
                need(x.a);
                need(x.b);
            };
            if (a.contains("new")) {
                x.op = Op::New;
                x.type = a["new"].get<std::string>();
                x.as = a.at("as").get<std::string>();
                bound.insert(x.as);
            } else if (a.contains("link")) {
                x.op = Op::Link;
                pair("link");
            } else if (a.contains("arrange")) {
                x.op = Op::Arrange;
                pair("arrange");
            } else if (a.contains("unlink")) {
                x.op = Op::Unlink;
                pair("unlink");
            } else if (a.contains("delete")) {
                x.op = Op::Delete;
                x.a = a["delete"].get<std::string>();
                need(x.a);
            } else if (a.contains("set")) {
                x.op = Op::Set;
                x.a = a["set"].get<std::string>();
                x.attribute = a.at("attribute").get<std::string>();
                x.value = a.at("value").get<std::string>();
                need(x.a);
            } else if (a.contains("commit") || a.contains("back")) {
                x.op = a.contains("commit") ? Op::Commit : Op::Back;
                x.a = a[a.contains("commit") ? "commit" : "back"].get<std::string>();
                x.state = a.at("state").get<std::string>();
                need(x.a);
            } else {
                throw SequenceError(fmt::format("action {}: unknown operation", i));
            }
            s.actions.push_back(std::move(x));
            ++i;
        }
    } catch (const json::exception& e) {
        throw SequenceError(fmt::format("action {}: {}", i, e.what()));
    }
    return s;
}

Sequence load_sequence(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SequenceError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_sequence(ss.str());
}

std::string serialize_sequence(const Sequence& s) {
    json doc;
    doc["name"] = s.name;
    doc["actions"] = json::array();
    for (const auto& a : s.actions) {
        json x;
        switch (a.op) {
            case Op::New: x["new"] = a.type, x["as"] = a.as; break;
            case Op::Link:
            case Op::Arrange:
            case Op::Unlink: x[std::string(to_string(a.op))] = {a.a, a.b}; break;
            case Op::Delete: x["delete"] = a.a; break;
            case Op::Set: x["set"] = a.a, x["attribute"] = a.attribute, x["value"] = a.value; break;
            case Op::Commit:
            case Op::Back: x[std::string(to_string(a.op))] = a.a, x["state"] = a.state; break;
        }
        doc["actions"].push_back(x);
    }
    return doc.dump(1);
}

std::string describe(const Action& a) {
    switch (a.op) {
        case Op::New: return fmt::format("new {} as {}", a.type, a.as);
        case Op::Link:
        case Op::Arrange:
        case Op::Unlink: return fmt::format("{} {} {}", to_string(a.op), a.a, a.b);
        case Op::Delete: return "delete " + a.a;
        case Op::Set: return fmt::format("set {} {}={}", a.a, a.attribute, a.value);
        case Op::Commit:
        case Op::Back: return fmt::format("{} {} -> {}", to_string(a.op), a.a, a.state);
    }
    return "?";
}

// ---------------------------------------------------------------------------
// running

namespace {

InstanceId bound(const std::map<std::string, InstanceId>& names, const std::string& n) {
    auto it = names.find(n);
    if (it == names.end()) throw SequenceError("unbound instance name '" + n + "'");
    return it->second;
}

RelationId relation_between(const structure::Structure& s, InstanceId a, InstanceId b) {
    for (const auto& [id, r] : s.relations())
        if ((r.source == a && r.target == b) || (r.source == b && r.target == a)) return id;
    throw StructureError(StructureError::Kind::UnknownRelation, "no relation between the instances");
}

// Names the components a pending state still waits for.
std::string pending_reason(const engine::Engine& e, InstanceId w, const std::string& state) {
    const auto& m = e.model();
    TypeIdx t = e.structure().instance(w).type;
    auto s = m.type(t).state(state);
    if (!s) return {};
    std::vector<std::string> waiting;
    for (const auto* re : e.coordination()) {
        const auto& g = re->graph();
        auto st = g.type().step_for(t, *s);
        if (!st) continue;
        auto sid = g.step_of(*st, w);
        if (!sid) continue;
        for (PortId p : g.step(*sid).ports)
            for (CompId c : g.port(p).in)
                if (g.comp(c).m != Marking::Completed) waiting.push_back(fmt::format("{} ({})", g.comp_name(c), coordsem::to_string(g.comp(c).m)));
    }
    if (waiting.empty()) return "waiting for coordination";
    return "waiting on " + fmt::format("{}", fmt::join(waiting, ", "));
}

}  // namespace

RunReport run_on(engine::Engine& e, const Sequence& s, const RunOptions& o, std::map<std::string, InstanceId>& names) {
    using clock = std::chrono::steady_clock;
    RunReport rep;
    rep.sequence = s.name;
    std::size_t n = o.stop_after ? std::min(*o.stop_after, s.actions.size()) : s.actions.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = s.actions[i];
        ActionResult r;
        r.index = i;
        r.op = a.op;
        r.text = describe(a);
        auto t0 = clock::now();
        try {
            switch (a.op) {
                case Op::New: names[a.as] = e.instantiate(a.type); break;
                case Op::Link: e.link(bound(names, a.a), bound(names, a.b)); break;
                case Op::Arrange: e.link_arrangement(bound(names, a.a), bound(names, a.b)); break;
                case Op::Unlink: e.unlink(relation_between(e.structure(), bound(names, a.a), bound(names, a.b))); break;
                case Op::Delete: e.remove(bound(names, a.a)); break;
                case Op::Set: e.set_attribute(bound(names, a.a), a.attribute, a.value); break;
                case Op::Commit:
                    if (e.commit(bound(names, a.a), a.state) == engine::CommitResult::Pending) r.outcome = Outcome::Pending;
                    break;
                case Op::Back: e.backwards(bound(names, a.a), a.state); break;
            }
        } catch (const StructureError& x) {
            r.outcome = x.kind == StructureError::Kind::Veto ? Outcome::Vetoed : Outcome::Error;
            r.detail = x.what();
        } catch (const std::exception& x) {
            r.outcome = Outcome::Error;
            r.detail = x.what();
        }
        r.ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        if (r.outcome == Outcome::Pending) r.detail = pending_reason(e, names.at(a.a), a.state);
        rep.total_ms += r.ms;
        rep.vetoes += r.outcome == Outcome::Vetoed;
        rep.pendings += r.outcome == Outcome::Pending;
        rep.errors += r.outcome == Outcome::Error;
        bool fatal = o.strict && (r.outcome == Outcome::Vetoed || r.outcome == Outcome::Error);
        rep.actions.push_back(std::move(r));
        if (fatal) {
            rep.aborted = true;
            break;
        }
    }
    for (const auto& [name, id] : names) {
        if (!e.exists(id)) continue;
        const auto& v = e.view(id);
        const auto& t = v.type();
        InstanceState st{e.structure().instance(id).label, t.name, t.states[v.active().idx()], std::nullopt};
        if (v.pending()) st.pending = t.states[v.pending()->idx()];
        rep.final_states[name] = st;
    }
    return rep;
}

RunReport run_sequence(model::ModelPtr m, const Sequence& s, const RunOptions& o) {
    engine::Config cfg = o.engine;
    auto dir = trace_dir();
    if (dir) cfg.rules.trace = true;
    engine::Engine e(m, cfg);
    std::map<std::string, InstanceId> names;
    auto rep = run_on(e, s, o, names);
    if (dir) {
        std::ofstream out(*dir + "/" + (s.name.empty() ? std::string("sequence") : s.name) + ".trace");
        for (const auto& r : e.trace()) out << rules::format(r) << "\n";
        std::ofstream states(*dir + "/" + (s.name.empty() ? std::string("sequence") : s.name) + ".states");
        for (const auto& r : e.state_trace()) states << e.format(r) << "\n";
    }
    return rep;
}

std::string RunReport::json() const {
    harness::json doc;
    doc["sequence"] = sequence;
    doc["total_ms"] = total_ms;
    doc["aborted"] = aborted;
    doc["vetoes"] = vetoes;
    doc["pendings"] = pendings;
    doc["errors"] = errors;
    doc["actions"] = harness::json::array();
    for (const auto& a : actions) {
        harness::json x{{"index", a.index}, {"action", a.text}, {"outcome", std::string(to_string(a.outcome))}, {"ms", a.ms}};
        if (!a.detail.empty()) x["detail"] = a.detail;
        doc["actions"].push_back(x);
    }
    doc["final_states"] = harness::json::object();
    for (const auto& [n, s] : final_states) {
        harness::json x{{"label", s.label}, {"type", s.type}, {"active", s.active}};
        if (s.pending) x["pending"] = *s.pending;
        doc["final_states"][n] = x;
    }
    return doc.dump(2);
}

std::string RunReport::table() const {
    std::string out = fmt::format("{:>4}  {:<48} {:<8} {:>9}\n", "#", "action", "outcome", "ms");
    for (const auto& a : actions) {
        out += fmt::format("{:>4}  {:<48} {:<8} {:>9.3f}\n", a.index, a.text, to_string(a.outcome), a.ms);
        if (!a.detail.empty() && a.outcome != Outcome::Ok) out += "      " + a.detail + "\n";
    }
    out += fmt::format("total {:.3f} ms, {} vetoed, {} pending, {} errors{}\n", total_ms, vetoes, pendings, errors, aborted ? ", aborted" : "");
    out += "final states:\n";
    for (const auto& [n, s] : final_states)
        out += fmt::format("  {:<12} {:<20} {}{}\n", n, s.label, s.active, s.pending ? " (pending " + *s.pending + ")" : "");
    return out;
}

// ---------------------------------------------------------------------------
// measurement

Stats stats_of(std::vector<double> v) {
    Stats s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.samples = v.size();
    s.min = v.front();
    s.max = v.back();
    s.avg = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::size_t h = v.size() / 2;
    s.median = v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2;
    return s;
}

namespace {

void interval(Series& s, double confidence) {
    double n = static_cast<double>(s.totals.size());
    s.mean = std::accumulate(s.totals.begin(), s.totals.end(), 0.0) / n;
    if (s.totals.size() < 2) {
        s.ci_low = s.ci_high = s.mean;
        return;
    }
    double var = 0;
    for (double x : s.totals) var += (x - s.mean) * (x - s.mean);
    var /= n - 1;
    boost::math::students_t dist(n - 1);
    double t = boost::math::quantile(boost::math::complement(dist, (1 - confidence) / 2));
    double half = t * std::sqrt(var / n);
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
}

Series run_series(model::ModelPtr m, const Sequence& seq, const MeasureConfig& c, std::size_t& failures) {
    Series s;
    RunOptions o;
    o.engine = c.engine;
    o.engine.rules.trace = false;
    while (s.runs() < c.max_runs) {
        auto rep = run_sequence(m, seq, o);
        failures += rep.errors > 0;
        s.totals.push_back(rep.total_ms);
        for (const auto& a : rep.actions) {
            s.action_ms.push_back(a.ms);
            s.by_op[std::string(to_string(a.op))].push_back(a.ms);
        }
        if (s.runs() < c.min_runs) continue;
        interval(s, c.confidence);
        if (s.ci_high - s.ci_low < c.relative_width * s.mean) {
            s.converged = true;
            break;
        }
    }
    interval(s, c.confidence);
    return s;
}

harness::json series_json(const Series& s) {
    auto st = stats_of(s.action_ms);
    harness::json x{{"runs", s.runs()},
                    {"converged", s.converged},
                    {"mean_total_ms", s.mean},
                    {"ci_low_ms", s.ci_low},
                    {"ci_high_ms", s.ci_high},
                    {"action_ms", {{"max", st.max}, {"avg", st.avg}, {"median", st.median}, {"min", st.min}}}};
    for (const auto& [op, v] : s.by_op) {
        auto o = stats_of(v);
        x["by_operation"][op] = {{"max", o.max}, {"avg", o.avg}, {"median", o.median}, {"min", o.min}, {"count", o.samples}};
    }
    return x;
}

std::string series_table(const char* title, const Series& s) {
    auto st = stats_of(s.action_ms);
    std::string out = fmt::format("{}: {} runs{}, total {:.2f} ms [{:.2f}, {:.2f}]\n", title, s.runs(), s.converged ? "" : " (not converged)", s.mean, s.ci_low,
                                  s.ci_high);
    out += fmt::format("  {:<10} {:>9} {:>9} {:>9} {:>9}\n", "action", "max", "avg", "median", "min");
    out += fmt::format("  {:<10} {:>9.3f} {:>9.3f} {:>9.3f} {:>9.3f}\n", "all", st.max, st.avg, st.median, st.min);
    for (const auto& [op, v] : s.by_op) {
        auto o = stats_of(v);
        out += fmt::format("  {:<10} {:>9.3f} {:>9.3f} {:>9.3f} {:>9.3f}\n", op, o.max, o.avg, o.median, o.min);
    }
    return out;
}

}  // namespace

double MeasureReport::overhead() const {
    if (!without || without->mean <= 0) return 0;
    return with.mean / without->mean;
}

double MeasureReport::median_confidence(std::size_t runs) { return runs < 2 ? 0 : 1 - std::pow(0.5, static_cast<double>(runs) - 1); }

MeasureReport measure(model::ModelPtr m, const Sequence& s, const MeasureConfig& c) {
    MeasureReport r;
    r.sequence = s.name;
    r.confidence = c.confidence;
    r.with = run_series(m, s, c, r.failures);
    if (c.compare) {
        auto bare = model::CompiledModel::compile(model::strip_coordination(m->source()));
        r.without = run_series(bare, s, c, r.failures);
    }
    return r;
}

std::string MeasureReport::json() const {
    harness::json doc;
    doc["sequence"] = sequence;
    doc["confidence"] = confidence;
    doc["median_confidence"] = median_confidence(with.runs());
    doc["with_coordination"] = series_json(with);
    if (without) {
        doc["without_coordination"] = series_json(*without);
        doc["overhead_factor"] = overhead();
    }
    doc["failed_runs"] = failures;
    return doc.dump(2);
}

std::string MeasureReport::table() const {
    std::string out = series_table("with coordination", with);
    if (without) {
        out += series_table("without coordination", *without);
        out += fmt::format("overhead factor {:.2f}\n", overhead());
    }
    out += fmt::format("median lies within [min, max] of the runs with confidence {:.2f}%\n", 100 * median_confidence(with.runs()));
    if (failures) out += fmt::format("{} runs reported errors\n", failures);
    return out;
}

std::optional<std::string> trace_dir() {
    const char* d = std::getenv("COORDSEM_TRACE_DIR");
    if (!d || !*d) return std::nullopt;
    return std::string(d);
}

// ---------------------------------------------------------------------------
// REPL

namespace {

std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        std::string t;
        if (line[i] == '"') {
            ++i;
            while (i < line.size() && line[i] != '"') t += line[i++];
            if (i < line.size()) ++i;
        } else {
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) t += line[i++];
        }
        out.push_back(t);
    }
    return out;
}

std::map<std::string, std::string> markings(const engine::Engine& e) {
    std::map<std::string, std::string> out;
    for (const auto& [id, inst] : e.structure().instances()) {
        const auto& v = e.view(id);
        for (std::size_t i = 0; i < v.type().states.size(); ++i)
            out["state " + inst.label + "." + v.type().states[i]] = std::string(coordsem::to_string(v.markings()[i]));
    }
    for (const auto* re : e.coordination()) {
        const auto& g = re->graph();
        std::string cp = g.type().name + "/" + g.instance_name(g.coordinating()) + " ";
        for (std::uint32_t i = 0; i < g.step_count(); ++i)
            if (g.step(StepId(i)).alive) out[cp + "step " + g.step_name(StepId(i))] = std::string(coordsem::to_string(g.step(StepId(i)).m));
        for (std::uint32_t i = 0; i < g.port_count(); ++i)
            if (g.port(PortId(i)).alive) out[cp + "port " + g.port_name(PortId(i))] = std::string(coordsem::to_string(g.port(PortId(i)).m));
        for (std::uint32_t i = 0; i < g.comp_count(); ++i)
            if (g.comp(CompId(i)).alive) out[cp + "comp " + g.comp_name(CompId(i))] = std::string(coordsem::to_string(g.comp(CompId(i)).m));
    }
    return out;
}

void print_delta(const std::map<std::string, std::string>& before, const std::map<std::string, std::string>& after, std::ostream& out) {
    for (const auto& [k, v] : after) {
        auto it = before.find(k);
        if (it == before.end())
            out << "  + " << k << " = " << v << "\n";
        else if (it->second != v)
            out << "  " << k << ": " << it->second << " -> " << v << "\n";
    }
    for (const auto& [k, v] : before)
        if (!after.count(k)) out << "  - " << k << "\n";
}

bool inspect(const engine::Engine& e, const std::string& what, std::ostream& out) {
    InstanceId w = e.find(what);
    if (w.valid()) {
        const auto& v = e.view(w);
        out << what << " (" << v.type().name << ")\n";
        for (std::size_t i = 0; i < v.type().states.size(); ++i) out << "  " << v.type().states[i] << ": " << coordsem::to_string(v.markings()[i]) << "\n";
        for (const auto& [k, val] : e.structure().instance(w).attributes) out << "  attribute " << k << " = " << val << "\n";
        return true;
    }
    for (const auto* re : e.coordination()) {
        const auto& g = re->graph();
        for (std::uint32_t i = 0; i < g.comp_count(); ++i) {
            CompId c(i);
            const auto& x = g.comp(c);
            if (!x.alive || g.comp_name(c) != what) continue;
            std::int64_t in = re->count(c, expr::CountFn::SourceIn, -1), after = re->count(c, expr::CountFn::SourceAfter, -1),
                         before = re->count(c, expr::CountFn::SourceBefore, -1), tact = re->count(c, expr::CountFn::TargetActive, -1);
            out << "component " << what << " (" << model::to_string(x.kind) << ")\n"
                << "  marking " << coordsem::to_string(x.m) << "\n"
                << "  expression " << (x.lambda.empty() ? std::string("(none)") : x.lambda.text()) << "\n"
                << "  sources " << x.src.size() << ", targets " << x.tar.size() << "\n"
                << "  #SourceIn " << in << ", #SourceAfter " << after << ", #SourceBefore " << before << ", #TargetActive " << tact << "\n";
            return true;
        }
        for (std::uint32_t i = 0; i < g.step_count(); ++i)
            if (g.step(StepId(i)).alive && g.step_name(StepId(i)) == what) {
                const auto& s = g.step(StepId(i));
                out << "step " << what << " marking " << coordsem::to_string(s.m) << ", state " << coordsem::to_string(g.state_of(StepId(i))) << "\n";
                for (PortId p : s.ports) out << "  port " << g.port_name(p) << " " << coordsem::to_string(g.port(p).m) << "\n";
                for (CompId c : s.out) out << "  out " << g.comp_name(c) << " " << coordsem::to_string(g.comp(c).m) << "\n";
                return true;
            }
        for (std::uint32_t i = 0; i < g.port_count(); ++i)
            if (g.port(PortId(i)).alive && g.port_name(PortId(i)) == what) {
                const auto& p = g.port(PortId(i));
                out << "port " << what << " marking " << coordsem::to_string(p.m) << "\n";
                for (CompId c : p.in) out << "  in " << g.comp_name(c) << " " << coordsem::to_string(g.comp(c).m) << "\n";
                return true;
            }
    }
    return false;
}

const char* repl_help =
    "commands: new <Type> [as <name>] | link <a> <b> | arrange <a> <b> | unlink <a> <b> | delete <a>\n"
    "          set <inst> <attr> <value> | commit <inst> <state> | back <inst> <state>\n"
    "          inspect <entity> | markings | trace on|off | help | quit\n"
    "names with spaces go in double quotes\n";

}  // namespace

void repl(model::ModelPtr m, std::istream& in, std::ostream& out, const engine::Config& c) {
    engine::Engine e(m, c);
    std::map<std::string, InstanceId> names;
    bool tracing = c.rules.trace;
    std::size_t counter = 0;
    std::string line;
    out << "> " << std::flush;
    while (std::getline(in, line)) {
        auto t = tokens(line);
        if (t.empty()) {
            out << "> " << std::flush;
            continue;
        }
        const std::string& cmd = t[0];
        if (cmd == "quit" || cmd == "exit") break;
        auto before = markings(e);
        std::size_t trace_mark = e.trace().size();
        try {
            auto inst = [&](const std::string& n) {
                auto it = names.find(n);
                if (it != names.end()) return it->second;
                InstanceId w = e.find(n);
                if (!w.valid()) throw SequenceError("unknown instance '" + n + "'");
                return w;
            };
            auto arity = [&](std::size_t n) {
                if (t.size() != n + 1) throw SequenceError(fmt::format("{} expects {} argument(s)", cmd, n));
            };
            if (cmd == "help") {
                out << repl_help;
            } else if (cmd == "new") {
                if (t.size() != 2 && !(t.size() == 4 && t[2] == "as")) throw SequenceError("usage: new <Type> [as <name>]");
                InstanceId w = e.instantiate(t[1]);
                std::string name = t.size() == 4 ? t[3] : fmt::format("i{}", ++counter);
                names[name] = w;
                out << "created " << e.structure().instance(w).label << " as " << name << "\n";
            } else if (cmd == "link" || cmd == "arrange") {
                arity(2);
                RelationId r = cmd == "link" ? e.link(inst(t[1]), inst(t[2])) : e.link_arrangement(inst(t[1]), inst(t[2]));
                out << "relation " << r.v << " created\n";
            } else if (cmd == "unlink") {
                arity(2);
                e.unlink(relation_between(e.structure(), inst(t[1]), inst(t[2])));
                out << "unlinked\n";
            } else if (cmd == "delete") {
                arity(1);
                e.remove(inst(t[1]));
                out << "deleted\n";
            } else if (cmd == "set") {
                arity(3);
                e.set_attribute(inst(t[1]), t[2], t[3]);
                out << "ok\n";
            } else if (cmd == "commit") {
                arity(2);
                InstanceId w = inst(t[1]);
                auto r = e.commit(w, t[2]);
                out << t[2] << " " << engine::to_string(r) << "\n";
                if (r == engine::CommitResult::Pending) out << "  " << pending_reason(e, w, t[2]) << "\n";
            } else if (cmd == "back") {
                arity(2);
                e.backwards(inst(t[1]), t[2]);
                out << t[2] << " Activated\n";
            } else if (cmd == "inspect") {
                arity(1);
                std::string what = t[1];
                if (auto it = names.find(what); it != names.end() && e.exists(it->second)) what = e.structure().instance(it->second).label;
                if (!inspect(e, what, out)) out << "no entity named '" << t[1] << "'\n";
            } else if (cmd == "markings") {
                for (const auto& [k, v] : markings(e)) out << k << " = " << v << "\n";
            } else if (cmd == "trace") {
                arity(1);
                tracing = t[1] == "on";
                e.set_trace(tracing);
                out << "trace " << (tracing ? "on" : "off") << "\n";
            } else {
                out << "unknown command '" << cmd << "'\n" << repl_help;
            }
        } catch (const StructureError& x) {
            out << (x.kind == StructureError::Kind::Veto ? "vetoed: " : "error: ") << x.what() << "\n";
        } catch (const std::exception& x) {
            out << "error: " << x.what() << "\n";
        }
        if (cmd != "markings" && cmd != "inspect" && cmd != "help") print_delta(before, markings(e), out);
        if (tracing) {
            auto tr = e.trace();
            for (std::size_t i = trace_mark; i < tr.size(); ++i) out << "  " << rules::format(tr[i]) << "\n";
        }
        out << "> " << std::flush;
    }
}

}  // namespace coordsem::harness
