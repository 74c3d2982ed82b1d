#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "coordsem/harness.hpp"
#include "coordsem/model.hpp"
#include "coordsem/rules.hpp"

using namespace coordsem;

namespace {

model::ModelPtr load(const std::string& path, bool strip = false) {
    auto m = model::load_model(path);
    if (strip) m = model::strip_coordination(m);
    return model::CompiledModel::compile(m);
}

void write_json(const std::string& path, const std::string& doc) {
    if (path.empty()) return;
    if (path == "-") {
        std::cout << doc << "\n";
        return;
    }
    std::ofstream(path) << doc << "\n";
}

engine::Config config(const std::string& mode, std::uint64_t seed, unsigned workers) {
    engine::Config c;
    c.runtime.mode = mode == "conc" ? runtime::Mode::Concurrent : runtime::Mode::Deterministic;
    c.runtime.seed = seed;
    c.runtime.workers = workers;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coordination process engine"};
    app.require_subcommand(1);

    std::string model_path, seq_path, json_out, mode = "det";
    std::uint64_t seed = 1;
    unsigned workers = 0;
    bool no_coord = false, strict = false;
    std::size_t min_runs = 6, max_runs = 30, at = 0;
    double confidence = 0.95;

    auto* validate = app.add_subcommand("validate", "check a model file");
    validate->add_option("model", model_path)->required();

    auto* run = app.add_subcommand("run", "run an execution sequence");
    run->add_option("model", model_path)->required();
    run->add_option("sequence", seq_path)->required();
    run->add_flag("--no-coordination", no_coord, "strip all coordination processes");
    run->add_flag("--strict", strict, "abort on the first vetoed or failing action");
    run->add_option("--mode", mode, "det or conc")->check(CLI::IsMember({"det", "conc"}));
    run->add_option("--seed", seed);
    run->add_option("--workers", workers);
    run->add_option("--json", json_out, "write the machine-readable report ('-' for stdout)");

    auto* meas = app.add_subcommand("measure", "time a sequence with and without coordination");
    meas->add_option("model", model_path)->required();
    meas->add_option("sequence", seq_path)->required();
    meas->add_option("--min-runs", min_runs);
    meas->add_option("--max-runs", max_runs);
    meas->add_option("--confidence", confidence);
    meas->add_option("--mode", mode)->check(CLI::IsMember({"det", "conc"}));
    meas->add_option("--json", json_out);

    auto* repl = app.add_subcommand("repl", "interactive session");
    repl->add_option("model", model_path)->required();

    auto* dump = app.add_subcommand("dump", "structure and coordination graph after some actions");
    dump->add_option("model", model_path)->required();
    dump->add_option("sequence", seq_path)->required();
    dump->add_option("--at", at, "number of actions to run")->required();

    auto* catalog = app.add_subcommand("catalog", "print the process rule catalog");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            auto m = model::load_model(model_path);
            auto report = model::validate_model(m);
            if (report.empty()) {
                std::cout << "valid\n";
                return 0;
            }
            for (const auto& v : report) std::cout << v.rule << " " << v.where << ": " << v.message << "\n";
            return 1;
        }
        if (*catalog) {
            std::cout << rules::catalog_text();
            return 0;
        }
        if (*repl) {
            harness::repl(load(model_path), std::cin, std::cout);
            return 0;
        }
        auto seq = harness::load_sequence(seq_path);
        if (*run) {
            harness::RunOptions o;
            o.engine = config(mode, seed, workers);
            o.strict = strict;
            auto rep = harness::run_sequence(load(model_path, no_coord), seq, o);
            std::cout << rep.table();
            write_json(json_out, rep.json());
            return rep.aborted ? 2 : 0;
        }
        if (*meas) {
            harness::MeasureConfig c;
            c.min_runs = min_runs;
            c.max_runs = max_runs;
            c.confidence = confidence;
            c.engine = config(mode, seed, workers);
            auto rep = harness::measure(load(model_path), seq, c);
            std::cout << rep.table();
            write_json(json_out, rep.json());
            return 0;
        }
        if (*dump) {
            engine::Engine e(load(model_path));
            std::map<std::string, InstanceId> names;
            harness::RunOptions o;
            o.stop_after = at;
            harness::run_on(e, seq, o, names);
            std::cout << e.dump();
            return 0;
        }
    } catch (const model::LoadError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
