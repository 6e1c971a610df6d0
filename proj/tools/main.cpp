#include "starrisk/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"starrisk: star-shaped monetary risk measures on finite probability spaces"};
    app.require_subcommand(1);
    starrisk::cli::RunConfig cfg;
    std::string input, spec, out;

    const char* commands[][2] = {
        {"eval", "evaluate each measure on each loss column"},
        {"axioms", "audit measure properties on seeded probes"},
        {"aggregate", "evaluate aggregates and check star-shapedness"},
        {"envelope", "verify the convex-envelope representation"},
        {"infconv", "solve the inf-convolution of the listed measures"},
        {"optimize", "risk minimization, decomposition and portfolio selection"},
        {"margin", "CCP margin over admissible member subsets"},
    };
    for (auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--input", input, "scenario CSV: state,prob,<loss columns>");
        sub->add_option("--spec", spec, "measure-spec JSON")->required();
        sub->add_option("--seed", cfg.seed, "seed for every sampling-backed step");
        sub->add_option("--tol", cfg.tol, "tolerance for property checks");
        sub->add_option("--out", out, "write the report here instead of stdout");
        sub->add_flag("--pretty", cfg.pretty, "indent the JSON report");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    cfg.command = app.get_subcommands().front()->get_name();
    if (!input.empty()) cfg.input = input;
    if (!spec.empty()) cfg.spec = spec;
    if (!out.empty()) cfg.out = out;
    return starrisk::cli::run(cfg, std::cout, std::cerr);
}
