#include "reflectlab/run.hpp"
#include "reflectlab/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Reflected BSDE solver and verification runs on finite probability trees"};

    std::string scenario;
    std::string out_dir = ".";
    std::string mode;
    std::string numeric;
    double tol = 0;
    std::uint64_t seed = 0;
    std::size_t budget = 0;
    std::size_t generate_depth = 0;

    app.add_option("--scenario", scenario, "Scenario file ([model] [barriers] [generator] [run])");
    app.add_option("--out-dir", out_dir, "Directory for CSV and text artifacts")->capture_default_str();
    app.add_option("--mode", mode, "solve | penalize | separation | game | batch")
        ->check(CLI::IsMember({"solve", "penalize", "separation", "game", "batch"}));
    app.add_option("--numeric", numeric, "rational | float")->check(CLI::IsMember({"rational", "float"}));
    auto* tol_opt = app.add_option("--tol", tol, "Comparison tolerance in float mode")->check(CLI::NonNegativeNumber);
    auto* seed_opt = app.add_option("--seed", seed, "Seed for generated scenarios and batches");
    auto* budget_opt = app.add_option("--budget", budget, "Stopping-time pair budget for exhaustive games");
    auto* gen_opt = app.add_option("--generate", generate_depth,
                                   "Print a random strictly separated scenario of this depth (uses --seed) and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : reflectlab::exit_input_error;
    }

    if (*gen_opt) {
        try {
            std::cout << reflectlab::serialize_scenario(
                reflectlab::generate_random_scenario(*seed_opt ? seed : 1, generate_depth));
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return reflectlab::exit_input_error;
        }
        return reflectlab::exit_ok;
    }

    reflectlab::RunOptions options;
    options.out_dir = out_dir;
    if (!mode.empty()) options.mode = reflectlab::parse_run_mode(mode);
    if (!numeric.empty()) options.exact = numeric == "rational";
    if (*tol_opt) options.tol = tol;
    if (*seed_opt) options.seed = seed;
    if (*budget_opt) options.budget = budget;

    if (scenario.empty()) {
        if (options.mode != reflectlab::RunMode::batch) {
            std::cerr << "error: --scenario is required (except with --mode batch)\n";
            return reflectlab::exit_input_error;
        }
        return reflectlab::run_scenario(reflectlab::Scenario{}, options, std::cout, std::cerr);
    }
    return reflectlab::run_scenario_file(scenario, options, std::cout, std::cerr);
}
