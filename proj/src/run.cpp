#include "reflectlab/run.hpp"

#include "reflectlab/dynkin.hpp"
#include "reflectlab/errors.hpp"
#include "reflectlab/penalization.hpp"
#include "reflectlab/processes.hpp"
#include "reflectlab/separation.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace reflectlab {

namespace {

class Artifacts {
  public:
    explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    std::ofstream open(const std::string& name) {
        std::ofstream out(dir_ / name);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        written_.push_back(name);
        return out;
    }

    const std::vector<std::string>& written() const { return written_; }

  private:
    std::filesystem::path dir_;
    std::vector<std::string> written_;
};

struct Settings {
    RunMode mode;
    bool exact;
    double tol;
    std::uint64_t seed;
    std::size_t budget;
};

template <class Num>
Num run_tol(const Settings& s) {
    if constexpr (is_exact_v<Num>) {
        return Num(0);
    } else {
        return s.tol;
    }
}

std::vector<Rational> eps_list(const Scenario& sc) {
    if (!sc.run.eps.empty()) return sc.run.eps;
    return {Rational(1, 10), Rational(1, 100)};
}

PenaltyGrid penalty_grid(const Scenario& sc) {
    PenaltyGrid grid = PenaltyGrid::powers_of_two(6);
    if (!sc.run.ns.empty()) grid.ns = sc.run.ns;
    if (!sc.run.ms.empty()) grid.ms = sc.run.ms;
    grid.validate();
    return grid;
}

template <class Num>
Num diagonal_target() {
    return from_rational<Num>(Rational(1, 1'000'000));
}

template <class Num>
int solve_mode(const Problem<Num>& p, const Settings& s, Artifacts& art, std::ostream& out) {
    const GeneratorReport gr = validate_generator(p.model, p.gen, default_probes<Num>());
    for (const std::string& problem : gr.problems) out << "generator_warning: " << problem << '\n';
    if (!gr.step_size_ok) throw StepSizeError("mu * dt >= 1: the implicit step is not well posed");

    const RbsdeSolution<Num> sol = solve_reflected(p.model, p.gen, p.barriers);
    const ResidualReport<Num> report = verify_solution(p.model, p.gen, p.barriers, sol, run_tol<Num>(s));
    {
        auto f = art.open("solution_nodes.csv");
        write_solution_nodes_csv(f, p.model, sol, p.barriers);
    }
    {
        auto f = art.open("solution_edges.csv");
        write_solution_edges_csv(f, p.model, sol, p.gen);
    }
    {
        auto f = art.open("residuals.txt");
        write_report(f, report);
    }
    out << "Y0: " << to_string(sol.y[p.model.root()]) << '\n';
    for (const auto& r : report.entries) out << "residual_" << r.name << ": " << to_string(r.value) << '\n';
    out << "verify: " << (report.passed() ? "ok" : "FAIL") << '\n';
    return report.passed() ? exit_ok : exit_verification_failure;
}

template <class Num>
int penalize_mode(const Problem<Num>& p, const Scenario& sc, const Settings& s, Artifacts& art, std::ostream& out) {
    if (!p.barriers.lower) throw DomainError("penalize mode needs a lower barrier");
    const Num tol = run_tol<Num>(s);
    const PenaltyGrid grid = penalty_grid(sc);
    bool ok = true;

    const auto one = one_barrier_penalization_sweep(p.model, p.gen, *p.barriers.lower, grid.ns, tol);
    {
        auto f = art.open("one_barrier.csv");
        write_convergence_csv(f, one.rows);
    }
    out << "one_barrier_rows: " << one.rows.size() << '\n';
    out << "one_barrier_failures: " << one.failures() << '\n';
    out << "one_barrier_warnings: " << one.warnings() << '\n';
    ok = ok && one.passed();
    std::vector<OrderViolation<Num>> violations = one.violations;

    if (p.barriers.upper) {
        const auto two = double_penalization_sweep(p.model, p.gen, *p.barriers.lower, *p.barriers.upper, grid, tol);
        {
            auto f = art.open("penalization.csv");
            write_convergence_csv(f, two.rows);
        }
        violations.insert(violations.end(), two.violations.begin(), two.violations.end());
        out << "bracket_rows: " << two.rows.size() << '\n';
        out << "bracket_failures: " << two.failures() << '\n';
        out << "bracket_warnings: " << two.warnings() << '\n';
        ok = ok && two.passed();

        const auto diag =
            diagonal_convergence(p.model, p.gen, *p.barriers.lower, *p.barriers.upper, diagonal_target<Num>());
        {
            auto f = art.open("diagonal.csv");
            write_convergence_csv(f, diag.rows);
        }
        out << "diagonal_final_n: " << diag.final_n << '\n';
        out << "diagonal_final_gap: " << to_string(diag.rows.back().max_gap) << '\n';
        out << "diagonal_nonincreasing: " << (diag.nonincreasing ? "yes" : "no") << '\n';
        out << "diagonal_converged: " << (diag.converged ? "yes" : "no") << '\n';
        ok = ok && diag.passed();
    }
    {
        auto f = art.open("violations.csv");
        write_violations_csv(f, violations);
    }
    out << "penalize: " << (ok ? "ok" : "FAIL") << '\n';
    return ok ? exit_ok : exit_verification_failure;
}

template <class Num>
int separation_mode(const Problem<Num>& p, const Scenario& sc, const Settings& s, Artifacts& art, std::ostream& out) {
    if (!p.barriers.lower || !p.barriers.upper) throw DomainError("separation mode needs both barriers");
    const auto& L = *p.barriers.lower;
    const auto& U = *p.barriers.upper;
    const SeparationReport rep = check_separation(p.model, L, U);
    out << "separation: " << to_string(rep.kind) << '\n';
    if (!rep.nodes.empty()) {
        out << "separation_nodes:";
        for (const auto& a : rep.nodes) out << ' ' << to_string(a);
        out << '\n';
    }
    if (rep.kind != SeparationKind::strict) {
        out << "separation_check: FAIL (strict separation required)\n";
        return exit_verification_failure;
    }
    bool ok = true;

    const auto h = construct_H(p.model, L, U);
    {
        auto f = art.open("h.csv");
        write_process_csv(f, p.model, h.h);
    }
    {
        auto f = art.open("stages.csv");
        f << "stage,expected_variation,jump_sum\n";
        for (std::size_t k = 0; k < h.taus.size(); ++k)
            f << k << ',' << to_string(h.stage_variation[k]) << ',' << to_string(h.stage_jump_sum[k]) << '\n';
    }
    bool final_is_T = true;
    for (NodeId v : h.taus.back().stop_nodes()) final_is_T = final_is_T && p.model.is_leaf(v);
    const Num variation = h.stage_variation.back();
    const Num bound = min_variation_lower_bound(p.model, L, U);
    std::size_t max_stages = 0;
    for (std::size_t st : h.stages_per_leaf) max_stages = std::max(max_stages, st);
    out << "stages_max: " << max_stages << '\n';
    out << "restarts: " << h.restarts.size() << '\n';
    out << "final_tau_is_T: " << (final_is_T ? "yes" : "no") << '\n';
    out << "expected_variation_H: " << to_string(variation) << '\n';
    out << "min_variation_bound: " << to_string(bound) << '\n';
    ok = ok && final_is_T && !(variation < bound - run_tol<Num>(s));
    ok = ok && h.stage_variation.back() - h.stage_jump_sum.back() <= run_tol<Num>(s) &&
         h.stage_jump_sum.back() - h.stage_variation.back() <= run_tol<Num>(s);

    const auto sandwich = sandwich_semimartingale(p.model, L, U);
    {
        auto f = art.open("sandwich_nodes.csv");
        write_solution_nodes_csv(f, p.model, sandwich, p.barriers);
    }
    const auto sandwich_gen = [&] {
        std::vector<Num> xi;
        for (std::size_t k = 0; k < p.model.leaf_count(); ++k) {
            const NodeId leaf = p.model.leaf(k);
            xi.push_back(min_of(positive_part(L[leaf]), U[leaf]));
        }
        return GeneratorSpec<Num>::make(p.model, std::move(xi));
    }();
    const bool sandwich_ok =
        verify_solution(p.model, sandwich_gen, p.barriers, sandwich, run_tol<Num>(s)).passed();
    out << "sandwich_verify: " << (sandwich_ok ? "ok" : "FAIL") << '\n';
    ok = ok && sandwich_ok;

    if (sc.model.kind == ModelKind::example33 && sc.model.cells >= 2) {
        const auto mass = example38_scenario<Num>(sc.model.cells);
        {
            auto f = art.open("reflection_mass.csv");
            f << "cell,probability,k_mass,a_mass,k_pushes,a_pushes\n";
            for (std::size_t n = 1; n <= sc.model.cells; ++n) {
                const NodeId cell = mass.family.cell_node(n);
                f << n << ',' << to_string(mass.family.model.path_probability(cell)) << ','
                  << to_string(mass.k_per_cell[n - 1]) << ',' << to_string(mass.a_per_cell[n - 1]) << ','
                  << mass.k_pushes_per_cell[n - 1] << ',' << mass.a_pushes_per_cell[n - 1] << '\n';
            }
        }
        out << "truncated_constant: " << to_string(mass.family.truncated_constant) << '\n';
        out << "expected_K: " << to_string(mass.expected_k) << '\n';
        out << "expected_A: " << to_string(mass.expected_a) << '\n';
        out << "mass_bound: " << to_string(mass.bound) << '\n';
        out << "mass_dominates: " << (mass.dominates() ? "yes" : "no") << '\n';
        ok = ok && mass.dominates();
    }
    out << "separation_check: " << (ok ? "ok" : "FAIL") << '\n';
    return ok ? exit_ok : exit_verification_failure;
}

template <class Num>
GameContext<Num> game_context(const Problem<Num>& p, const Settings& s) {
    if (!p.barriers.lower || !p.barriers.upper) throw DomainError("game mode needs both barriers");
    BarrierPair<Num> pair{*p.barriers.lower, *p.barriers.upper};
    return GameContext<Num>::solve(p.model, p.gen, std::move(pair), run_tol<Num>(s));
}

template <class Num>
bool close(const Num& a, const Num& b, const Num& tol) {
    return abs_value<Num>(a - b) <= tol;
}

template <class Num>
int game_mode(const Problem<Num>& p, const Scenario& sc, const Settings& s, Artifacts& art, std::ostream& out) {
    const GameContext<Num> ctx = game_context(p, s);
    const NodeId node = p.model.node(sc.run.node);
    if (p.model.is_leaf(node)) throw DomainError("game node " + to_string(sc.run.node) + " is terminal");
    const Num tol = run_tol<Num>(s);

    const GameValues<Num> values = game_values_bruteforce(ctx, node, s.budget);
    const Num& y = ctx.solution().y[node];
    bool ok = close(values.lower, y, tol) && close(values.upper, y, tol);
    {
        auto f = art.open("game_values.csv");
        f << "level,index,lower,upper,y,strategies\n";
        f << sc.run.node.level << ',' << sc.run.node.index << ',' << to_string(values.lower) << ','
          << to_string(values.upper) << ',' << to_string(y) << ',' << values.strategies << '\n';
    }
    out << "node: " << to_string(sc.run.node) << '\n';
    out << "strategies: " << values.strategies << '\n';
    out << "lower_value: " << to_string(values.lower) << '\n';
    out << "upper_value: " << to_string(values.upper) << '\n';
    out << "Y: " << to_string(y) << '\n';
    out << "value_identity: " << (ok ? "ok" : "FAIL") << '\n';

    auto regions = art.open("stopping_regions.csv");
    regions << "eps,player,nodes\n";
    const auto eps = eps_list(sc);
    for (std::size_t k = 0; k < eps.size(); ++k) {
        const auto cert = saddle_check(ctx, node, from_rational<Num>(eps[k]), s.budget);
        {
            auto f = art.open("certificate_" + std::to_string(k) + ".txt");
            write_certificate(f, p.model, cert);
        }
        regions << to_string(eps[k]) << ",sigma," << stopping_region(p.model, cert.sigma_eps) << '\n';
        regions << to_string(eps[k]) << ",tau," << stopping_region(p.model, cert.tau_eps) << '\n';
        out << "saddle_eps_" << to_string(eps[k]) << ": " << (cert.passed ? "ok" : "FAIL")
            << " sigma_margin=" << to_string(cert.sigma_margin) << " tau_margin=" << to_string(cert.tau_margin)
            << '\n';
        ok = ok && cert.passed;
    }
    out << "game: " << (ok ? "ok" : "FAIL") << '\n';
    return ok ? exit_ok : exit_verification_failure;
}

/// One randomized scenario through every suite.
template <class Num>
struct BatchRow {
    std::uint64_t seed = 0;
    Num y0 = Num(0);
    bool verify = false;
    std::string game = "skipped";
    std::string saddle = "skipped";
    bool bracket = false;
    bool diagonal = false;
    bool separation = false;

    bool passed() const {
        return verify && game != "FAIL" && saddle != "FAIL" && bracket && diagonal && separation;
    }
};

template <class Num>
BatchRow<Num> batch_case(std::uint64_t seed, const Scenario& base, const Settings& s) {
    const Scenario sc = generate_random_scenario(seed, base.run.depth);
    const Problem<Num> p = build_problem<Num>(sc);
    const Num tol = run_tol<Num>(s);
    const auto& L = *p.barriers.lower;
    const auto& U = *p.barriers.upper;

    BatchRow<Num> row;
    row.seed = seed;
    const RbsdeSolution<Num> sol = solve_reflected(p.model, p.gen, p.barriers);
    row.y0 = sol.y[0];
    row.verify = verify_solution(p.model, p.gen, p.barriers, sol, tol).passed();

    const BigInt count = count_stopping_times(p.model, 0, 0);
    if (row.verify && count * count <= BigInt(s.budget)) {
        const GameContext<Num> ctx(p.model, p.gen, {L, U}, sol, tol);
        const auto v = game_values_bruteforce(ctx, 0, s.budget);
        row.game = close(v.lower, row.y0, tol) && close(v.upper, row.y0, tol) ? "ok" : "FAIL";
        bool saddle_ok = true;
        for (const Rational& e : eps_list(base))
            saddle_ok = saddle_ok && saddle_check(ctx, 0, from_rational<Num>(e), s.budget).passed;
        row.saddle = saddle_ok ? "ok" : "FAIL";
    }

    row.bracket = double_penalization_sweep(p.model, p.gen, L, U, penalty_grid(base), tol).passed() &&
                  one_barrier_penalization_sweep(p.model, p.gen, L, penalty_grid(base).ns, tol).passed();
    row.diagonal = diagonal_convergence(p.model, p.gen, L, U, diagonal_target<Num>()).passed();

    bool sep = check_separation(p.model, L, U).kind == SeparationKind::strict;
    if (sep) {
        const auto h = construct_H(p.model, L, U);
        for (NodeId v : h.taus.back().stop_nodes()) sep = sep && p.model.is_leaf(v);
        sep = sep && !(h.stage_variation.back() < min_variation_lower_bound(p.model, L, U) - tol);
    }
    row.separation = sep;
    return row;
}

template <class Num>
int batch_mode(const Scenario& sc, const Settings& s, Artifacts& art, std::ostream& out) {
    if (sc.run.depth == 0 || sc.run.depth > max_random_depth)
        throw DomainError("batch depth must be in 1.." + std::to_string(max_random_depth));
    auto f = art.open("batch.csv");
    f << "seed,y0,verify,game,saddle,bracket,diagonal,separation\n";
    std::size_t failures = 0;
    auto yn = [](bool b) { return b ? "ok" : "FAIL"; };
    for (std::size_t i = 0; i < sc.run.batch; ++i) {
        const auto row = batch_case<Num>(s.seed + i, sc, s);
        f << row.seed << ',' << to_string(row.y0) << ',' << yn(row.verify) << ',' << row.game << ',' << row.saddle
          << ',' << yn(row.bracket) << ',' << yn(row.diagonal) << ',' << yn(row.separation) << '\n';
        if (!row.passed()) {
            ++failures;
            out << "batch_failure_seed: " << row.seed << '\n';
        }
    }
    out << "batch_scenarios: " << sc.run.batch << '\n';
    out << "batch_depth: " << sc.run.depth << '\n';
    out << "batch_failures: " << failures << '\n';
    return failures == 0 ? exit_ok : exit_verification_failure;
}

template <class Num>
int dispatch(const Scenario& sc, const Settings& s, Artifacts& art, std::ostream& out) {
    if (s.mode == RunMode::batch) return batch_mode<Num>(sc, s, art, out);
    const Problem<Num> p = build_problem<Num>(sc);
    out << "nodes: " << p.model.node_count() << '\n';
    out << "depth: " << p.model.depth() << '\n';
    switch (s.mode) {
        case RunMode::solve:
            return solve_mode(p, s, art, out);
        case RunMode::penalize:
            return penalize_mode(p, sc, s, art, out);
        case RunMode::separation:
            return separation_mode(p, sc, s, art, out);
        case RunMode::game:
            return game_mode(p, sc, s, art, out);
        case RunMode::batch:
            break;
    }
    return exit_input_error;
}

}  // namespace

int run_scenario(const Scenario& scenario, const RunOptions& options, std::ostream& summary, std::ostream& errors) {
    const Settings s{options.mode.value_or(scenario.run.mode), options.exact.value_or(scenario.run.exact),
                     options.tol.value_or(scenario.run.tol), options.seed.value_or(scenario.run.seed),
                     options.budget.value_or(scenario.run.budget)};
    // The summary is buffered so a run that fails on input prints only the error.
    std::ostringstream out;
    out << "mode: " << to_string(s.mode) << '\n';
    out << "numeric: " << (s.exact ? "rational" : "float") << '\n';
    if (!s.exact) out << "tol: " << to_string(s.tol) << '\n';
    int code = exit_input_error;
    try {
        Artifacts art(options.out_dir);
        code = s.exact ? dispatch<Rational>(scenario, s, art, out) : dispatch<double>(scenario, s, art, out);
        out << "artifacts:";
        for (const std::string& name : art.written()) out << ' ' << name;
        out << '\n';
    } catch (const EnumerationOverflow& e) {
        errors << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const ModelError& e) {
        errors << "error: model: " << e.what() << '\n';
        return exit_input_error;
    } catch (const DomainError& e) {
        errors << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const StepSizeError& e) {
        errors << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const SolverError& e) {
        errors << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const SeparationError& e) {
        errors << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::filesystem::filesystem_error& e) {
        errors << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    out << "status: " << (code == exit_ok ? "pass" : "FAIL") << '\n';
    summary << out.str();
    return code;
}

int run_scenario_text(std::string_view text, const RunOptions& options, std::ostream& summary, std::ostream& errors) {
    Scenario scenario;
    try {
        scenario = parse_scenario(text);
    } catch (const ParseError& e) {
        errors << "error: parse: " << e.what() << '\n';
        return exit_input_error;
    }
    return run_scenario(scenario, options, summary, errors);
}

int run_scenario_file(const std::filesystem::path& path, const RunOptions& options, std::ostream& summary,
                      std::ostream& errors) {
    std::ifstream in(path);
    if (!in) {
        errors << "error: cannot read scenario file " << path.string() << '\n';
        return exit_input_error;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return run_scenario_text(buffer.str(), options, summary, errors);
}

}  // namespace reflectlab
