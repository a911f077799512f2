#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "reflectlab/dynkin.hpp"
#include "reflectlab/errors.hpp"
#include "reflectlab/run.hpp"
#include "reflectlab/scenario.hpp"
#include "reflectlab/separation.hpp"

#include <sstream>

namespace py = pybind11;
using namespace reflectlab;

namespace {

py::object fraction(const Rational& q) {
    static py::object Fraction = py::module_::import("fractions").attr("Fraction");
    return Fraction(to_string(q));
}

py::object value(const Rational& q) { return fraction(q); }
py::object value(double x) { return py::float_(x); }

template <class Vec>
py::list values(const Vec& v) {
    py::list out;
    for (const auto& x : v) out.append(value(x));
    return out;
}

template <class Num>
py::dict solve_impl(const Scenario& sc, double tol) {
    const Problem<Num> p = build_problem<Num>(sc);
    const auto sol = solve_reflected(p.model, p.gen, p.barriers);
    Num t{};
    if constexpr (!is_exact_v<Num>) t = tol;
    const auto report = verify_solution(p.model, p.gen, p.barriers, sol, t);
    py::dict residuals;
    for (const auto& r : report.entries) residuals[py::str(r.name)] = value(r.value);
    py::dict out;
    out["y"] = values(sol.y.values());
    out["k"] = values(sol.k.values());
    out["a"] = values(sol.a.values());
    out["m"] = values(sol.m.values());
    out["residuals"] = residuals;
    out["verified"] = report.passed();
    return out;
}

template <class Num>
py::dict game_impl(const Scenario& sc, NodeAddress at, std::size_t budget, double tol) {
    const Problem<Num> p = build_problem<Num>(sc);
    if (!p.barriers.lower || !p.barriers.upper) throw DomainError("games need both barriers");
    Num t{};
    if constexpr (!is_exact_v<Num>) t = tol;
    const auto ctx = GameContext<Num>::solve(p.model, p.gen, {*p.barriers.lower, *p.barriers.upper}, t);
    const NodeId node = p.model.node(at);
    const auto v = game_values_bruteforce(ctx, node, budget);
    py::dict out;
    out["lower"] = value(v.lower);
    out["upper"] = value(v.upper);
    out["y"] = value(ctx.solution().y[node]);
    out["strategies"] = v.strategies;
    out["sigma_region"] = stopping_region(p.model, v.minimax_sigma);
    out["tau_region"] = stopping_region(p.model, v.maximin_tau);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reflected BSDEs, penalization and Dynkin games on finite probability trees";

    py::register_exception<ParseError>(m, "ScenarioParseError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<EnumerationOverflow>(m, "EnumerationOverflow", PyExc_RuntimeError);
    py::register_exception<StepSizeError>(m, "StepSizeError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    m.def("canonical_scenario", [](const std::string& text) { return serialize_scenario(parse_scenario(text)); },
          py::arg("text"), "Canonical serialization of a scenario file.");

    m.def("generate_random_scenario",
          [](std::uint64_t seed, std::size_t depth) { return serialize_scenario(generate_random_scenario(seed, depth)); },
          py::arg("seed"), py::arg("depth"), "Strictly separated random scenario as scenario-file text.");

    m.def(
        "solve",
        [](const std::string& text, bool exact, double tol) {
            const Scenario sc = parse_scenario(text);
            return exact ? solve_impl<Rational>(sc, tol) : solve_impl<double>(sc, tol);
        },
        py::arg("text"), py::arg("exact") = true, py::arg("tol") = 1e-10,
        "Reflected solution (Y per node, K, A, M increments) with its verifier residuals. Rational mode returns "
        "fractions.Fraction values.");

    m.def(
        "game_values",
        [](const std::string& text, std::pair<std::size_t, std::size_t> node, std::size_t budget, bool exact,
           double tol) {
            const Scenario sc = parse_scenario(text);
            const NodeAddress at{node.first, node.second};
            return exact ? game_impl<Rational>(sc, at, budget, tol) : game_impl<double>(sc, at, budget, tol);
        },
        py::arg("text"), py::arg("node") = std::pair<std::size_t, std::size_t>{0, 0},
        py::arg("budget") = default_pair_budget, py::arg("exact") = true, py::arg("tol") = 1e-10,
        "Brute-force lower and upper game values at a node.");

    m.def(
        "min_variation_bound",
        [](std::size_t cells) {
            const auto fam = example33_barriers<Rational>(cells);
            py::dict out;
            out["bound"] = fraction(min_variation_lower_bound(fam.model, fam.lower, fam.upper));
            out["constant"] = fraction(fam.truncated_constant);
            return out;
        },
        py::arg("cells"), "Variation lower bound on the oscillating family with N cells.");

    m.def(
        "reflection_mass",
        [](std::size_t cells) {
            const auto r = example38_scenario<Rational>(cells);
            py::dict out;
            out["expected_k"] = fraction(r.expected_k);
            out["expected_a"] = fraction(r.expected_a);
            out["bound"] = fraction(r.bound);
            out["k_pushes_per_cell"] = r.k_pushes_per_cell;
            out["a_pushes_per_cell"] = r.a_pushes_per_cell;
            return out;
        },
        py::arg("cells"), "Reflection masses on the oscillating family (cells >= 2).");

    m.def(
        "run",
        [](const std::string& text, const std::filesystem::path& out_dir, std::optional<std::string> mode,
           std::optional<std::string> numeric, std::optional<double> tol, std::optional<std::uint64_t> seed,
           std::optional<std::size_t> budget) {
            RunOptions options;
            options.out_dir = out_dir;
            if (mode) options.mode = parse_run_mode(*mode);
            if (numeric) {
                if (*numeric != "rational" && *numeric != "float")
                    throw py::value_error("numeric must be 'rational' or 'float'");
                options.exact = *numeric == "rational";
            }
            options.tol = tol;
            options.seed = seed;
            options.budget = budget;
            std::ostringstream summary;
            std::ostringstream errors;
            const int code = run_scenario_text(text, options, summary, errors);
            return py::make_tuple(code, summary.str(), errors.str());
        },
        py::arg("text"), py::arg("out_dir"), py::arg("mode") = py::none(), py::arg("numeric") = py::none(),
        py::arg("tol") = py::none(), py::arg("seed") = py::none(), py::arg("budget") = py::none(),
        "Runs a scenario like the command-line tool; returns (exit_code, summary, errors).");
}
