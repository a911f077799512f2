#include "doctest.h"

#include "reflectlab/errors.hpp"
#include "reflectlab/rbsde.hpp"
#include "test_support.hpp"

#include <cmath>
#include <sstream>

using namespace reflectlab;
using testing_support::constant;
using testing_support::Q;

namespace {

// Uniform binary depth 1, ξ = {0, 1}, L ≡ 0, U(root) = 1/4, U(leaves) = 1.
struct Clamping {
    TreeModel model = TreeModel::uniform_binary(1);
    GeneratorSpec<Rational> gen = GeneratorSpec<Rational>::make(model, {Q(0), Q(1)});
    AdaptedProcess<Rational> lower = constant(model, Q(0));
    AdaptedProcess<Rational> upper{std::vector<Rational>{Q(1, 4), Q(1), Q(1)}};
};

GeneratorSpec<Rational> negated(const TreeModel& m, const GeneratorSpec<Rational>& g) {
    GeneratorSpec<Rational> out = g;
    for (auto& x : out.xi) x = -x;
    // f̂(t, y) = -f(t, -y); for a + b y this is -a + b y.
    out.f = Driver<Rational>::affine(-g.f.intercept(), g.f.slope());
    std::vector<Rational> v;
    for (NodeId n = 0; n < m.node_count(); ++n) v.push_back(-g.v.at(n));
    out.v = PredictableIncrements<Rational>(std::move(v));
    return out;
}

AdaptedProcess<Rational> neg(const AdaptedProcess<Rational>& x) {
    std::vector<Rational> v(x.values().begin(), x.values().end());
    for (auto& e : v) e = -e;
    return AdaptedProcess<Rational>(std::move(v));
}

}  // namespace

TEST_CASE("implicit step examples") {
    const auto zero = [](std::size_t, double) { return 0.0; };
    CHECK(implicit_step(5.0, zero, 0, 1.0, 0.0) == 5.0);

    const double y = implicit_step(1.0, [](std::size_t, double v) { return -v; }, 0, 0.5, 0.0);
    CHECK(std::abs(y - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(y - 1.0 - (-y) * 0.5) <= 1e-12);

    const auto penalty = [](std::size_t, double v) { return 3.0 * std::max(0.5 - v, 0.0); };
    const double p = implicit_step(0.0, penalty, 0, 1.0, 0.0);
    CHECK(std::abs(p - 0.375) <= 1e-12);
    CHECK(std::abs(p - penalty(0, p)) <= 1e-12);

    CHECK_THROWS_AS(implicit_step(0.0, zero, 0, 1.0, 1.0), StepSizeError);
    CHECK_THROWS_AS(implicit_step(0.0, [](std::size_t, double) { return NAN; }, 0, 1.0, 0.0), SolverError);
}

TEST_CASE("catalogue implicit step is exact in rational mode") {
    const TreeModel m = TreeModel::deterministic_chain(1);
    CHECK(implicit_step(Q(1), Driver<Rational>::affine(Q(0), Q(-1)), 0, Q(1, 2), Q(0)) == Q(2, 3));
    const auto lower = constant(m, Q(1, 2));
    const auto pen = Driver<Rational>::zero().with_lower_penalty(lower, Q(3));
    CHECK(implicit_step(Q(0), pen, 0, Q(1), Q(0)) == Q(3, 8));
    // Both penalties active on the same node, the root sits between the breakpoints.
    const auto both = pen.with_upper_penalty(constant(m, Q(2)), Q(5));
    CHECK(implicit_step(Q(1), both, 0, Q(1), Q(0)) == Q(1));
    CHECK(implicit_step(Q(8), both, 0, Q(1), Q(0)) == Q(3));  // y = 8 - 5 (y - 2)
    CHECK_THROWS_AS(implicit_step(Q(0), Driver<Rational>::monotone_cubic(Q(1)), 0, Q(1), Q(0)), SolverError);
    CHECK_THROWS_AS(implicit_step(Q(0), Driver<Rational>::zero(), 0, Q(2), Q(1, 2)), StepSizeError);

    // Float mode falls back to bisection for the cubic driver.
    const double y = implicit_step(2.0, Driver<double>::monotone_cubic(1.0), 0, 1.0, 0.0);
    CHECK(std::abs(y + y * y * y - 2.0) <= 1e-12);
}

TEST_CASE("solve_bsde examples") {
    const TreeModel m = TreeModel::uniform_binary(2);
    const std::vector<Rational> xi{Q(1), Q(-2), Q(5, 3), Q(0)};
    const auto sol = solve_bsde(m, GeneratorSpec<Rational>::make(m, xi));
    CHECK(sol.y == martingale_from_terminal(m, xi));

    const TreeModel chain = TreeModel::deterministic_chain(2);
    auto drift = GeneratorSpec<Rational>::make(chain, {Q(0)});
    drift.v = PredictableIncrements<Rational>(std::vector<Rational>{Q(1), Q(1), Q(0)});
    CHECK(solve_bsde(chain, drift).y[0] == 2);

    const TreeModel bin = TreeModel::uniform_binary(1);
    const auto lin = GeneratorSpec<Rational>::make(bin, {Q(0), Q(1)}, Driver<Rational>::affine(Q(0), Q(-1)));
    CHECK(solve_bsde(bin, lin).y[0] == Q(1, 4));
}

TEST_CASE("one-barrier solvers") {
    const TreeModel chain = TreeModel::deterministic_chain(2);
    const auto gen = GeneratorSpec<Rational>::make(chain, {Q(0)});
    const auto low = testing_support::by_level<Rational>(chain, {Q(1, 2), Q(1, 2), Q(0)});
    const auto sol = solve_lower_reflected(chain, gen, low);
    CHECK(sol.y[0] == Q(1, 2));
    CHECK(sol.y[1] == Q(1, 2));
    CHECK(sol.k.at(1) == Q(1, 2));  // the gap is made up at the last step
    CHECK(sol.k.at(0) == 0);
    CHECK(verify_solution(chain, gen, Barriers<Rational>::lower_only(low), sol, Q(0)).passed());

    // A very negative barrier never binds.
    testing_support::Draw d(3);
    const TreeModel r = testing_support::random_tree(d, 3);
    std::vector<Rational> xi;
    for (std::size_t k = 0; k < r.leaf_count(); ++k) xi.push_back(d.grid(-1, 1, 8));
    const auto g = GeneratorSpec<Rational>::make(r, xi, Driver<Rational>::affine(Q(1, 3), Q(-1, 2)), Q(-1, 2));
    const auto plain = solve_bsde(r, g);
    const auto far = solve_lower_reflected(r, g, constant(r, Q(-1000)));
    CHECK(far.y == plain.y);
    CHECK(far.m == plain.m);

    CHECK_THROWS_AS(solve_lower_reflected(chain, gen, constant(chain, Q(1))), DomainError);
    CHECK_THROWS_AS(solve_upper_reflected(chain, gen, constant(chain, Q(-1))), DomainError);
}

TEST_CASE("lower reflection with f = 0 and ξ = L_T is the Snell envelope") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        testing_support::Draw d(seed);
        const TreeModel m = testing_support::random_tree(d, 1 + seed % 4);
        AdaptedProcess<Rational> payoff(m.node_count(), Q(0));
        for (NodeId n = 0; n < m.node_count(); ++n) payoff[n] = d.grid(-2, 2, 8);
        std::vector<Rational> xi;
        for (std::size_t k = 0; k < m.leaf_count(); ++k) xi.push_back(payoff[m.leaf(k)]);
        const auto sol = solve_lower_reflected(m, GeneratorSpec<Rational>::make(m, xi), payoff);
        CHECK(sol.y == snell_envelope(m, payoff));
    }
}

TEST_CASE("double reflection examples") {
    const TreeModel m = TreeModel::uniform_binary(2);
    const auto gen = GeneratorSpec<Rational>::make(m, std::vector<Rational>(4, Q(1, 2)));
    const auto sol = solve_double_reflected(m, gen, constant(m, Q(0)), constant(m, Q(1)));
    CHECK(sol.y == constant(m, Q(1, 2)));
    CHECK(sol.k == PredictableIncrements<Rational>(m.node_count(), Q(0)));
    CHECK(sol.a == PredictableIncrements<Rational>(m.node_count(), Q(0)));

    Clamping c;
    const auto s = solve_double_reflected(c.model, c.gen, c.lower, c.upper);
    CHECK(s.y[0] == Q(1, 4));
    CHECK(s.a.at(0) == Q(1, 4));
    CHECK(s.k.at(0) == 0);
    CHECK(verify_solution(c.model, c.gen, Barriers<Rational>::both(c.lower, c.upper), s, Q(0)).passed());
}

TEST_CASE("equal barriers force the common value and push on one side only") {
    const TreeModel chain = TreeModel::deterministic_chain(2);
    const auto gen = GeneratorSpec<Rational>::make(chain, {Q(1)});
    const auto pinned = testing_support::by_level<Rational>(chain, {Q(0), Q(3), Q(1)});
    const auto s = solve_double_reflected(chain, gen, pinned, pinned);
    CHECK(s.y == pinned);
    CHECK(s.a.at(0) == 3);
    CHECK(s.k.at(0) == 0);
    CHECK(s.k.at(1) == 2);
    CHECK(s.a.at(1) == 0);
}

TEST_CASE("preconditions of the two-barrier solver") {
    const TreeModel m = TreeModel::uniform_binary(1);
    const auto gen = GeneratorSpec<Rational>::make(m, {Q(0), Q(1)});
    CHECK_THROWS_AS(solve_double_reflected(m, gen, constant(m, Q(1)), constant(m, Q(0))), DomainError);
    CHECK_THROWS_AS(solve_double_reflected(m, gen, constant(m, Q(1, 2)), constant(m, Q(2))), DomainError);
    auto stiff = gen;
    stiff.mu = Q(1);
    CHECK_THROWS_AS(solve_double_reflected(m, stiff, constant(m, Q(0)), constant(m, Q(2))), StepSizeError);
    CHECK_THROWS_AS(solve_bsde(m, GeneratorSpec<Rational>::make(m, {Q(0)})), ModelError);
}

TEST_CASE("verifier flags perturbed solutions") {
    Clamping c;
    const auto barriers = Barriers<Rational>::both(c.lower, c.upper);
    const auto sol = solve_double_reflected(c.model, c.gen, c.lower, c.upper);
    const auto ok = verify_solution(c.model, c.gen, barriers, sol, Q(0));
    for (const auto& e : ok.entries) CHECK_MESSAGE(e.value == 0, e.name);

    auto bumped = sol;
    bumped.y[2] += Q(1, 1000);
    const auto r1 = verify_solution(c.model, c.gen, barriers, bumped, Q(0));
    CHECK_FALSE(r1.passed());
    CHECK(r1["dynamics"].value >= Q(1, 1000));

    // Move the push to a node where Y > L: a two-level chain with slack at the root.
    const TreeModel chain = TreeModel::deterministic_chain(2);
    const auto gen = GeneratorSpec<Rational>::make(chain, {Q(0)});
    const auto low = testing_support::by_level<Rational>(chain, {Q(0), Q(1, 2), Q(0)});
    auto s = solve_lower_reflected(chain, gen, low);
    REQUIRE(s.k.at(1) == Q(1, 2));
    s.k.at(0) = s.k.at(1);
    s.k.at(1) = 0;
    const auto r2 = verify_solution(chain, gen, Barriers<Rational>::lower_only(low), s, Q(0));
    CHECK(r2["flat_off_lower"].value > 0);
    CHECK_FALSE(r2.passed());

    std::ostringstream text;
    write_report(text, r2);
    CHECK(text.str().find("residual flat_off_lower") != std::string::npos);
    CHECK(text.str().find("verdict FAIL") != std::string::npos);
}

TEST_CASE("random problems: verification, uniqueness under sweep order, no double push") {
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        auto p = testing_support::random_problem(seed, 1 + seed % 4);
        const auto barriers = Barriers<Rational>::both(p.lower, p.upper);
        const auto sol = solve_double_reflected(p.model, p.gen, p.lower, p.upper);
        const auto report = verify_solution(p.model, p.gen, barriers, sol, Q(0));
        CHECK(report.passed());
        for (std::uint64_t sweep = 1; sweep <= 3; ++sweep) {
            CHECK(solve_double_reflected(p.model, p.gen, p.lower, p.upper, {sweep}) == sol);
        }
    }
}

TEST_CASE("comparison: larger data gives a larger solution") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto p = testing_support::random_problem(seed, 1 + seed % 4, false);
        testing_support::Draw d(seed + 1000);
        auto q = p.gen;
        for (std::size_t k = 0; k < q.xi.size(); ++k) {
            q.xi[k] = min_of(Rational(q.xi[k] + d.grid(0, 1, 8)), p.upper[p.model.leaf(k)]);
        }
        q.f = Driver<Rational>::affine(p.gen.f.intercept() + d.grid(0, 1, 4), p.gen.f.slope());
        std::vector<Rational> v(p.gen.v.values().begin(), p.gen.v.values().end());
        for (NodeId n = 0; n < p.model.node_count(); ++n) {
            if (!p.model.is_leaf(n)) v[n] += d.grid(0, 1, 8);
        }
        q.v = PredictableIncrements<Rational>(std::move(v));
        // Compare drivers on a level footing: base form zero means intercept/slope 0.
        if (p.gen.f.form() == DriverForm::zero) q.f = Driver<Rational>::affine(d.grid(0, 1, 4), Q(0));
        const auto y1 = solve_double_reflected(p.model, p.gen, p.lower, p.upper).y;
        const auto y2 = solve_double_reflected(p.model, q, p.lower, p.upper).y;
        for (NodeId n = 0; n < p.model.node_count(); ++n) CHECK(y1[n] <= y2[n]);
    }
}

TEST_CASE("sign symmetry maps lower reflection onto upper reflection") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto p = testing_support::random_problem(seed, 1 + seed % 4);
        if (p.gen.f.form() == DriverForm::zero) p.gen.f = Driver<Rational>::affine(Q(0), Q(0));
        const auto low = solve_lower_reflected(p.model, p.gen, p.lower);
        const auto up = solve_upper_reflected(p.model, negated(p.model, p.gen), neg(p.lower));
        CHECK(up.y == neg(low.y));
        CHECK(up.a == low.k);
        for (NodeId n = 1; n < p.model.node_count(); ++n) CHECK(up.m.into(n) == -low.m.into(n));

        const auto dbl = solve_double_reflected(p.model, p.gen, p.lower, p.upper);
        const auto mirrored = solve_double_reflected(p.model, negated(p.model, p.gen), neg(p.upper), neg(p.lower));
        CHECK(mirrored.y == neg(dbl.y));
        CHECK(mirrored.k == dbl.a);
        CHECK(mirrored.a == dbl.k);
    }
}

TEST_CASE("localization: frozen data beyond tau freezes the solution") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto p = testing_support::random_problem(seed, 2 + seed % 3);
        const auto taus = enumerate_stopping_times(p.model, 0, 1'000'000);
        const auto& tau = taus[seed % taus.size()];
        const auto fz = freeze_after(p.model, p.gen, p.lower, p.upper, tau);
        const auto sol = solve_double_reflected(p.model, fz.gen, fz.lower, fz.upper);
        for (NodeId n = 0; n < p.model.node_count(); ++n) {
            NodeId s = n;
            while (!tau.stops_at(s) && s != p.model.root()) s = p.model.parent_or_self(s);
            if (!tau.stops_at(s)) continue;
            CHECK(sol.y[n] == sol.y[s]);
            CHECK(sol.k.at(n) == 0);
            CHECK(sol.a.at(n) == 0);
            if (n != s) CHECK(sol.m.into(n) == 0);
        }
    }
}

TEST_CASE("generator validation") {
    const TreeModel m = TreeModel::uniform_binary(2);
    auto good = GeneratorSpec<Rational>::make(m, std::vector<Rational>(4, Q(0)), Driver<Rational>::affine(Q(1), Q(-2)),
                                              Q(-2));
    CHECK(validate_generator(m, good, default_probes<Rational>()).ok());

    auto wrong_mu = good;
    wrong_mu.f = Driver<Rational>::affine(Q(0), Q(1, 2));
    wrong_mu.mu = Q(0);
    const auto r = validate_generator(m, wrong_mu, default_probes<Rational>());
    CHECK_FALSE(r.monotone);
    CHECK_FALSE(r.problems.empty());

    auto stiff = good;
    stiff.mu = Q(1);
    CHECK_FALSE(validate_generator(m, stiff, default_probes<Rational>()).step_size_ok);

    auto cubic = GeneratorSpec<double>::make(m, std::vector<double>(4, 0.0), Driver<double>::monotone_cubic(2.0), 0.0);
    CHECK(validate_generator(m, cubic, default_probes<double>()).ok());
}

TEST_CASE("float mode agrees with rational mode") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto p = testing_support::random_problem(seed, 3);
        const auto exact = solve_double_reflected(p.model, p.gen, p.lower, p.upper);
        auto to_d = [](const AdaptedProcess<Rational>& x) {
            std::vector<double> v;
            for (const auto& e : x.values()) v.push_back(to_double(e));
            return AdaptedProcess<double>(std::move(v));
        };
        GeneratorSpec<double> g;
        for (const auto& x : p.gen.xi) g.xi.push_back(to_double(x));
        g.f = p.gen.f.form() == DriverForm::zero
                  ? Driver<double>::zero()
                  : Driver<double>::affine(to_double(p.gen.f.intercept()), to_double(p.gen.f.slope()));
        g.mu = to_double(p.gen.mu);
        std::vector<double> v;
        for (const auto& e : p.gen.v.values()) v.push_back(to_double(e));
        g.v = PredictableIncrements<double>(std::move(v));
        const auto approx = solve_double_reflected(p.model, g, to_d(p.lower), to_d(p.upper));
        for (NodeId n = 0; n < p.model.node_count(); ++n) CHECK(std::abs(approx.y[n] - to_double(exact.y[n])) <= 1e-12);
        CHECK(verify_solution(p.model, g, Barriers<double>::both(to_d(p.lower), to_d(p.upper)), approx, 1e-10).passed());
    }
}
