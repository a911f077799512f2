#include "doctest.h"

#include "reflectlab/dynkin.hpp"
#include "reflectlab/errors.hpp"
#include "test_support.hpp"

#include <sstream>

using namespace reflectlab;
using testing_support::constant;
using testing_support::Q;

namespace {

GameContext<Rational> clamping() {
    const TreeModel m = TreeModel::uniform_binary(1);
    return GameContext<Rational>::solve(
        m, GeneratorSpec<Rational>::make(m, {Q(0), Q(1)}),
        {constant(m, Q(0)), AdaptedProcess<Rational>(std::vector<Rational>{Q(1, 4), Q(1), Q(1)})}, Q(0));
}

GameContext<Rational> context(const testing_support::RandomProblem& p) {
    return GameContext<Rational>::solve(p.model, p.gen, {p.lower, p.upper}, Q(0));
}

}  // namespace

TEST_CASE("payoff examples") {
    testing_support::Draw d(11);
    const TreeModel m = testing_support::random_tree(d, 3, false);
    std::vector<Rational> xi;
    for (std::size_t k = 0; k < m.leaf_count(); ++k) xi.push_back(d.grid(0, 1, 8));
    const auto ctx = GameContext<Rational>::solve(m, GeneratorSpec<Rational>::make(m, xi),
                                                  {constant(m, Q(0)), constant(m, Q(1))}, Q(0));
    const NodeId node = m.node({1, 1});
    const auto T = StoppingTime::at_horizon(m, node);
    const auto now = StoppingTime::immediately(m, node);
    Rational expected = 0;
    const auto w = conditional_leaf_weights<Rational>(m, node);
    for (std::size_t i = 0; i < w.size(); ++i) expected += w[i] * xi[m.leaf_range(node).first + i];
    CHECK(payoff(ctx, node, T, T) == expected);
    CHECK(payoff(ctx, node, T, now) == 0);
    CHECK(payoff(ctx, node, now, T) == 1);
    CHECK_THROWS_AS(payoff(ctx, node, StoppingTime::at_horizon(m, m.root()), T), DomainError);
}

TEST_CASE("tie convention is part of the payoff") {
    const auto ctx = clamping();
    const TreeModel& m = ctx.model();
    const auto now = StoppingTime::immediately(m, m.root());
    CHECK(payoff(ctx, m.root(), now, now) == 0);                          // L_0
    CHECK(payoff(ctx, m.root(), now, now, TieRule::sigma_wins) == Q(1, 4));  // U_0
    const auto T = StoppingTime::at_horizon(m, m.root());
    CHECK(payoff(ctx, m.root(), T, T) == payoff(ctx, m.root(), T, T, TieRule::sigma_wins));
}

TEST_CASE("running cost uses f along the solution") {
    const TreeModel chain = TreeModel::deterministic_chain(2);
    auto gen = GeneratorSpec<Rational>::make(chain, {Q(0)}, Driver<Rational>::affine(Q(1, 2), Q(0)));
    gen.v = PredictableIncrements<Rational>(std::vector<Rational>{Q(1, 4), Q(0), Q(0)});
    const auto ctx = GameContext<Rational>::solve(chain, gen, {constant(chain, Q(-10)), constant(chain, Q(10))}, Q(0));
    const auto T = StoppingTime::at_horizon(chain, chain.root());
    CHECK(payoff(ctx, chain.root(), T, T) == Q(5, 4));
    CHECK(ctx.solution().y[0] == Q(5, 4));
}

TEST_CASE("context refuses unverified solutions") {
    const TreeModel m = TreeModel::uniform_binary(1);
    const auto gen = GeneratorSpec<Rational>::make(m, {Q(0), Q(1)});
    auto sol = solve_double_reflected(m, gen, constant(m, Q(0)), constant(m, Q(1)));
    sol.y[0] += Q(1, 1000);
    CHECK_THROWS_AS(GameContext<Rational>(m, gen, {constant(m, Q(0)), constant(m, Q(1))}, sol, Q(0)), DomainError);
}

TEST_CASE("brute-force values on the clamping scenario") {
    const auto ctx = clamping();
    const auto v = game_values_bruteforce(ctx, ctx.model().root());
    CHECK(v.lower == Q(1, 4));
    CHECK(v.upper == Q(1, 4));
    CHECK(v.minimax_sigma == StoppingTime::immediately(ctx.model(), ctx.model().root()));
    CHECK(v.strategies == 2);

    const TreeModel m = TreeModel::uniform_binary(2);
    const auto flat = GameContext<Rational>::solve(m, GeneratorSpec<Rational>::make(m, std::vector<Rational>(4, Q(3))),
                                                   {constant(m, Q(3)), constant(m, Q(3))}, Q(0));
    const auto fv = game_values_bruteforce(flat, m.root());
    CHECK(fv.lower == 3);
    CHECK(fv.upper == 3);
}

TEST_CASE("game value equals the solution at every node") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto p = testing_support::random_problem(seed, 1 + seed % 3);
        const auto ctx = context(p);
        for (NodeId v = 0; v < p.model.node_count(); ++v) {
            if (p.model.is_leaf(v)) continue;
            const auto g = game_values_bruteforce(ctx, v);
            CHECK(g.lower == ctx.solution().y[v]);
            CHECK(g.upper == ctx.solution().y[v]);
            CHECK(payoff(ctx, v, g.minimax_sigma, g.minimax_tau) == g.upper);
        }
    }
}

TEST_CASE("pair budget refuses depth 5 with the exact count") {
    const TreeModel m = TreeModel::uniform_binary(5);
    const auto ctx = GameContext<Rational>::solve(m, GeneratorSpec<Rational>::make(m, std::vector<Rational>(32, Q(0))),
                                                  {constant(m, Q(-1)), constant(m, Q(1))}, Q(0));
    try {
        game_values_bruteforce(ctx, m.root());
        FAIL("expected overflow");
    } catch (const EnumerationOverflow& e) {
        CHECK(e.count() == "210066388900");
        CHECK(std::string(e.what()).find("458330^2") != std::string::npos);
    }
    // Below the root the residual depth is 4: 677^2 pairs fit the budget.
    CHECK(count_stopping_times(m, m.node({1, 0}), 1) == 677);
}

TEST_CASE("epsilon hitting times") {
    const TreeModel m = TreeModel::uniform_binary(2);
    const auto top = GameContext<Rational>::solve(m, GeneratorSpec<Rational>::make(m, std::vector<Rational>(4, Q(1))),
                                                  {constant(m, Q(0)), constant(m, Q(1))}, Q(0));
    CHECK(epsilon_sigma(top, m.root(), Q(1, 10)) == StoppingTime::immediately(m, m.root()));
    CHECK(epsilon_sigma(top, m.root(), Q(1, 10), HitRule::strict) == StoppingTime::at_level(m, m.root(), 1));
    CHECK(epsilon_tau(top, m.root(), Q(1, 10)) == StoppingTime::at_horizon(m, m.root()));

    const auto bottom = GameContext<Rational>::solve(
        m, GeneratorSpec<Rational>::make(m, std::vector<Rational>(4, Q(0))), {constant(m, Q(0)), constant(m, Q(1))},
        Q(0));
    CHECK(epsilon_sigma(bottom, m.root(), Q(1, 10)) == StoppingTime::at_horizon(m, m.root()));
    CHECK(epsilon_tau(bottom, m.root(), Q(1, 10), HitRule::strict) == StoppingTime::at_level(m, m.root(), 1));

    const auto c = clamping();
    CHECK(epsilon_sigma(c, 0, Q(1, 10)) == StoppingTime::immediately(c.model(), 0));
    CHECK(epsilon_sigma(c, 0, Q(1, 10), HitRule::strict) == StoppingTime::at_horizon(c.model(), 0));
    CHECK_THROWS_AS(epsilon_sigma(c, 0, Q(0)), DomainError);
}

TEST_CASE("saddle certificates") {
    const auto c = clamping();
    const auto cert = saddle_check(c, 0, Q(1, 10));
    CHECK(cert.passed);
    CHECK(cert.sigma_margin >= 0);
    CHECK(cert.tau_margin >= 0);
    std::ostringstream text;
    write_certificate(text, c.model(), cert);
    CHECK(text.str().find("status ok") != std::string::npos);
    CHECK(text.str().find("sigma_eps 0:0") != std::string::npos);

    // Hitting strictly after t misses the clamp at the root: E R(T, T) = 1/2 > 1/4 + 1/10.
    const auto strict = saddle_check(c, 0, Q(1, 10), default_pair_budget, HitRule::strict);
    CHECK_FALSE(strict.passed);
    CHECK(strict.sigma_margin == Q(1, 4) - Q(1, 2));

    CHECK(saddle_check(c, 0, Q(100)).passed);

    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto p = testing_support::random_problem(seed, 1 + seed % 4);
        const auto ctx = context(p);
        for (const Rational& eps : {Q(1, 10), Q(1, 100)}) {
            const auto r = saddle_check(ctx, p.model.root(), eps);
            CHECK(r.passed);
            CHECK(r.sigma_margin >= -eps);
            CHECK(r.tau_margin >= -eps);
        }
    }
}

TEST_CASE("saddle certificates in float mode") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = testing_support::random_problem(seed, 3);
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
        const auto ctx = GameContext<double>::solve(p.model, g, {to_d(p.lower), to_d(p.upper)}, 1e-12);
        CHECK(saddle_check(ctx, p.model.root(), 0.01).passed);
        const auto values = game_values_bruteforce(ctx, p.model.root());
        CHECK(values.upper - values.lower <= 1e-12);
    }
}

TEST_CASE("payoff convergence along stationary sequences") {
    const auto p = testing_support::random_problem(3, 4, false);
    const auto ctx = context(p);
    const TreeModel& m = p.model;
    const auto all = enumerate_stopping_times(m, 0, 1'000'000);
    const auto& tau = all[all.size() / 3];
    const auto& sigma = all[all.size() / 2];
    std::vector<StoppingTime> seq;
    for (std::size_t n = 0; n <= 6; ++n) seq.push_back(truncate(m, tau, std::min<std::size_t>(n, m.depth())));
    const auto r = payoff_convergence_check(ctx, 0, sigma, seq);
    CHECK(r.constant_after_stabilization);
    CHECK(r.stabilization_index <= 4);
    CHECK(r.stabilization_index == r.pathwise_stabilization);
    CHECK(r.payoffs.back() == payoff(ctx, 0, sigma, tau));

    const std::vector<StoppingTime> same(3, tau);
    const auto flat = payoff_convergence_check(ctx, 0, sigma, same);
    CHECK(flat.stabilization_index == 0);
    CHECK(flat.payoffs[0] == flat.payoffs[2]);

    CHECK_THROWS_AS(payoff_convergence_check(ctx, 0, sigma, {StoppingTime::at_horizon(m, 0), StoppingTime::immediately(m, 0)}),
                    DomainError);
}
