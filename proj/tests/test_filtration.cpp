#include "doctest.h"

#include "reflectlab/errors.hpp"
#include "reflectlab/filtration.hpp"
#include "reflectlab/processes.hpp"
#include "test_support.hpp"

#include <set>

using namespace reflectlab;
using testing_support::Q;

namespace {

// S(0) = 1, S(d) = 1 + S(d-1)^2 for binary trees, computed independently.
BigInt binary_count(std::size_t d) {
    BigInt s = 1;
    for (std::size_t i = 0; i < d; ++i) s = 1 + s * s;
    return s;
}

TreeModel three_children() { return TreeModel({Q(0), Q(1)}, {{{Q(1, 5), Q(3, 10), Q(1, 2)}}}); }

}  // namespace

TEST_CASE("tree construction indexes levels, parents and leaves") {
    const TreeModel m = TreeModel::uniform_binary(3);
    CHECK(m.depth() == 3);
    CHECK(m.node_count() == 15);
    CHECK(m.leaf_count() == 8);
    CHECK(m.level_size(2) == 4);
    CHECK(m.address(m.node({2, 3})) == NodeAddress{2, 3});
    CHECK(m.parent_or_self(m.root()) == m.root());
    CHECK(m.parent(m.node({2, 3})) == m.node({1, 1}));
    CHECK(m.leaf_range(m.node({1, 1})) == std::pair<std::size_t, std::size_t>{4, 8});
    CHECK(m.path_probability(m.leaf(5)) == Q(1, 8));
    CHECK(m.ancestor_at(m.leaf(5), 1) == m.node({1, 1}));
}

TEST_CASE("tree construction rejects malformed inputs") {
    CHECK_THROWS_AS(TreeModel({Q(0), Q(1)}, {{{Q(1, 2), Q(1, 3)}}}), ModelError);
    CHECK_THROWS_AS(TreeModel({Q(0), Q(1)}, {{{Q(3, 2), Q(-1, 2)}}}), ModelError);
    CHECK_THROWS_AS(TreeModel({Q(0), Q(0)}, {{{Q(1)}}}), ModelError);
    CHECK_THROWS_AS(TreeModel({Q(0), Q(1), Q(2)}, {{{Q(1)}}, {{}}}), ModelError);
    try {
        TreeModel({Q(0), Q(1), Q(2)}, {{{Q(1, 2), Q(1, 2)}}, {{Q(1)}, {Q(1, 2), Q(1, 4)}}});
        FAIL("expected ModelError");
    } catch (const ModelError& e) {
        CHECK(std::string(e.what()).find("1:1") != std::string::npos);
    }
}

TEST_CASE("conditional expectation examples") {
    const TreeModel bin = TreeModel::uniform_binary(1);
    AdaptedProcess<Rational> x(std::vector<Rational>{Q(0), Q(1), Q(3)});
    CHECK(conditional_expectation(bin, x, 0) == std::vector<Rational>{Q(2)});

    const TreeModel chain = TreeModel::deterministic_chain(1);
    CHECK(conditional_expectation(chain, AdaptedProcess<Rational>(std::vector<Rational>{Q(0), Q(7)}), 0) ==
          std::vector<Rational>{Q(7)});

    const TreeModel three = three_children();
    AdaptedProcess<Rational> y(std::vector<Rational>{Q(0), Q(0), Q(1), Q(2)});
    // 0.2*0 + 0.3*1 + 0.5*2
    CHECK(conditional_expectation(three, y, 0) == std::vector<Rational>{Q(13, 10)});

    CHECK_THROWS_AS(conditional_expectation(bin, x, 1), DomainError);
    CHECK_THROWS_AS(conditional_expectation(bin, AdaptedProcess<Rational>(2, Q(0)), 0), ModelError);
}

TEST_CASE("tower property matches the direct path sum exactly") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        testing_support::Draw d(seed);
        const TreeModel m = testing_support::random_tree(d, 1 + seed % 4);
        std::vector<Rational> leaf_values;
        AdaptedProcess<Rational> x(m.node_count(), Q(0));
        for (NodeId n = 0; n < m.node_count(); ++n) x[n] = d.grid(-3, 3, 7);
        Rational direct = 0;
        for (std::size_t k = 0; k < m.leaf_count(); ++k) direct += m.path_probability(m.leaf(k)) * x[m.leaf(k)];
        AdaptedProcess<Rational> rolled = x;
        for (std::size_t l = m.depth(); l-- > 0;) {
            const auto level_values = conditional_expectation(m, rolled, l);
            for (std::size_t i = 0; i < level_values.size(); ++i) rolled[m.level_begin(l) + i] = level_values[i];
        }
        CHECK(rolled[m.root()] == direct);
    }
}

TEST_CASE("stopping-time enumeration counts follow S(d) = 1 + S(d-1)^2") {
    for (std::size_t d = 1; d <= 4; ++d) {
        const TreeModel m = TreeModel::uniform_binary(d);
        const auto all = enumerate_stopping_times(m, 0, 1'000'000);
        CHECK(BigInt(all.size()) == binary_count(d));
        std::set<std::vector<NodeId>> distinct;
        for (const auto& tau : all) {
            CHECK_FALSE(StoppingTime::validate(m, m.root(), tau.stop_nodes(), 0).has_value());
            distinct.insert(tau.stop_nodes());
        }
        CHECK(distinct.size() == all.size());
    }
    CHECK(enumerate_stopping_times(TreeModel::uniform_binary(2), 0, 100).size() == 5);
    CHECK(enumerate_stopping_times(TreeModel::uniform_binary(4), 0, 1000).size() == 677);
    CHECK(count_stopping_times(TreeModel::uniform_binary(5), 0, 0) == 458330);
}

TEST_CASE("residual depth zero forces the stop at the leaf") {
    const TreeModel m = TreeModel::uniform_binary(3);
    const auto at_leaf = enumerate_stopping_times(m, m.leaf(3), 3, 10);
    REQUIRE(at_leaf.size() == 1);
    CHECK(at_leaf[0].stop_nodes() == std::vector<NodeId>{m.leaf(3)});
    // Floor at the horizon on the whole tree: only "stop at T".
    CHECK(enumerate_stopping_times(m, 3, 10).size() == 1);
    // Floor 1 on depth 2: S(1)^2 = 4 choices.
    CHECK(enumerate_stopping_times(TreeModel::uniform_binary(2), 1, 10).size() == 4);
}

TEST_CASE("enumeration overflow names the exact count") {
    const TreeModel m = TreeModel::uniform_binary(5);
    try {
        enumerate_stopping_times(m, 0, 458'329);
        FAIL("expected overflow");
    } catch (const EnumerationOverflow& e) {
        CHECK(e.count() == "458330");
        CHECK(std::string(e.what()).find("458330") != std::string::npos);
    }
}

TEST_CASE("stopping-time validity is enforced") {
    const TreeModel m = TreeModel::uniform_binary(2);
    // Root and a leaf on the same path.
    CHECK_THROWS_AS(StoppingTime(m, m.root(), {m.root(), m.leaf(0)}, 0), DomainError);
    // Missing the right half.
    CHECK_THROWS_AS(StoppingTime(m, m.root(), {m.node({1, 0})}, 0), DomainError);
    // Below the floor.
    CHECK_THROWS_AS(StoppingTime(m, m.root(), {m.node({1, 0}), m.node({1, 1})}, 2), DomainError);
    CHECK_NOTHROW(StoppingTime(m, m.root(), {m.node({1, 0}), m.leaf(2), m.leaf(3)}, 1));
}

TEST_CASE("stopped value examples") {
    const TreeModel m = TreeModel::uniform_binary(2);
    AdaptedProcess<Rational> level(m.node_count(), Q(0));
    for (NodeId n = 0; n < m.node_count(); ++n) level[n] = Rational(static_cast<long>(m.level_of(n)));

    const auto at_root = stopped_value(m, level, StoppingTime::immediately(m, m.root()));
    CHECK(at_root.values == std::vector<Rational>(4, Q(0)));
    const auto at_end = stopped_value(m, level, StoppingTime::at_horizon(m, m.root()));
    CHECK(at_end.expectation() == 2);

    const StoppingTime mixed(m, m.root(), {m.node({1, 0}), m.leaf(2), m.leaf(3)}, 0);
    CHECK(stopped_value(m, level, mixed).expectation() == Q(3, 2));
}

TEST_CASE("optional sampling: E[M_tau] = 0 for every enumerated tau") {
    testing_support::Draw d(7);
    const TreeModel m = testing_support::random_tree(d, 3);
    AdaptedProcess<Rational> x(m.node_count(), Q(0));
    for (NodeId n = 0; n < m.node_count(); ++n) x[n] = d.grid(-2, 2, 5);
    const auto doob = doob_decomposition(m, x);
    const auto mart = martingale_path(m, doob.martingale);
    for (const auto& tau : enumerate_stopping_times(m, 0, 100000)) {
        CHECK(stopped_value(m, mart, tau).expectation() == 0);
    }
}

TEST_CASE("truncation and path-wise order") {
    const TreeModel m = TreeModel::uniform_binary(3);
    const auto T = StoppingTime::at_horizon(m, m.root());
    const auto one = truncate(m, T, 1);
    CHECK(one == StoppingTime::at_level(m, m.root(), 1));
    CHECK(pathwise_le(m, one, T));
    CHECK_FALSE(pathwise_le(m, T, one));
}

TEST_CASE("recombining lattice expands into the canonical tree") {
    LatticeSpec lattice;
    lattice.times = {Q(0), Q(1), Q(2)};
    lattice.transitions = {{{{0, Q(1, 2)}, {1, Q(1, 2)}}},
                           {{{0, Q(1, 2)}, {1, Q(1, 2)}}, {{1, Q(1, 2)}, {2, Q(1, 2)}}}};
    const auto expanded = expand_lattice(lattice);
    CHECK(expanded.model.node_count() == 7);
    CHECK(expanded.model.leaf_count() == 4);
    CHECK(expanded.origin[expanded.model.leaf(1)] == NodeAddress{2, 1});
    CHECK(expanded.origin[expanded.model.leaf(2)] == NodeAddress{2, 1});
    CHECK(expanded.model == TreeModel::uniform_binary(2));
}
