#pragma once

#include "reflectlab/filtration.hpp"
#include "reflectlab/number.hpp"
#include "reflectlab/rbsde.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reflectlab {

enum class ModelKind { uniform_binary, uniform, deterministic_chain, example33, explicit_tree, lattice };

std::string to_string(ModelKind kind);

/// [model]
///   kind   = uniform-binary | uniform | deterministic-chain | example33 | explicit | lattice
///   depth  = d            (uniform-binary, uniform; steps for deterministic-chain)
///   factor = k            (uniform)
///   cells  = N            (example33)
///   times  = t_0 ... t_N  (optional for the generated kinds; unit steps by default)
///   row.<l>.<i>     = p p ...        (explicit: children of node l:i)
///   lattice.<l>.<i> = j:p j:p ...    (lattice: transitions of lattice node l:i)
struct ModelSection {
    ModelKind kind = ModelKind::uniform_binary;
    std::size_t depth = 1;
    std::size_t factor = 2;
    std::size_t cells = 1;
    std::vector<Rational> times;
    std::vector<std::vector<std::vector<Rational>>> rows;
    std::vector<std::vector<std::vector<std::pair<std::size_t, Rational>>>> lattice;
};

/// `none`, `const c`, or `table v_0 v_1 ...` with one value per tree node in
/// id order (level by level).
struct ProcessSpec {
    enum class Kind { none, constant, table };
    Kind kind = Kind::none;
    Rational value = 0;
    std::vector<Rational> table;
};

/// [barriers]
///   family = example33   (only with model kind example33; replaces lower/upper)
///   lower  = none | const c | table ...
///   upper  = none | const c | table ...
struct BarrierSection {
    bool example33_family = false;
    ProcessSpec lower;
    ProcessSpec upper;
};

/// f from the catalogue:
///   zero | affine a b | monotone-cubic c [a b] | penalty-composite a b n m
/// where penalty-composite is a + b y + n (L - y)^+ - m (y - U)^+ with the
/// scenario's barriers.
struct DriverSpec {
    enum class Kind { zero, affine, monotone_cubic, penalty_composite };
    Kind kind = Kind::zero;
    Rational a = 0;
    Rational b = 0;
    Rational c = 0;
    Rational n = 0;
    Rational m = 0;
};

/// [generator]
///   xi = const c | table v ... (per leaf ordinal) | midpoint ((L_T + U_T) / 2)
///   f  = see DriverSpec
///   mu = declared monotonicity constant
///   v  = zero | const c (at every non-terminal node) | table ... (per node)
struct GeneratorSection {
    enum class XiKind { constant, table, midpoint };
    XiKind xi_kind = XiKind::constant;
    Rational xi_value = 0;
    std::vector<Rational> xi_table;
    DriverSpec f;
    Rational mu = 0;
    ProcessSpec v;
};

enum class RunMode { solve, penalize, separation, game, batch };

std::string to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

/// [run]
///   mode, numeric (rational | float), tol, ns, ms, eps, seed, budget,
///   batch (scenario count), depth (batch tree depth), node (l:i for games)
struct RunSection {
    RunMode mode = RunMode::solve;
    bool exact = true;
    double tol = 1e-10;
    std::vector<long> ns;
    std::vector<long> ms;
    std::vector<Rational> eps;
    std::uint64_t seed = 1;
    std::size_t budget = 1'000'000;
    std::size_t batch = 10;
    std::size_t depth = 3;
    NodeAddress node;
};

struct Scenario {
    ModelSection model;
    BarrierSection barriers;
    GeneratorSection generator;
    RunSection run;
};

/// Throws ParseError with the 1-based line and column of the offending token.
Scenario parse_scenario(std::string_view text);

/// Canonical form: fixed section and key order, rationals in lowest terms.
/// parse_scenario(serialize_scenario(s)) serializes to the same bytes.
std::string serialize_scenario(const Scenario& scenario);

/// A resolved problem. Throws ModelError / DomainError for inconsistent specs
/// (bad probability rows, table sizes, barrier order).
template <class Num>
struct Problem {
    TreeModel model;
    GeneratorSpec<Num> gen;
    Barriers<Num> barriers;
};

TreeModel build_model(const ModelSection& section);

template <class Num>
Problem<Num> build_problem(const Scenario& scenario);

/// Deterministic in the seed. Binary tree of the given depth with branch
/// probabilities in {1/4, 1/3, 1/2, 2/3, 3/4}; L in [-1/4, 1/4] and
/// U - L in [1/16, 1/4] on a 1/32 grid; ξ on a quarter point between L_T and
/// U_T; f zero or affine with |a| <= 1/8 and slope b in {-1/2, -1/4, 0}, mu = b;
/// V increments in [-1/16, 1/16] on a 1/64 grid at roughly half the scenarios.
Scenario generate_random_scenario(std::uint64_t seed, std::size_t depth);

inline constexpr std::size_t max_random_depth = 8;

}  // namespace reflectlab
