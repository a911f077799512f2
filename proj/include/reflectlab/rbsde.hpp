#pragma once

#include "reflectlab/adapted.hpp"
#include "reflectlab/driver.hpp"
#include "reflectlab/filtration.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reflectlab {

/// Terminal condition, driver, monotonicity constant and finite-variation
/// increments of a (reflected) BSDE on a tree.
template <class Num>
struct GeneratorSpec {
    std::vector<Num> xi;  // one value per leaf ordinal
    Driver<Num> f = Driver<Num>::zero();
    Num mu = Num(0);
    PredictableIncrements<Num> v;

    /// ξ given per leaf, V ≡ 0.
    static GeneratorSpec make(const TreeModel& model, std::vector<Num> xi, Driver<Num> f = Driver<Num>::zero(),
                              Num mu = Num(0));
};

template <class Num>
struct BarrierPair {
    AdaptedProcess<Num> lower;
    AdaptedProcess<Num> upper;
};

/// Optional lower and upper obstacles; a missing side is ±∞.
template <class Num>
struct Barriers {
    std::optional<AdaptedProcess<Num>> lower;
    std::optional<AdaptedProcess<Num>> upper;

    static Barriers none() { return {}; }
    static Barriers lower_only(AdaptedProcess<Num> l) { return {std::move(l), std::nullopt}; }
    static Barriers upper_only(AdaptedProcess<Num> u) { return {std::nullopt, std::move(u)}; }
    static Barriers both(AdaptedProcess<Num> l, AdaptedProcess<Num> u) { return {std::move(l), std::move(u)}; }
    static Barriers both(const BarrierPair<Num>& p) { return {p.lower, p.upper}; }
};

/// (Y, K, A, M). K pushes up at the lower barrier, A pushes down at the upper
/// one; both are predictable (decided at the parent). Unused sides are zero.
template <class Num>
struct RbsdeSolution {
    AdaptedProcess<Num> y;
    PredictableIncrements<Num> k;
    PredictableIncrements<Num> a;
    MartingaleIncrements<Num> m;

    bool operator==(const RbsdeSolution&) const = default;
};

/// Backward-induction options. A nonzero sweep_seed visits the nodes of each
/// level in a seeded random order; results must not depend on it.
struct SweepOptions {
    std::uint64_t sweep_seed = 0;
};

/// Y_N = ξ; Y_t solves y = E[Y_{t+1}|F_t] + ΔV_{t+1} + f(t, y) Δt.
template <class Num>
RbsdeSolution<Num> solve_bsde(const TreeModel& model, const GeneratorSpec<Num>& gen, SweepOptions options = {});

/// Reflected from below at L: Y_t = max(Ỹ_t, L_t).
template <class Num>
RbsdeSolution<Num> solve_lower_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                         const AdaptedProcess<Num>& lower, SweepOptions options = {});

/// Reflected from above at U: Y_t = min(Ỹ_t, U_t).
template <class Num>
RbsdeSolution<Num> solve_upper_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                         const AdaptedProcess<Num>& upper, SweepOptions options = {});

/// Reflected between L and U: Y_t = median(L_t, Ỹ_t, U_t).
template <class Num>
RbsdeSolution<Num> solve_double_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                          const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                          SweepOptions options = {});

/// Shared backward induction behind the four solvers above.
template <class Num>
RbsdeSolution<Num> solve_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen, const Barriers<Num>& barriers,
                                   SweepOptions options = {});

/// Precondition checks (barrier order, terminal containment, sizes, step
/// size). Throws DomainError / ModelError / StepSizeError.
template <class Num>
void check_problem(const TreeModel& model, const GeneratorSpec<Num>& gen, const Barriers<Num>& barriers);

template <class Num>
struct Residual {
    std::string name;
    Num value = Num(0);
    std::optional<NodeAddress> worst;
    bool ok = true;
};

template <class Num>
struct ResidualReport {
    std::vector<Residual<Num>> entries;
    Num tol = Num(0);

    bool passed() const;
    const Residual<Num>& operator[](const std::string& name) const;
};

/// Residuals of the structural identities of a solution:
///   terminal        |Y_leaf - ξ|
///   dynamics        Y_t - (Y_{t+1} + f(t, Y_t) Δt + ΔV + ΔK - ΔA - ΔM), per edge
///   lower_barrier   (L - Y)^+          upper_barrier   (Y - U)^+
///   flat_off_lower  |(Y_t - L_t) ΔK_{t+1}|   flat_off_upper  |(U_t - Y_t) ΔA_{t+1}|
///   double_push     |ΔK ΔA| where L < U
///   martingale_mean |E[ΔM | F_t]| and |M_0|
///   increment_sign  negative parts of ΔK, ΔA
///   predictability  increments stored at terminal nodes (must be zero)
/// Passes iff every entry is <= tol.
template <class Num>
ResidualReport<Num> verify_solution(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                    const Barriers<Num>& barriers, const RbsdeSolution<Num>& sol, const Num& tol);

/// Structured text: one `residual <name> value=<v> worst=<l:i> status=<ok|FAIL>` line each.
template <class Num>
void write_report(std::ostream& out, const ResidualReport<Num>& report);

/// CSV outputs: nodes (`level,index,y,lower,upper`) and edges
/// (`parent_level,parent_index,child_index,dK,dA,dM,dV`).
template <class Num>
void write_solution_nodes_csv(std::ostream& out, const TreeModel& model, const RbsdeSolution<Num>& sol,
                              const Barriers<Num>& barriers);
template <class Num>
void write_solution_edges_csv(std::ostream& out, const TreeModel& model, const RbsdeSolution<Num>& sol,
                              const GeneratorSpec<Num>& gen);

/// A problem stopped at tau: beyond tau's stop nodes the driver is switched
/// off, V has no increments, L and U keep their stop-node values, and ξ is
/// constant below each stop node (the first leaf's ξ clamped into [L, U] there).
template <class Num>
struct FrozenProblem {
    GeneratorSpec<Num> gen;
    AdaptedProcess<Num> lower;
    AdaptedProcess<Num> upper;
};

template <class Num>
FrozenProblem<Num> freeze_after(const TreeModel& model, const GeneratorSpec<Num>& gen, const AdaptedProcess<Num>& lower,
                                const AdaptedProcess<Num>& upper, const StoppingTime& tau);

/// Sampled checks of the generator hypotheses on a probe grid in y:
/// monotonicity with the declared mu, finiteness, continuity (float probe),
/// and the step-size condition mu Δt < 1.
struct GeneratorReport {
    bool monotone = true;
    bool finite = true;
    bool continuous = true;
    bool step_size_ok = true;
    std::vector<std::string> problems;

    bool ok() const { return monotone && finite && continuous && step_size_ok; }
};

template <class Num>
GeneratorReport validate_generator(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                   const std::vector<Num>& probes);

/// Default probe grid: multiples of 1/4 in [-4, 4].
template <class Num>
std::vector<Num> default_probes();

}  // namespace reflectlab
