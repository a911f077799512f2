#pragma once

#include "reflectlab/rbsde.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reflectlab {

/// Penalty levels n (lower side) and m (upper side); each list strictly
/// increasing and nonnegative.
struct PenaltyGrid {
    std::vector<long> ns;
    std::vector<long> ms;

    /// Throws DomainError when a list is empty, negative or not increasing.
    void validate() const;
    /// {1, 2, 4, ..., 2^k} on both sides.
    static PenaltyGrid powers_of_two(unsigned k);
};

template <class Num>
struct PenalizedSolution {
    AdaptedProcess<Num> y;
    MartingaleIncrements<Num> m;

    bool operator==(const PenalizedSolution&) const = default;
};

/// Y^{n,m}: plain BSDE with driver f + n (L - y)^+ - m (y - U)^+.
template <class Num>
PenalizedSolution<Num> solve_penalized(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                       const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper, long n,
                                       long m);

/// Ȳⁿ: reflected below U with driver f + n (L - y)^+. K is zero, A is Āⁿ.
template <class Num>
RbsdeSolution<Num> solve_half_penalized_upper(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                              const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                              long n);

/// Y̲ᵐ: reflected above L with driver f - m (y - U)^+. A is zero, K is K̲ᵐ.
template <class Num>
RbsdeSolution<Num> solve_half_penalized_lower(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                              const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                              long m);

/// A node where an expected order between two penalized solutions fails.
/// Violations no larger than the tolerance are warnings (float rounding).
template <class Num>
struct OrderViolation {
    std::string check;
    NodeAddress node;
    long n = 0;
    long m = 0;
    Num amount = Num(0);
    bool warning = false;
};

/// One line of a convergence table; m is -1 for one-barrier rows.
template <class Num>
struct ConvergenceRow {
    long n = 0;
    long m = 0;
    Num y0 = Num(0);
    Num max_gap = Num(0);
    bool monotone_ok = true;
};

template <class Num>
struct ConvergenceTable {
    std::vector<ConvergenceRow<Num>> rows;
    std::vector<OrderViolation<Num>> violations;

    /// No violation beyond tolerance.
    bool passed() const;
    std::size_t failures() const;
    std::size_t warnings() const;
};

/// Ỹⁿ for each n (plain BSDE with driver f + n (L - y)^+) against the
/// lower-reflected solution: checks Ỹⁿ increasing in n, Ỹⁿ <= Ỹ, and the
/// node-wise gap nonincreasing in n.
template <class Num>
ConvergenceTable<Num> one_barrier_penalization_sweep(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                                     const AdaptedProcess<Num>& lower, const std::vector<long>& ns,
                                                     const Num& tol);

/// All grid pairs: Y^{n,m} increasing in n and decreasing in m,
/// Ȳⁿ <= Y^{n,m} <= Y̲ᵐ, Ȳⁿ increasing and Y̲ᵐ decreasing, Ȳⁿ <= U, Y̲ᵐ >= L,
/// and Ȳⁿ <= Y <= Y̲ᵐ against the two-barrier solution Y. Row gaps are
/// max-node |Y^{n,m} - Y|.
template <class Num>
ConvergenceTable<Num> double_penalization_sweep(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                                const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                                const PenaltyGrid& grid, const Num& tol);

/// Diagonal Y^{n,n} for n = 1, 2, 4, ... until the max-node gap to the
/// two-barrier solution drops below `target` or n exceeds `cap`.
template <class Num>
struct DiagonalReport {
    std::vector<ConvergenceRow<Num>> rows;
    bool converged = false;
    bool nonincreasing = true;
    long final_n = 0;

    bool passed() const { return converged && nonincreasing; }
};

template <class Num>
DiagonalReport<Num> diagonal_convergence(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                         const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                         const Num& target, long cap = 1L << 20);

/// `n,m,y0,max_gap,monotone_ok`; m is empty on one-barrier rows.
template <class Num>
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow<Num>>& rows);

/// `check,level,index,n,m,amount,severity`.
template <class Num>
void write_violations_csv(std::ostream& out, const std::vector<OrderViolation<Num>>& violations);

}  // namespace reflectlab
