#pragma once

#include "reflectlab/rbsde.hpp"

#include <functional>
#include <string>
#include <vector>

namespace reflectlab {

enum class SeparationKind { strict, weak, violated };

std::string to_string(SeparationKind kind);

/// strict: L < U at every node (and so at every parent reading);
/// weak: L <= U with equality at the listed nodes;
/// violated: L > U at the listed nodes.
struct SeparationReport {
    SeparationKind kind = SeparationKind::strict;
    std::vector<NodeAddress> nodes;
};

template <class Num>
SeparationReport check_separation(const TreeModel& model, const AdaptedProcess<Num>& lower,
                                  const AdaptedProcess<Num>& upper);

/// Stationary sequence of stopping times and the midpoint process between
/// two strictly separated barriers. Starting from the root, the midpoint
/// (L + U) / 2 is frozen until it leaves the open corridor (L, U) at some
/// node, where it restarts at that node's midpoint.
template <class Num>
struct MidpointConstruction {
    AdaptedProcess<Num> h;
    /// taus[0] = 0; taus[k] is the k-th restart (or T); the last is T everywhere.
    std::vector<StoppingTime> taus;
    /// Number of stages (restarts + 1) on the path to each leaf ordinal.
    std::vector<std::size_t> stages_per_leaf;
    /// Nodes where the midpoint restarts.
    std::vector<NodeId> restarts;
    /// E|H|_{tau_k} via total_variation, and the same quantity as an explicit
    /// sum of probability-weighted midpoint jumps.
    std::vector<Num> stage_variation;
    std::vector<Num> stage_jump_sum;
};

/// Throws SeparationError unless check_separation reports strict.
template <class Num>
MidpointConstruction<Num> construct_H(const TreeModel& model, const AdaptedProcess<Num>& lower,
                                      const AdaptedProcess<Num>& upper);

/// The oscillating-barrier family truncated at N cells. The root branches at
/// t = 1/4 into cells B_1..B_N with probabilities proportional to n^-2; each
/// cell is then a deterministic chain through the times 1 - 1/k,
/// k = 2..2N+2, and T = 1. On B_n the lower barrier follows h frozen after
/// 1 - 1/(n+1), where h is 1/2 on [1 - 1/j, 1 - 1/(j+1)) for odd j and -3/2
/// for even j; U = L + 1.
template <class Num>
struct OscillatingFamily {
    TreeModel model;
    AdaptedProcess<Num> lower;
    AdaptedProcess<Num> upper;
    std::size_t cells = 0;
    /// Exact truncated constant C_N = (sum_{k<=N} k^-2)^-1, so P(B_n) = C_N n^-2.
    Rational truncated_constant;
    /// 6 / pi^2, the untruncated constant.
    double series_constant = 0;

    /// First node of cell B_n (level 1), n in 1..N.
    NodeId cell_node(std::size_t n) const { return model.node({1, n - 1}); }
};

template <class Num>
OscillatingFamily<Num> example33_barriers(std::size_t cells);

/// Expectation over paths of the sum, at nodes where L differs from its
/// parent value and the corridors [L_parent, U_parent] and [L_t, U_t] are
/// disjoint, of |U_t - L_parent| ∧ |U_parent - L_t| (the distance between the
/// two corridors). Lower bound for the expected total variation of any
/// adapted process sandwiched between L and U.
template <class Num>
Num min_variation_lower_bound(const TreeModel& model, const AdaptedProcess<Num>& lower,
                              const AdaptedProcess<Num>& upper);

/// Reflection masses of the two-barrier solution with ξ = (L_T + U_T)/2,
/// f = 0, V = 0 on the oscillating family.
template <class Num>
struct ReflectionMassReport {
    OscillatingFamily<Num> family;
    GeneratorSpec<Num> gen;
    RbsdeSolution<Num> solution;
    Num expected_k = Num(0);
    Num expected_a = Num(0);
    /// sum_{n=2}^N (n-1)/2 P(B_n).
    Num bound = Num(0);
    /// The same three quantities divided by C_N (units of the constant).
    Num expected_k_units = Num(0);
    Num expected_a_units = Num(0);
    Num bound_units = Num(0);
    /// Per cell n = 1..N (index n-1): conditional masses and the number of
    /// pushes of size >= 1 on each side.
    std::vector<Num> k_per_cell;
    std::vector<Num> a_per_cell;
    std::vector<std::size_t> k_pushes_per_cell;
    std::vector<std::size_t> a_pushes_per_cell;

    bool dominates() const { return expected_k >= bound && expected_a >= bound; }
};

template <class Num>
ReflectionMassReport<Num> example38_scenario(std::size_t cells);

/// Two-barrier solution with ξ = L_T^+ ∧ U_T, f = 0, V = 0: a semimartingale
/// between the barriers. Throws SeparationError unless strictly separated.
template <class Num>
RbsdeSolution<Num> sandwich_semimartingale(const TreeModel& model, const AdaptedProcess<Num>& lower,
                                           const AdaptedProcess<Num>& upper);

/// Bound on sup_{|y|<=r} |f(t, y)| implied by monotonicity with constant mu:
/// max over nodes of |f(t,-r) + 2 mu^+ r| ∨ |f(t,r) - 2 mu^+ r|. The probes
/// with |y| <= r are checked against the one-sided inequalities
/// f(t,r) - 2 mu^+ r <= f(t,y) <= f(t,-r) + 2 mu^+ r.
template <class Num>
struct BallBound {
    Num bound = Num(0);
    Num sampled_sup = Num(0);
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

template <class Num>
BallBound<Num> generator_ball_bound(const TreeModel& model, const std::function<Num(NodeId, const Num&)>& f,
                                    const Num& mu, const Num& r, const std::vector<Num>& probes);

template <class Num>
BallBound<Num> generator_ball_bound(const TreeModel& model, const GeneratorSpec<Num>& gen, const Num& r,
                                    const std::vector<Num>& probes);

}  // namespace reflectlab
