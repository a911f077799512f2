#pragma once

#include "reflectlab/rbsde.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace reflectlab {

/// Who collects when both players stop at the same time before T. The game's
/// convention is tau_wins: L_tau is paid on {tau < T, tau <= sigma}.
enum class TieRule { tau_wins, sigma_wins };

/// Whether the epsilon-hitting times may stop at their starting node
/// (inclusive, s >= t) or only strictly later (strict, s > t).
enum class HitRule { inclusive, strict };

/// A game on a verified two-barrier solution. The running term of the payoff
/// is f(s, Y_s) ds + dV with Y from that solution.
template <class Num>
class GameContext {
  public:
    /// Solves the two-barrier equation and verifies it with `tol`.
    static GameContext solve(TreeModel model, GeneratorSpec<Num> gen, BarrierPair<Num> barriers, Num tol);

    /// Throws DomainError when `solution` does not pass verify_solution with `tol`.
    GameContext(TreeModel model, GeneratorSpec<Num> gen, BarrierPair<Num> barriers, RbsdeSolution<Num> solution,
                Num tol);

    const TreeModel& model() const { return model_; }
    const GeneratorSpec<Num>& gen() const { return gen_; }
    const BarrierPair<Num>& barriers() const { return barriers_; }
    const RbsdeSolution<Num>& solution() const { return solution_; }
    const Num& tol() const { return tol_; }

    /// f(node, Y_node) dt + dV decided at a non-terminal node.
    const Num& running_cost(NodeId node) const { return running_[node]; }

  private:
    TreeModel model_;
    GeneratorSpec<Num> gen_;
    BarrierPair<Num> barriers_;
    RbsdeSolution<Num> solution_;
    Num tol_;
    std::vector<Num> running_;
};

/// E(R_t(sigma, tau) | F_t) at `node`: running cost up to sigma ∧ tau, plus
/// ξ on {sigma ∧ tau = T}, L_tau on {tau < T, tau <= sigma} and U_sigma on
/// {sigma < tau}. Both stopping times must be anchored at `node`.
template <class Num>
Num payoff(const GameContext<Num>& ctx, NodeId node, const StoppingTime& sigma, const StoppingTime& tau,
           TieRule ties = TieRule::tau_wins);

inline constexpr std::size_t default_pair_budget = 1'000'000;

/// sigma minimizes, tau maximizes.
template <class Num>
struct GameValues {
    Num lower;  // max_tau min_sigma
    Num upper;  // min_sigma max_tau
    StoppingTime maximin_sigma;
    StoppingTime maximin_tau;
    StoppingTime minimax_sigma;
    StoppingTime minimax_tau;
    std::size_t strategies = 0;
};

/// Exact values over all stopping-time pairs anchored at `node`. Throws
/// EnumerationOverflow when the number of pairs exceeds `pair_budget`.
template <class Num>
GameValues<Num> game_values_bruteforce(const GameContext<Num>& ctx, NodeId node,
                                       std::size_t pair_budget = default_pair_budget,
                                       TieRule ties = TieRule::tau_wins);

/// First s (>= t or > t by rule) with Y_s >= U_s - eps, capped at T.
template <class Num>
StoppingTime epsilon_sigma(const GameContext<Num>& ctx, NodeId node, const Num& eps,
                           HitRule rule = HitRule::inclusive);

/// First s (>= t or > t by rule) with Y_s <= L_s + eps, capped at T.
template <class Num>
StoppingTime epsilon_tau(const GameContext<Num>& ctx, NodeId node, const Num& eps,
                         HitRule rule = HitRule::inclusive);

/// For every tau: E R(sigma^eps, tau) <= Y_t + eps, and for every sigma:
/// E R(sigma, tau^eps) >= Y_t - eps. Margins are
///   sigma side: Y_t - max_tau E R(sigma^eps, tau)
///   tau side:   min_sigma E R(sigma, tau^eps) - Y_t
/// and each must be >= -eps (- tol in float mode).
template <class Num>
struct SaddleCertificate {
    Num eps;
    NodeAddress node;
    Num value;
    StoppingTime sigma_eps;
    StoppingTime tau_eps;
    Num sigma_margin;
    Num tau_margin;
    StoppingTime worst_tau;    // adversary binding the sigma side
    StoppingTime worst_sigma;  // adversary binding the tau side
    std::size_t adversaries = 0;
    bool passed = false;
};

template <class Num>
SaddleCertificate<Num> saddle_check(const GameContext<Num>& ctx, NodeId node, const Num& eps,
                                    std::size_t budget = default_pair_budget, HitRule rule = HitRule::inclusive);

/// Payoffs E R(sigma, tau_n) along a path-wise nondecreasing sequence that
/// ends at its limit tau. `stabilization_index` is the first n from which
/// tau_n equals the limit; `pathwise_stabilization` is the largest per-path
/// index from which the stop node no longer changes (they coincide).
template <class Num>
struct PayoffSequenceReport {
    std::vector<Num> payoffs;
    std::size_t stabilization_index = 0;
    std::size_t pathwise_stabilization = 0;
    bool constant_after_stabilization = false;
};

/// Throws DomainError when the sequence is empty or not path-wise nondecreasing.
template <class Num>
PayoffSequenceReport<Num> payoff_convergence_check(const GameContext<Num>& ctx, NodeId node,
                                                   const StoppingTime& sigma, const std::vector<StoppingTime>& taus);

/// Structured text, one `key value` per line.
template <class Num>
void write_certificate(std::ostream& out, const TreeModel& model, const SaddleCertificate<Num>& cert);

/// Stop nodes as a space-separated `l:i` list.
std::string stopping_region(const TreeModel& model, const StoppingTime& tau);

}  // namespace reflectlab
