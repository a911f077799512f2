#include "reflectlab/dynkin.hpp"

#include "reflectlab/errors.hpp"

#include <algorithm>
#include <ostream>

namespace reflectlab {

template <class Num>
GameContext<Num> GameContext<Num>::solve(TreeModel model, GeneratorSpec<Num> gen, BarrierPair<Num> barriers,
                                         Num tol) {
    auto sol = solve_double_reflected(model, gen, barriers.lower, barriers.upper);
    return GameContext(std::move(model), std::move(gen), std::move(barriers), std::move(sol), std::move(tol));
}

template <class Num>
GameContext<Num>::GameContext(TreeModel model, GeneratorSpec<Num> gen, BarrierPair<Num> barriers,
                              RbsdeSolution<Num> solution, Num tol)
    : model_(std::move(model)),
      gen_(std::move(gen)),
      barriers_(std::move(barriers)),
      solution_(std::move(solution)),
      tol_(std::move(tol)) {
    const auto report = verify_solution(model_, gen_, Barriers<Num>::both(barriers_), solution_, tol_);
    if (!report.passed()) {
        std::string failing;
        for (const auto& e : report.entries) {
            if (!e.ok) failing += (failing.empty() ? "" : ", ") + e.name;
        }
        throw DomainError("game context needs a verified solution; failing residuals: " + failing);
    }
    running_.assign(model_.node_count(), Num(0));
    for (NodeId v = 0; v < model_.node_count(); ++v) {
        if (model_.is_leaf(v)) continue;
        const Num dt = model_.step_as<Num>(model_.level_of(v));
        running_[v] = gen_.f(v, solution_.y[v]) * dt + gen_.v.at(v);
    }
}

namespace {

/// Per-leaf ingredients of the payoff below a node. For a stop node q on
/// leaf i's path, first_tau(q, i) is the weighted payoff when tau stops
/// first (or both reach T) and first_sigma(s, i) when sigma stops first.
template <class Num>
class PayoffTable {
  public:
    PayoffTable(const GameContext<Num>& ctx, NodeId node)
        : ctx_(ctx), node_(node), first_leaf_(ctx.model().leaf_range(node).first) {
        const TreeModel& m = ctx.model();
        weights_ = conditional_leaf_weights<Num>(m, node);
        const auto [a, b] = m.leaf_range(node);
        const std::size_t top = m.level_of(node);
        for (std::size_t k = a; k < b; ++k) {
            std::vector<Num> run{Num(0)};
            const NodeId leaf = m.leaf(k);
            for (std::size_t l = top; l < m.depth(); ++l) run.push_back(run.back() + ctx.running_cost(m.ancestor_at(leaf, l)));
            running_.push_back(std::move(run));
        }
    }

    std::size_t leaves() const { return weights_.size(); }

    std::size_t level(NodeId v) const { return ctx_.model().level_of(v); }

    Num first_tau(NodeId q, std::size_t i) const {
        const TreeModel& m = ctx_.model();
        const std::size_t lq = m.level_of(q);
        const Num& award = lq < m.depth() ? ctx_.barriers().lower[q] : ctx_.gen().xi[first_leaf_ + i];
        return weights_[i] * (running_[i][lq - m.level_of(node_)] + award);
    }

    Num first_sigma(NodeId s, std::size_t i) const {
        const TreeModel& m = ctx_.model();
        return weights_[i] * (running_[i][m.level_of(s) - m.level_of(node_)] + ctx_.barriers().upper[s]);
    }

    /// Whether tau's award applies on this path.
    bool tau_collects(std::size_t ls, std::size_t lq, TieRule ties) const {
        const std::size_t T = ctx_.model().depth();
        if (ties == TieRule::tau_wins) return lq <= ls;
        return !(ls <= lq && ls < T);
    }

    std::size_t first_leaf() const { return first_leaf_; }

  private:
    const GameContext<Num>& ctx_;
    NodeId node_;
    std::size_t first_leaf_;
    std::vector<Num> weights_;
    std::vector<std::vector<Num>> running_;
};

void require_anchor(const StoppingTime& t, NodeId node, const char* who) {
    if (t.anchor() != node) throw DomainError(std::string(who) + " is not a stopping time anchored at the evaluation node");
}

/// Per strategy, per leaf below the node: (stop node, its level).
struct StopTable {
    std::vector<std::vector<NodeId>> node;
    std::vector<std::vector<std::size_t>> level;
};

StopTable tabulate(const TreeModel& m, const std::vector<StoppingTime>& all, NodeId node) {
    const auto [a, b] = m.leaf_range(node);
    StopTable t;
    for (const auto& s : all) {
        std::vector<NodeId> nodes;
        std::vector<std::size_t> levels;
        for (std::size_t k = a; k < b; ++k) {
            nodes.push_back(s.stop_node_for_leaf(m, k));
            levels.push_back(m.level_of(nodes.back()));
        }
        t.node.push_back(std::move(nodes));
        t.level.push_back(std::move(levels));
    }
    return t;
}

std::vector<StoppingTime> strategies(const TreeModel& m, NodeId node, std::size_t pair_budget, bool pairs) {
    const BigInt count = count_stopping_times(m, node, m.level_of(node));
    const BigInt total = pairs ? BigInt(count * count) : count;
    if (total > pair_budget) {
        const std::string what = pairs ? "stopping-time pair (" + count.str() + "^2)" : "stopping-time";
        throw EnumerationOverflow(total.str(), std::to_string(pair_budget), what);
    }
    return enumerate_stopping_times(m, node, m.level_of(node), static_cast<std::size_t>(count));
}

template <class Num>
StoppingTime hitting_time(const GameContext<Num>& ctx, NodeId node, HitRule rule,
                          const std::function<bool(NodeId)>& hit) {
    const TreeModel& m = ctx.model();
    std::vector<NodeId> stops;
    std::vector<NodeId> stack{node};
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        const bool eligible = rule == HitRule::inclusive || v != node;
        if (m.is_leaf(v) || (eligible && hit(v))) {
            stops.push_back(v);
            continue;
        }
        for (NodeId c : m.children(v)) stack.push_back(c);
    }
    std::sort(stops.begin(), stops.end());
    return StoppingTime(m, node, std::move(stops), m.level_of(node));
}

}  // namespace

template <class Num>
Num payoff(const GameContext<Num>& ctx, NodeId node, const StoppingTime& sigma, const StoppingTime& tau,
           TieRule ties) {
    require_anchor(sigma, node, "sigma");
    require_anchor(tau, node, "tau");
    const TreeModel& m = ctx.model();
    PayoffTable<Num> table(ctx, node);
    Num total(0);
    for (std::size_t i = 0; i < table.leaves(); ++i) {
        const NodeId s = sigma.stop_node_for_leaf(m, table.first_leaf() + i);
        const NodeId q = tau.stop_node_for_leaf(m, table.first_leaf() + i);
        total += table.tau_collects(m.level_of(s), m.level_of(q), ties) ? table.first_tau(q, i)
                                                                         : table.first_sigma(s, i);
    }
    return total;
}

template <class Num>
GameValues<Num> game_values_bruteforce(const GameContext<Num>& ctx, NodeId node, std::size_t pair_budget,
                                       TieRule ties) {
    const TreeModel& m = ctx.model();
    const auto all = strategies(m, node, pair_budget, true);
    const StopTable stops = tabulate(m, all, node);
    PayoffTable<Num> table(ctx, node);
    const std::size_t S = all.size(), P = table.leaves();

    // Weighted awards per strategy and leaf, for either player stopping first.
    std::vector<std::vector<Num>> tau_first(S), sigma_first(S);
    for (std::size_t k = 0; k < S; ++k) {
        for (std::size_t i = 0; i < P; ++i) {
            tau_first[k].push_back(table.first_tau(stops.node[k][i], i));
            sigma_first[k].push_back(table.first_sigma(stops.node[k][i], i));
        }
    }

    std::vector<std::optional<Num>> column_min(S);  // over sigma, per tau
    std::optional<Num> upper;
    std::size_t upper_sigma = 0, upper_tau = 0;
    std::vector<std::size_t> column_arg(S, 0);
    for (std::size_t s = 0; s < S; ++s) {
        std::optional<Num> row_max;
        std::size_t row_arg = 0;
        for (std::size_t t = 0; t < S; ++t) {
            Num value(0);
            for (std::size_t i = 0; i < P; ++i) {
                value += table.tau_collects(stops.level[s][i], stops.level[t][i], ties) ? tau_first[t][i]
                                                                                       : sigma_first[s][i];
            }
            if (!row_max || value > *row_max) {
                row_max = value;
                row_arg = t;
            }
            if (!column_min[t] || value < *column_min[t]) {
                column_min[t] = value;
                column_arg[t] = s;
            }
        }
        if (!upper || *row_max < *upper) {
            upper = *row_max;
            upper_sigma = s;
            upper_tau = row_arg;
        }
    }
    std::size_t lower_tau = 0;
    for (std::size_t t = 1; t < S; ++t) {
        if (*column_min[t] > *column_min[lower_tau]) lower_tau = t;
    }
    return GameValues<Num>{*column_min[lower_tau], *upper,  all[column_arg[lower_tau]], all[lower_tau],
                           all[upper_sigma],       all[upper_tau], S};
}

template <class Num>
StoppingTime epsilon_sigma(const GameContext<Num>& ctx, NodeId node, const Num& eps, HitRule rule) {
    if (!(eps > Num(0))) throw DomainError("epsilon must be positive");
    const auto& y = ctx.solution().y;
    const auto& up = ctx.barriers().upper;
    return hitting_time(ctx, node, rule, [&](NodeId v) { return y[v] >= up[v] - eps; });
}

template <class Num>
StoppingTime epsilon_tau(const GameContext<Num>& ctx, NodeId node, const Num& eps, HitRule rule) {
    if (!(eps > Num(0))) throw DomainError("epsilon must be positive");
    const auto& y = ctx.solution().y;
    const auto& low = ctx.barriers().lower;
    return hitting_time(ctx, node, rule, [&](NodeId v) { return y[v] <= low[v] + eps; });
}

template <class Num>
SaddleCertificate<Num> saddle_check(const GameContext<Num>& ctx, NodeId node, const Num& eps, std::size_t budget,
                                    HitRule rule) {
    const TreeModel& m = ctx.model();
    const auto all = strategies(m, node, budget, false);
    const Num value = ctx.solution().y[node];
    StoppingTime sigma_eps = epsilon_sigma(ctx, node, eps, rule);
    StoppingTime tau_eps = epsilon_tau(ctx, node, eps, rule);

    std::optional<Num> worst_high, worst_low;
    std::size_t arg_tau = 0, arg_sigma = 0;
    for (std::size_t k = 0; k < all.size(); ++k) {
        const Num high = payoff(ctx, node, sigma_eps, all[k]);
        if (!worst_high || high > *worst_high) {
            worst_high = high;
            arg_tau = k;
        }
        const Num low = payoff(ctx, node, all[k], tau_eps);
        if (!worst_low || low < *worst_low) {
            worst_low = low;
            arg_sigma = k;
        }
    }
    const Num sigma_margin = value - *worst_high;
    const Num tau_margin = *worst_low - value;
    const Num floor = -eps - ctx.tol();
    const bool passed = sigma_margin >= floor && tau_margin >= floor;
    return SaddleCertificate<Num>{eps,          m.address(node), value,         std::move(sigma_eps),
                                  std::move(tau_eps), sigma_margin, tau_margin, all[arg_tau],
                                  all[arg_sigma], all.size(),    passed};
}

template <class Num>
PayoffSequenceReport<Num> payoff_convergence_check(const GameContext<Num>& ctx, NodeId node,
                                                   const StoppingTime& sigma, const std::vector<StoppingTime>& taus) {
    if (taus.empty()) throw DomainError("payoff sequence needs at least one stopping time");
    const TreeModel& m = ctx.model();
    for (std::size_t k = 0; k < taus.size(); ++k) {
        require_anchor(taus[k], node, "sequence element");
        if (k > 0 && !pathwise_le(m, taus[k - 1], taus[k])) {
            throw DomainError("stopping-time sequence is not path-wise nondecreasing at index " + std::to_string(k));
        }
    }
    PayoffSequenceReport<Num> r;
    for (const auto& t : taus) r.payoffs.push_back(payoff(ctx, node, sigma, t));
    r.stabilization_index = taus.size() - 1;
    while (r.stabilization_index > 0 && taus[r.stabilization_index - 1] == taus.back()) --r.stabilization_index;

    const auto [a, b] = m.leaf_range(node);
    for (std::size_t leaf = a; leaf < b; ++leaf) {
        const NodeId final_stop = taus.back().stop_node_for_leaf(m, leaf);
        std::size_t from = taus.size() - 1;
        while (from > 0 && taus[from - 1].stop_node_for_leaf(m, leaf) == final_stop) --from;
        r.pathwise_stabilization = std::max(r.pathwise_stabilization, from);
    }
    r.constant_after_stabilization = true;
    for (std::size_t k = r.stabilization_index; k < taus.size(); ++k) {
        if (abs_value(Num(r.payoffs[k] - r.payoffs.back())) > ctx.tol()) r.constant_after_stabilization = false;
    }
    return r;
}

std::string stopping_region(const TreeModel& model, const StoppingTime& tau) {
    std::string out;
    for (NodeId v : tau.stop_nodes()) out += (out.empty() ? "" : " ") + to_string(model.address(v));
    return out;
}

template <class Num>
void write_certificate(std::ostream& out, const TreeModel& model, const SaddleCertificate<Num>& c) {
    out << "certificate node=" << to_string(c.node) << " eps=" << to_string(c.eps) << '\n'
        << "value " << to_string(c.value) << '\n'
        << "sigma_eps " << stopping_region(model, c.sigma_eps) << '\n'
        << "tau_eps " << stopping_region(model, c.tau_eps) << '\n'
        << "sigma_margin " << to_string(c.sigma_margin) << '\n'
        << "worst_tau " << stopping_region(model, c.worst_tau) << '\n'
        << "tau_margin " << to_string(c.tau_margin) << '\n'
        << "worst_sigma " << stopping_region(model, c.worst_sigma) << '\n'
        << "adversaries " << c.adversaries << '\n'
        << "status " << (c.passed ? "ok" : "FAIL") << '\n';
}

#define REFLECTLAB_INSTANTIATE(Num)                                                                                  \
    template class GameContext<Num>;                                                                                 \
    template Num payoff<Num>(const GameContext<Num>&, NodeId, const StoppingTime&, const StoppingTime&, TieRule);    \
    template GameValues<Num> game_values_bruteforce<Num>(const GameContext<Num>&, NodeId, std::size_t, TieRule);     \
    template StoppingTime epsilon_sigma<Num>(const GameContext<Num>&, NodeId, const Num&, HitRule);                  \
    template StoppingTime epsilon_tau<Num>(const GameContext<Num>&, NodeId, const Num&, HitRule);                    \
    template SaddleCertificate<Num> saddle_check<Num>(const GameContext<Num>&, NodeId, const Num&, std::size_t,      \
                                                      HitRule);                                                      \
    template PayoffSequenceReport<Num> payoff_convergence_check<Num>(const GameContext<Num>&, NodeId,                \
                                                                     const StoppingTime&,                            \
                                                                     const std::vector<StoppingTime>&);              \
    template void write_certificate<Num>(std::ostream&, const TreeModel&, const SaddleCertificate<Num>&);

REFLECTLAB_INSTANTIATE(Rational)
REFLECTLAB_INSTANTIATE(double)
#undef REFLECTLAB_INSTANTIATE

}  // namespace reflectlab
