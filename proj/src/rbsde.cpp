#include "reflectlab/rbsde.hpp"

#include "reflectlab/errors.hpp"
#include "reflectlab/processes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace reflectlab {

template <class Num>
GeneratorSpec<Num> GeneratorSpec<Num>::make(const TreeModel& model, std::vector<Num> xi, Driver<Num> f, Num mu) {
    GeneratorSpec g;
    g.xi = std::move(xi);
    g.f = std::move(f);
    g.mu = std::move(mu);
    g.v = PredictableIncrements<Num>(model.node_count(), Num(0));
    return g;
}

template <class Num>
void check_problem(const TreeModel& model, const GeneratorSpec<Num>& gen, const Barriers<Num>& barriers) {
    if (gen.xi.size() != model.leaf_count()) {
        throw ModelError("terminal condition has " + std::to_string(gen.xi.size()) + " values, model has " +
                         std::to_string(model.leaf_count()) + " leaves");
    }
    require_bound(model, gen.v, "driver increments V");
    if (barriers.lower) require_bound(model, *barriers.lower, "lower barrier");
    if (barriers.upper) require_bound(model, *barriers.upper, "upper barrier");
    for (std::size_t l = 0; l < model.depth(); ++l) {
        const Num product = gen.mu * model.step_as<Num>(l);
        if (!(product < Num(1))) {
            throw StepSizeError("mu * dt = " + to_string(product) + " >= 1 at level " + std::to_string(l));
        }
    }
    if (barriers.lower && barriers.upper) {
        for (NodeId v = 0; v < model.node_count(); ++v) {
            if ((*barriers.upper)[v] < (*barriers.lower)[v]) {
                throw DomainError("barriers cross at node " + to_string(model.address(v)) + ": L > U");
            }
        }
    }
    for (std::size_t k = 0; k < model.leaf_count(); ++k) {
        const NodeId leaf = model.leaf(k);
        if (barriers.lower && gen.xi[k] < (*barriers.lower)[leaf]) {
            throw DomainError("terminal value below the lower barrier at leaf " + to_string(model.address(leaf)));
        }
        if (barriers.upper && (*barriers.upper)[leaf] < gen.xi[k]) {
            throw DomainError("terminal value above the upper barrier at leaf " + to_string(model.address(leaf)));
        }
    }
}

template <class Num>
RbsdeSolution<Num> solve_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen, const Barriers<Num>& barriers,
                                   SweepOptions options) {
    check_problem(model, gen, barriers);
    const std::size_t count = model.node_count();
    RbsdeSolution<Num> sol{AdaptedProcess<Num>(count, Num(0)), PredictableIncrements<Num>(count, Num(0)),
                           PredictableIncrements<Num>(count, Num(0)), MartingaleIncrements<Num>(count, Num(0))};
    for (std::size_t k = 0; k < model.leaf_count(); ++k) sol.y[model.leaf(k)] = gen.xi[k];

    std::mt19937_64 rng(options.sweep_seed);
    for (std::size_t l = model.depth(); l-- > 0;) {
        std::vector<NodeId> order(model.level_size(l));
        std::iota(order.begin(), order.end(), model.level_begin(l));
        if (options.sweep_seed != 0) std::shuffle(order.begin(), order.end(), rng);
        const Num dt = model.step_as<Num>(l);
        for (NodeId v : order) {
            const Num mean = expectation_over_children(model, sol.y, v);
            const Num c = mean + gen.v.at(v);
            // g(y) = y - f(v, y) dt is strictly increasing, so Ỹ < L iff g(L) > c.
            if (barriers.lower && step_map(gen.f, v, dt, (*barriers.lower)[v]) > c) {
                const Num& low = (*barriers.lower)[v];
                sol.y[v] = low;
                sol.k.at(v) = positive_part(Num(step_map(gen.f, v, dt, low) - c));
            } else if (barriers.upper && step_map(gen.f, v, dt, (*barriers.upper)[v]) < c) {
                const Num& up = (*barriers.upper)[v];
                sol.y[v] = up;
                sol.a.at(v) = positive_part(Num(c - step_map(gen.f, v, dt, up)));
            } else {
                Num y = implicit_step(c, gen.f, v, dt, gen.mu);
                if constexpr (!is_exact_v<Num>) {
                    if (barriers.lower) y = max_of(y, (*barriers.lower)[v]);
                    if (barriers.upper) y = min_of(y, (*barriers.upper)[v]);
                }
                sol.y[v] = y;
            }
            for (NodeId ch : model.children(v)) sol.m.into(ch) = sol.y[ch] - mean;
        }
    }
    return sol;
}

template <class Num>
RbsdeSolution<Num> solve_bsde(const TreeModel& model, const GeneratorSpec<Num>& gen, SweepOptions options) {
    return solve_reflected(model, gen, Barriers<Num>::none(), options);
}

template <class Num>
RbsdeSolution<Num> solve_lower_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                         const AdaptedProcess<Num>& lower, SweepOptions options) {
    return solve_reflected(model, gen, Barriers<Num>::lower_only(lower), options);
}

template <class Num>
RbsdeSolution<Num> solve_upper_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                         const AdaptedProcess<Num>& upper, SweepOptions options) {
    return solve_reflected(model, gen, Barriers<Num>::upper_only(upper), options);
}

template <class Num>
RbsdeSolution<Num> solve_double_reflected(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                          const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                          SweepOptions options) {
    return solve_reflected(model, gen, Barriers<Num>::both(lower, upper), options);
}

// ---------------------------------------------------------------------------
// Verification

namespace {

template <class Num>
struct Tracker {
    Residual<Num> r;

    explicit Tracker(std::string name) { r.name = std::move(name); }

    void see(const Num& value, const TreeModel& model, NodeId node) {
        if (!r.worst || value > r.value) {
            r.value = value;
            r.worst = model.address(node);
        }
    }
};

}  // namespace

template <class Num>
bool ResidualReport<Num>::passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const Residual<Num>& r) { return r.ok; });
}

template <class Num>
const Residual<Num>& ResidualReport<Num>::operator[](const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return e;
    }
    throw DomainError("no residual named '" + name + "'");
}

template <class Num>
ResidualReport<Num> verify_solution(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                    const Barriers<Num>& barriers, const RbsdeSolution<Num>& sol, const Num& tol) {
    require_bound(model, sol.y, "solution Y");
    require_bound(model, sol.k, "solution K");
    require_bound(model, sol.a, "solution A");
    require_bound(model, sol.m, "solution M");
    if (gen.xi.size() != model.leaf_count()) throw ModelError("terminal condition does not match the leaf count");
    require_bound(model, gen.v, "driver increments V");

    Tracker<Num> terminal{"terminal"}, dynamics{"dynamics"}, lower{"lower_barrier"}, upper{"upper_barrier"},
        flat_lower{"flat_off_lower"}, flat_upper{"flat_off_upper"}, double_push{"double_push"},
        mean{"martingale_mean"}, sign{"increment_sign"}, predictable{"predictability"};

    mean.see(abs_value(sol.m.into(0)), model, 0);
    for (std::size_t k = 0; k < model.leaf_count(); ++k) {
        const NodeId leaf = model.leaf(k);
        terminal.see(abs_value(Num(sol.y[leaf] - gen.xi[k])), model, leaf);
    }
    for (NodeId v = 0; v < model.node_count(); ++v) {
        const Num& y = sol.y[v];
        if (barriers.lower) lower.see(positive_part(Num((*barriers.lower)[v] - y)), model, v);
        if (barriers.upper) upper.see(positive_part(Num(y - (*barriers.upper)[v])), model, v);
        if (model.is_leaf(v)) {
            predictable.see(max_of(abs_value(sol.k.at(v)), abs_value(sol.a.at(v))), model, v);
            continue;
        }
        const Num dk = sol.k.at(v);
        const Num da = sol.a.at(v);
        sign.see(max_of(positive_part(Num(-dk)), positive_part(Num(-da))), model, v);
        // One-sided problems carry no reflection on the missing side.
        if (!barriers.lower) flat_lower.see(abs_value(dk), model, v);
        if (!barriers.upper) flat_upper.see(abs_value(da), model, v);
        if (barriers.lower) flat_lower.see(abs_value(Num((y - (*barriers.lower)[v]) * dk)), model, v);
        if (barriers.upper) flat_upper.see(abs_value(Num(((*barriers.upper)[v] - y) * da)), model, v);
        const bool separated =
            !(barriers.lower && barriers.upper) || (*barriers.lower)[v] < (*barriers.upper)[v];
        if (separated) double_push.see(abs_value(Num(dk * da)), model, v);

        const Num dt = model.step_as<Num>(model.level_of(v));
        const Num drift = gen.f(v, y) * dt + gen.v.at(v) + dk - da;
        Num m_mean(0);
        for (NodeId c : model.children(v)) {
            dynamics.see(abs_value(Num(y - (sol.y[c] + drift - sol.m.into(c)))), model, c);
            m_mean += model.edge_probability_as<Num>(c) * sol.m.into(c);
        }
        mean.see(abs_value(m_mean), model, v);
    }

    ResidualReport<Num> report;
    report.tol = tol;
    for (auto* t : {&terminal, &dynamics, &lower, &upper, &flat_lower, &flat_upper, &double_push, &mean, &sign,
                    &predictable}) {
        t->r.ok = !(t->r.value > tol);
        report.entries.push_back(t->r);
    }
    return report;
}

template <class Num>
void write_report(std::ostream& out, const ResidualReport<Num>& report) {
    for (const auto& e : report.entries) {
        out << "residual " << e.name << " value=" << to_string(e.value)
            << " worst=" << (e.worst ? to_string(*e.worst) : std::string("-")) << " status=" << (e.ok ? "ok" : "FAIL")
            << '\n';
    }
    out << "verdict " << (report.passed() ? "pass" : "FAIL") << " tol=" << to_string(report.tol) << '\n';
}

template <class Num>
void write_solution_nodes_csv(std::ostream& out, const TreeModel& model, const RbsdeSolution<Num>& sol,
                              const Barriers<Num>& barriers) {
    out << "level,index,y,lower,upper\n";
    for (NodeId v = 0; v < model.node_count(); ++v) {
        const auto a = model.address(v);
        out << a.level << ',' << a.index << ',' << to_string(sol.y[v]) << ','
            << (barriers.lower ? to_string((*barriers.lower)[v]) : std::string("-inf")) << ','
            << (barriers.upper ? to_string((*barriers.upper)[v]) : std::string("inf")) << '\n';
    }
}

template <class Num>
void write_solution_edges_csv(std::ostream& out, const TreeModel& model, const RbsdeSolution<Num>& sol,
                              const GeneratorSpec<Num>& gen) {
    out << "parent_level,parent_index,child_index,dK,dA,dM,dV\n";
    for (NodeId c = 1; c < model.node_count(); ++c) {
        const NodeId p = model.parent_or_self(c);
        const auto pa = model.address(p);
        out << pa.level << ',' << pa.index << ',' << model.address(c).index << ',' << to_string(sol.k.at(p)) << ','
            << to_string(sol.a.at(p)) << ',' << to_string(sol.m.into(c)) << ',' << to_string(gen.v.at(p)) << '\n';
    }
}

template <class Num>
std::vector<Num> default_probes() {
    std::vector<Num> probes;
    for (int i = -16; i <= 16; ++i) probes.push_back(from_rational<Num>(Rational(i, 4)));
    return probes;
}

template <class Num>
GeneratorReport validate_generator(const TreeModel& model, const GeneratorSpec<Num>& gen, const std::vector<Num>& probes) {
    GeneratorReport report;
    for (std::size_t l = 0; l < model.depth(); ++l) {
        if (!(gen.mu * model.step_as<Num>(l) < Num(1))) {
            report.step_size_ok = false;
            report.problems.push_back("mu * dt >= 1 at level " + std::to_string(l));
        }
    }
    for (const Num& x : gen.xi) {
        if (!std::isfinite(to_double(x))) {
            report.finite = false;
            report.problems.push_back("non-finite terminal value");
            break;
        }
    }
    for (NodeId v = 0; v < model.node_count(); ++v) {
        if (model.is_leaf(v)) continue;
        if (!std::isfinite(to_double(gen.v.at(v)))) {
            report.finite = false;
            report.problems.push_back("non-finite V increment at " + to_string(model.address(v)));
        }
        std::vector<Num> values;
        values.reserve(probes.size());
        for (const Num& y : probes) {
            values.push_back(gen.f(v, y));
            if (!std::isfinite(to_double(values.back()))) {
                report.finite = false;
                report.problems.push_back("f not finite at node " + to_string(model.address(v)) + ", y = " + to_string(y));
            }
        }
        for (std::size_t i = 0; i < probes.size() && report.monotone; ++i) {
            for (std::size_t j = i + 1; j < probes.size(); ++j) {
                const Num dy = probes[i] - probes[j];
                const Num lhs = (values[i] - values[j]) * dy;
                Num rhs = gen.mu * dy * dy;
                if constexpr (!is_exact_v<Num>) rhs += 1e-12 * (1.0 + abs_value(lhs));
                if (lhs > rhs) {
                    report.monotone = false;
                    report.problems.push_back("monotonicity with mu = " + to_string(gen.mu) + " fails at node " +
                                              to_string(model.address(v)) + " for y = " + to_string(probes[i]) +
                                              ", " + to_string(probes[j]));
                    break;
                }
            }
        }
        // Continuity probe: the jump across a vanishing step must vanish.
        for (const Num& y : probes) {
            const double y0 = to_double(y);
            const double h = 1e-9 * (1.0 + std::abs(y0));
            const double jump = std::abs(to_double(gen.f(v, from_rational<Num>(Rational(y0 + h)))) -
                                         to_double(gen.f(v, from_rational<Num>(Rational(y0)))));
            if (jump > 1e-6 * (1.0 + std::abs(to_double(gen.f(v, y))))) {
                report.continuous = false;
                report.problems.push_back("f jumps near y = " + to_string(y) + " at node " + to_string(model.address(v)));
                break;
            }
        }
    }
    return report;
}

template <class Num>
FrozenProblem<Num> freeze_after(const TreeModel& model, const GeneratorSpec<Num>& gen, const AdaptedProcess<Num>& lower,
                                const AdaptedProcess<Num>& upper, const StoppingTime& tau) {
    if (tau.anchor() != model.root()) throw DomainError("freeze_after needs a stopping time on the whole tree");
    check_problem(model, gen, Barriers<Num>::both(lower, upper));
    FrozenProblem<Num> out{gen, lower, upper};
    std::vector<char> active(model.node_count(), 1);
    for (NodeId s : tau.stop_nodes()) {
        const auto [first, last] = model.leaf_range(s);
        const Num frozen_xi = clamp_between(lower[s], gen.xi[first], upper[s]);
        for (std::size_t k = first; k < last; ++k) out.gen.xi[k] = frozen_xi;
    }
    for (NodeId n = 0; n < model.node_count(); ++n) {
        NodeId s = n;
        while (!tau.stops_at(s) && s != model.root()) s = model.parent_or_self(s);
        if (!tau.stops_at(s)) continue;  // strictly before tau
        active[n] = 0;
        out.gen.v.at(n) = Num(0);
        out.lower[n] = lower[s];
        out.upper[n] = upper[s];
    }
    out.gen.f = gen.f.restricted_to(std::move(active));
    return out;
}

#define REFLECTLAB_INSTANTIATE(Num)                                                                                  \
    template struct GeneratorSpec<Num>;                                                                              \
    template struct ResidualReport<Num>;                                                                             \
    template void check_problem<Num>(const TreeModel&, const GeneratorSpec<Num>&, const Barriers<Num>&);             \
    template RbsdeSolution<Num> solve_reflected<Num>(const TreeModel&, const GeneratorSpec<Num>&,                    \
                                                     const Barriers<Num>&, SweepOptions);                            \
    template RbsdeSolution<Num> solve_bsde<Num>(const TreeModel&, const GeneratorSpec<Num>&, SweepOptions);          \
    template RbsdeSolution<Num> solve_lower_reflected<Num>(const TreeModel&, const GeneratorSpec<Num>&,              \
                                                           const AdaptedProcess<Num>&, SweepOptions);                \
    template RbsdeSolution<Num> solve_upper_reflected<Num>(const TreeModel&, const GeneratorSpec<Num>&,              \
                                                           const AdaptedProcess<Num>&, SweepOptions);                \
    template RbsdeSolution<Num> solve_double_reflected<Num>(const TreeModel&, const GeneratorSpec<Num>&,             \
                                                            const AdaptedProcess<Num>&, const AdaptedProcess<Num>&,  \
                                                            SweepOptions);                                           \
    template ResidualReport<Num> verify_solution<Num>(const TreeModel&, const GeneratorSpec<Num>&,                   \
                                                      const Barriers<Num>&, const RbsdeSolution<Num>&, const Num&);  \
    template void write_report<Num>(std::ostream&, const ResidualReport<Num>&);                                      \
    template void write_solution_nodes_csv<Num>(std::ostream&, const TreeModel&, const RbsdeSolution<Num>&,          \
                                                const Barriers<Num>&);                                               \
    template void write_solution_edges_csv<Num>(std::ostream&, const TreeModel&, const RbsdeSolution<Num>&,          \
                                                const GeneratorSpec<Num>&);                                          \
    template std::vector<Num> default_probes<Num>();                                                                 \
    template FrozenProblem<Num> freeze_after<Num>(const TreeModel&, const GeneratorSpec<Num>&,                       \
                                                  const AdaptedProcess<Num>&, const AdaptedProcess<Num>&,            \
                                                  const StoppingTime&);                                                                 \
    template GeneratorReport validate_generator<Num>(const TreeModel&, const GeneratorSpec<Num>&,                    \
                                                     const std::vector<Num>&);

REFLECTLAB_INSTANTIATE(Rational)
REFLECTLAB_INSTANTIATE(double)
#undef REFLECTLAB_INSTANTIATE

}  // namespace reflectlab
