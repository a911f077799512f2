#include "reflectlab/separation.hpp"

#include "reflectlab/errors.hpp"
#include "reflectlab/processes.hpp"

#include <algorithm>
#include <numbers>

namespace reflectlab {

std::string to_string(SeparationKind kind) {
    switch (kind) {
        case SeparationKind::strict: return "strict";
        case SeparationKind::weak: return "weak";
        case SeparationKind::violated: return "violated";
    }
    return "unknown";
}

template <class Num>
SeparationReport check_separation(const TreeModel& model, const AdaptedProcess<Num>& lower,
                                  const AdaptedProcess<Num>& upper) {
    require_bound(model, lower, "lower barrier");
    require_bound(model, upper, "upper barrier");
    SeparationReport crossing{SeparationKind::violated, {}};
    SeparationReport touching{SeparationKind::weak, {}};
    for (NodeId v = 0; v < model.node_count(); ++v) {
        if (lower[v] > upper[v]) crossing.nodes.push_back(model.address(v));
        if (lower[v] == upper[v]) touching.nodes.push_back(model.address(v));
    }
    if (!crossing.nodes.empty()) return crossing;
    if (!touching.nodes.empty()) return touching;
    return {SeparationKind::strict, {}};
}

namespace {

template <class Num>
void require_strict(const TreeModel& model, const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper) {
    const auto report = check_separation(model, lower, upper);
    if (report.kind == SeparationKind::strict) return;
    std::string where;
    for (const auto& a : report.nodes) where += (where.empty() ? "" : " ") + to_string(a);
    throw SeparationError("barriers are not strictly separated (" + to_string(report.kind) + " at " + where + ")");
}

template <class Num>
Num probability_as(const TreeModel& model, NodeId v) {
    return from_rational<Num>(model.path_probability(v));
}

}  // namespace

template <class Num>
MidpointConstruction<Num> construct_H(const TreeModel& model, const AdaptedProcess<Num>& lower,
                                      const AdaptedProcess<Num>& upper) {
    require_strict(model, lower, upper);
    const std::size_t count = model.node_count();
    MidpointConstruction<Num> out;
    out.h = AdaptedProcess<Num>(count, Num(0));
    std::vector<std::size_t> stage(count, 0);
    const NodeId root = model.root();
    out.h[root] = (lower[root] + upper[root]) / Num(2);
    for (NodeId v = root + 1; v < count; ++v) {
        const NodeId p = model.parent_or_self(v);
        const Num& mid = out.h[p];
        if (mid > upper[v] || mid < lower[v]) {
            out.h[v] = (lower[v] + upper[v]) / Num(2);
            stage[v] = stage[p] + 1;
            out.restarts.push_back(v);
        } else {
            out.h[v] = mid;
            stage[v] = stage[p];
        }
    }

    std::size_t max_restarts = 0;
    for (std::size_t k = 0; k < model.leaf_count(); ++k) {
        const std::size_t s = stage[model.leaf(k)];
        out.stages_per_leaf.push_back(s + 1);
        max_restarts = std::max(max_restarts, s);
    }

    // tau_k stops at the k-th restart on the path, or at the leaf when the
    // path has fewer restarts.
    out.taus.push_back(StoppingTime::immediately(model, root));
    for (std::size_t k = 1; k <= max_restarts + 1; ++k) {
        std::vector<NodeId> stops;
        for (std::size_t leaf = 0; leaf < model.leaf_count(); ++leaf) {
            NodeId node = model.leaf(leaf);
            if (stage[node] >= k) {
                // Walk up to the node where the path first entered stage k.
                while (stage[model.parent_or_self(node)] >= k) node = model.parent_or_self(node);
            }
            stops.push_back(node);
        }
        std::sort(stops.begin(), stops.end());
        stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
        out.taus.emplace_back(model, root, std::move(stops), 0);
    }

    for (std::size_t k = 0; k < out.taus.size(); ++k) {
        out.stage_variation.push_back(total_variation(model, out.h, out.taus[k]).expectation());
        Num jumps(0);
        for (NodeId v : out.restarts) {
            if (stage[v] > k) continue;
            jumps += probability_as<Num>(model, v) * abs_value(Num(out.h[v] - out.h[model.parent_or_self(v)]));
        }
        out.stage_jump_sum.push_back(jumps);
    }
    return out;
}

template <class Num>
OscillatingFamily<Num> example33_barriers(std::size_t cells) {
    if (cells < 1) throw DomainError("the oscillating family needs at least one cell");
    const std::size_t N = cells;
    std::vector<Rational> times{Rational(0), Rational(1, 4)};
    for (std::size_t k = 2; k <= 2 * N + 2; ++k) times.push_back(Rational(1) - Rational(1, static_cast<long>(k)));
    times.emplace_back(1);

    Rational mass = 0;
    for (std::size_t k = 1; k <= N; ++k) mass += Rational(1, static_cast<long>(k * k));
    std::vector<Rational> root_row;
    for (std::size_t n = 1; n <= N; ++n) root_row.push_back(Rational(1, static_cast<long>(n * n)) / mass);

    std::vector<std::vector<std::vector<Rational>>> branching{{root_row}};
    for (std::size_t l = 1; l + 1 < times.size(); ++l) {
        branching.emplace_back(N, std::vector<Rational>{Rational(1)});
    }
    TreeModel model(times, branching);

    // h on [1 - 1/j, 1 - 1/(j+1)): 1/2 for odd j, -3/2 for even j; h(0) = 1/2.
    const auto h = [](const Rational& t) {
        if (t < Rational(1, 2)) return Rational(1, 2);
        const Rational gap = Rational(1) - t;  // t = 1 - 1/j exactly on the grid
        const BigInt j = boost::multiprecision::denominator(gap) / boost::multiprecision::numerator(gap);
        return j % 2 == 1 ? Rational(1, 2) : Rational(-3, 2);
    };

    OscillatingFamily<Num> fam{std::move(model), {}, {}, N, Rational(1) / mass, 6.0 / (std::numbers::pi * std::numbers::pi)};
    std::vector<Num> lo(fam.model.node_count()), up(fam.model.node_count());
    for (NodeId v = 0; v < fam.model.node_count(); ++v) {
        const std::size_t level = fam.model.level_of(v);
        const std::size_t n = level == 0 ? 1 : fam.model.address(v).index + 1;
        const Rational freeze = Rational(1) - Rational(1, static_cast<long>(n + 1));
        const Rational t = min_of(fam.model.times()[level], freeze);
        lo[v] = from_rational<Num>(h(t));
        up[v] = lo[v] + Num(1);
    }
    fam.lower = AdaptedProcess<Num>(std::move(lo));
    fam.upper = AdaptedProcess<Num>(std::move(up));
    return fam;
}

template <class Num>
Num min_variation_lower_bound(const TreeModel& model, const AdaptedProcess<Num>& lower,
                              const AdaptedProcess<Num>& upper) {
    require_bound(model, lower, "lower barrier");
    require_bound(model, upper, "upper barrier");
    Num total(0);
    for (NodeId v = model.root() + 1; v < model.node_count(); ++v) {
        const NodeId p = model.parent_or_self(v);
        if (lower[v] == lower[p]) continue;
        // Overlapping corridors let H pass the jump without moving.
        if (lower[v] <= upper[p] && lower[p] <= upper[v]) continue;
        const Num a = abs_value(Num(upper[v] - lower[p]));
        const Num b = abs_value(Num(upper[p] - lower[v]));
        total += probability_as<Num>(model, v) * min_of(a, b);
    }
    return total;
}

template <class Num>
ReflectionMassReport<Num> example38_scenario(std::size_t cells) {
    if (cells < 2) throw DomainError("the reflection-mass scenario needs at least two cells");
    ReflectionMassReport<Num> r{example33_barriers<Num>(cells)};
    const TreeModel& m = r.family.model;
    std::vector<Num> xi;
    for (std::size_t k = 0; k < m.leaf_count(); ++k) {
        const NodeId leaf = m.leaf(k);
        xi.push_back((r.family.lower[leaf] + r.family.upper[leaf]) / Num(2));
    }
    r.gen = GeneratorSpec<Num>::make(m, std::move(xi));
    r.solution = solve_double_reflected(m, r.gen, r.family.lower, r.family.upper);

    const Num c_n = from_rational<Num>(r.family.truncated_constant);
    for (std::size_t n = 1; n <= cells; ++n) {
        Num k_mass(0), a_mass(0);
        std::size_t k_pushes = 0, a_pushes = 0;
        // Each cell is a chain from level 1 to the leaf, plus the root edge.
        std::vector<NodeId> path{m.root()};
        for (NodeId v = r.family.cell_node(n);; v = m.children(v).front()) {
            path.push_back(v);
            if (m.is_leaf(v)) break;
        }
        for (NodeId v : path) {
            if (m.is_leaf(v)) continue;
            const Num& dk = r.solution.k.at(v);
            const Num& da = r.solution.a.at(v);
            k_mass += dk;
            a_mass += da;
            if (dk >= Num(1)) ++k_pushes;
            if (da >= Num(1)) ++a_pushes;
        }
        r.k_per_cell.push_back(k_mass);
        r.a_per_cell.push_back(a_mass);
        r.k_pushes_per_cell.push_back(k_pushes);
        r.a_pushes_per_cell.push_back(a_pushes);
        const Num weight = Num(1) / Num(static_cast<long>(n * n));
        r.expected_k_units += weight * k_mass;
        r.expected_a_units += weight * a_mass;
        if (n >= 2) r.bound_units += Num(static_cast<long>(n - 1)) / Num(static_cast<long>(2 * n * n));
    }
    r.expected_k = c_n * r.expected_k_units;
    r.expected_a = c_n * r.expected_a_units;
    r.bound = c_n * r.bound_units;
    return r;
}

template <class Num>
RbsdeSolution<Num> sandwich_semimartingale(const TreeModel& model, const AdaptedProcess<Num>& lower,
                                           const AdaptedProcess<Num>& upper) {
    require_strict(model, lower, upper);
    std::vector<Num> xi;
    for (std::size_t k = 0; k < model.leaf_count(); ++k) {
        const NodeId leaf = model.leaf(k);
        xi.push_back(min_of(positive_part(lower[leaf]), upper[leaf]));
    }
    return solve_double_reflected(model, GeneratorSpec<Num>::make(model, std::move(xi)), lower, upper);
}

template <class Num>
BallBound<Num> generator_ball_bound(const TreeModel& model, const std::function<Num(NodeId, const Num&)>& f,
                                    const Num& mu, const Num& r, const std::vector<Num>& probes) {
    if (!(r > Num(0))) throw DomainError("ball radius must be positive");
    BallBound<Num> out;
    const Num shift = Num(2) * positive_part(mu) * r;
    std::vector<Num> ys{-r, Num(0), r};
    for (const auto& y : probes) {
        if (abs_value(y) <= r) ys.push_back(y);
    }
    for (NodeId v = 0; v < model.node_count(); ++v) {
        if (model.is_leaf(v)) continue;
        const Num above = f(v, -r) + shift;  // f(t, y) <= f(t, -r) + 2 mu r
        const Num below = f(v, r) - shift;   // f(t, y) >= f(t, r) - 2 mu r
        out.bound = max_of(out.bound, max_of(abs_value(above), abs_value(below)));
        for (const auto& y : ys) {
            const Num value = f(v, y);
            out.sampled_sup = max_of(out.sampled_sup, abs_value(value));
            if (value > above || value < below) {
                out.violations.push_back("node " + to_string(model.address(v)) + ": f(" + to_string(y) +
                                         ") = " + to_string(value) + " outside [" + to_string(below) + ", " +
                                         to_string(above) + "]; the declared mu does not hold");
            }
        }
    }
    return out;
}

template <class Num>
BallBound<Num> generator_ball_bound(const TreeModel& model, const GeneratorSpec<Num>& gen, const Num& r,
                                    const std::vector<Num>& probes) {
    return generator_ball_bound<Num>(
        model, [&gen](NodeId v, const Num& y) { return gen.f(v, y); }, gen.mu, r, probes);
}

#define REFLECTLAB_INSTANTIATE(Num)                                                                                  \
    template SeparationReport check_separation<Num>(const TreeModel&, const AdaptedProcess<Num>&,                    \
                                                    const AdaptedProcess<Num>&);                                     \
    template MidpointConstruction<Num> construct_H<Num>(const TreeModel&, const AdaptedProcess<Num>&,                \
                                                        const AdaptedProcess<Num>&);                                 \
    template OscillatingFamily<Num> example33_barriers<Num>(std::size_t);                                            \
    template Num min_variation_lower_bound<Num>(const TreeModel&, const AdaptedProcess<Num>&,                        \
                                                const AdaptedProcess<Num>&);                                         \
    template ReflectionMassReport<Num> example38_scenario<Num>(std::size_t);                                         \
    template RbsdeSolution<Num> sandwich_semimartingale<Num>(const TreeModel&, const AdaptedProcess<Num>&,           \
                                                             const AdaptedProcess<Num>&);                            \
    template BallBound<Num> generator_ball_bound<Num>(const TreeModel&,                                              \
                                                      const std::function<Num(NodeId, const Num&)>&, const Num&,     \
                                                      const Num&, const std::vector<Num>&);                          \
    template BallBound<Num> generator_ball_bound<Num>(const TreeModel&, const GeneratorSpec<Num>&, const Num&,       \
                                                      const std::vector<Num>&);

REFLECTLAB_INSTANTIATE(Rational)
REFLECTLAB_INSTANTIATE(double)
#undef REFLECTLAB_INSTANTIATE

}  // namespace reflectlab
