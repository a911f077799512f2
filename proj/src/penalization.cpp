#include "reflectlab/penalization.hpp"

#include "reflectlab/errors.hpp"
#include "reflectlab/processes.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace reflectlab {

void PenaltyGrid::validate() const {
    for (const auto* list : {&ns, &ms}) {
        if (list->empty()) throw DomainError("penalty grid lists must not be empty");
        for (std::size_t i = 0; i < list->size(); ++i) {
            if ((*list)[i] < 0) throw DomainError("penalty levels must be nonnegative");
            if (i > 0 && (*list)[i] <= (*list)[i - 1]) throw DomainError("penalty levels must be strictly increasing");
        }
    }
}

PenaltyGrid PenaltyGrid::powers_of_two(unsigned k) {
    PenaltyGrid g;
    for (unsigned i = 0; i <= k; ++i) {
        g.ns.push_back(1L << i);
        g.ms.push_back(1L << i);
    }
    return g;
}

namespace {

template <class Num>
GeneratorSpec<Num> with_driver(const GeneratorSpec<Num>& gen, Driver<Num> f) {
    GeneratorSpec<Num> out = gen;
    out.f = std::move(f);
    return out;
}

template <class Num>
Driver<Num> penalized_driver(const Driver<Num>& f, const AdaptedProcess<Num>* lower, long n,
                             const AdaptedProcess<Num>* upper, long m) {
    Driver<Num> out = f;
    if (lower && n > 0) out = out.with_lower_penalty(*lower, Num(n));
    if (upper && m > 0) out = out.with_upper_penalty(*upper, Num(m));
    return out;
}

template <class Num>
Num max_gap(const AdaptedProcess<Num>& a, const AdaptedProcess<Num>& b) {
    Num worst(0);
    for (std::size_t i = 0; i < a.size(); ++i) worst = max_of(worst, abs_value(Num(a[i] - b[i])));
    return worst;
}

template <class Num>
class OrderChecker {
  public:
    OrderChecker(const TreeModel& model, const Num& tol, std::vector<OrderViolation<Num>>& out)
        : model_(model), tol_(tol), out_(out) {}

    /// Records every node where a > b.
    void expect_le(const AdaptedProcess<Num>& a, const AdaptedProcess<Num>& b, const std::string& check, long n,
                   long m) {
        for (NodeId v = 0; v < model_.node_count(); ++v) {
            if (a[v] <= b[v]) continue;
            const Num amount = a[v] - b[v];
            out_.push_back({check, model_.address(v), n, m, amount, amount <= tol_});
        }
    }

  private:
    const TreeModel& model_;
    Num tol_;
    std::vector<OrderViolation<Num>>& out_;
};

template <class Num>
void mark_rows(std::vector<ConvergenceRow<Num>>& rows, const std::vector<OrderViolation<Num>>& violations) {
    for (auto& row : rows) {
        row.monotone_ok = std::none_of(violations.begin(), violations.end(), [&](const OrderViolation<Num>& v) {
            return !v.warning && v.n == row.n && v.m == row.m;
        });
    }
}

}  // namespace

template <class Num>
PenalizedSolution<Num> solve_penalized(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                       const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper, long n,
                                       long m) {
    if (n < 0 || m < 0) throw DomainError("penalty levels must be nonnegative");
    require_bound(model, lower, "lower barrier");
    require_bound(model, upper, "upper barrier");
    auto sol = solve_bsde(model, with_driver(gen, penalized_driver(gen.f, &lower, n, &upper, m)));
    return {std::move(sol.y), std::move(sol.m)};
}

template <class Num>
RbsdeSolution<Num> solve_half_penalized_upper(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                              const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                              long n) {
    if (n < 0) throw DomainError("penalty levels must be nonnegative");
    require_bound(model, lower, "lower barrier");
    return solve_upper_reflected(model, with_driver(gen, penalized_driver<Num>(gen.f, &lower, n, nullptr, 0)), upper);
}

template <class Num>
RbsdeSolution<Num> solve_half_penalized_lower(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                              const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                              long m) {
    if (m < 0) throw DomainError("penalty levels must be nonnegative");
    require_bound(model, upper, "upper barrier");
    return solve_lower_reflected(model, with_driver(gen, penalized_driver<Num>(gen.f, nullptr, 0, &upper, m)), lower);
}

template <class Num>
bool ConvergenceTable<Num>::passed() const {
    return failures() == 0;
}

template <class Num>
std::size_t ConvergenceTable<Num>::failures() const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [](const auto& v) { return !v.warning; }));
}

template <class Num>
std::size_t ConvergenceTable<Num>::warnings() const {
    return violations.size() - failures();
}

template <class Num>
ConvergenceTable<Num> one_barrier_penalization_sweep(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                                     const AdaptedProcess<Num>& lower, const std::vector<long>& ns,
                                                     const Num& tol) {
    PenaltyGrid{ns, {0}}.validate();
    const auto reflected = solve_lower_reflected(model, gen, lower).y;
    ConvergenceTable<Num> table;
    OrderChecker<Num> check(model, tol, table.violations);
    std::optional<AdaptedProcess<Num>> previous;
    std::optional<AdaptedProcess<Num>> previous_gap;
    for (long n : ns) {
        auto y = solve_bsde(model, with_driver(gen, penalized_driver<Num>(gen.f, &lower, n, nullptr, 0))).y;
        AdaptedProcess<Num> gap(model.node_count(), Num(0));
        for (NodeId v = 0; v < model.node_count(); ++v) gap[v] = abs_value(Num(reflected[v] - y[v]));
        check.expect_le(y, reflected, "below_reflected", n, -1);
        if (previous) {
            check.expect_le(*previous, y, "increasing_in_n", n, -1);
            check.expect_le(gap, *previous_gap, "gap_nonincreasing", n, -1);
        }
        table.rows.push_back({n, -1, y[model.root()], max_gap(y, reflected), true});
        previous = std::move(y);
        previous_gap = std::move(gap);
    }
    mark_rows(table.rows, table.violations);
    return table;
}

template <class Num>
ConvergenceTable<Num> double_penalization_sweep(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                                const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                                const PenaltyGrid& grid, const Num& tol) {
    grid.validate();
    const auto oracle = solve_double_reflected(model, gen, lower, upper).y;
    ConvergenceTable<Num> table;
    OrderChecker<Num> check(model, tol, table.violations);

    std::vector<AdaptedProcess<Num>> upper_half, lower_half;
    for (std::size_t i = 0; i < grid.ns.size(); ++i) {
        const long n = grid.ns[i];
        upper_half.push_back(solve_half_penalized_upper(model, gen, lower, upper, n).y);
        check.expect_le(upper_half.back(), upper, "half_upper_below_U", n, -1);
        check.expect_le(upper_half.back(), oracle, "half_upper_below_solution", n, -1);
        if (i > 0) check.expect_le(upper_half[i - 1], upper_half[i], "half_upper_increasing", n, -1);
    }
    for (std::size_t j = 0; j < grid.ms.size(); ++j) {
        const long m = grid.ms[j];
        lower_half.push_back(solve_half_penalized_lower(model, gen, lower, upper, m).y);
        check.expect_le(lower, lower_half.back(), "half_lower_above_L", -1, m);
        check.expect_le(oracle, lower_half.back(), "half_lower_above_solution", -1, m);
        if (j > 0) check.expect_le(lower_half[j], lower_half[j - 1], "half_lower_decreasing", -1, m);
    }

    std::vector<std::vector<AdaptedProcess<Num>>> cells(grid.ns.size());
    for (std::size_t i = 0; i < grid.ns.size(); ++i) {
        const long n = grid.ns[i];
        for (std::size_t j = 0; j < grid.ms.size(); ++j) {
            const long m = grid.ms[j];
            auto y = solve_penalized(model, gen, lower, upper, n, m).y;
            check.expect_le(upper_half[i], y, "sandwich_lower", n, m);
            check.expect_le(y, lower_half[j], "sandwich_upper", n, m);
            if (i > 0) check.expect_le(cells[i - 1][j], y, "increasing_in_n", n, m);
            if (j > 0) check.expect_le(y, cells[i][j - 1], "decreasing_in_m", n, m);
            table.rows.push_back({n, m, y[model.root()], max_gap(y, oracle), true});
            cells[i].push_back(std::move(y));
        }
    }
    mark_rows(table.rows, table.violations);
    return table;
}

template <class Num>
DiagonalReport<Num> diagonal_convergence(const TreeModel& model, const GeneratorSpec<Num>& gen,
                                         const AdaptedProcess<Num>& lower, const AdaptedProcess<Num>& upper,
                                         const Num& target, long cap) {
    const auto oracle = solve_double_reflected(model, gen, lower, upper).y;
    DiagonalReport<Num> report;
    for (long n = 1; n <= cap; n *= 2) {
        const auto y = solve_penalized(model, gen, lower, upper, n, n).y;
        const Num gap = max_gap(y, oracle);
        const bool step_ok = report.rows.empty() || gap <= report.rows.back().max_gap;
        report.nonincreasing = report.nonincreasing && step_ok;
        report.rows.push_back({n, n, y[model.root()], gap, step_ok});
        report.final_n = n;
        if (gap < target) {
            report.converged = true;
            break;
        }
    }
    return report;
}

template <class Num>
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow<Num>>& rows) {
    out << "n,m,y0,max_gap,monotone_ok\n";
    for (const auto& r : rows) {
        out << r.n << ',' << (r.m >= 0 ? std::to_string(r.m) : std::string()) << ',' << to_string(r.y0) << ','
            << to_string(r.max_gap) << ',' << (r.monotone_ok ? "true" : "false") << '\n';
    }
}

template <class Num>
void write_violations_csv(std::ostream& out, const std::vector<OrderViolation<Num>>& violations) {
    out << "check,level,index,n,m,amount,severity\n";
    for (const auto& v : violations) {
        out << v.check << ',' << v.node.level << ',' << v.node.index << ',' << (v.n >= 0 ? std::to_string(v.n) : "")
            << ',' << (v.m >= 0 ? std::to_string(v.m) : "") << ',' << to_string(v.amount) << ','
            << (v.warning ? "warning" : "failure") << '\n';
    }
}

#define REFLECTLAB_INSTANTIATE(Num)                                                                                  \
    template struct ConvergenceTable<Num>;                                                                           \
    template PenalizedSolution<Num> solve_penalized<Num>(const TreeModel&, const GeneratorSpec<Num>&,                \
                                                         const AdaptedProcess<Num>&, const AdaptedProcess<Num>&, long, \
                                                         long);                                                      \
    template RbsdeSolution<Num> solve_half_penalized_upper<Num>(const TreeModel&, const GeneratorSpec<Num>&,         \
                                                                const AdaptedProcess<Num>&,                          \
                                                                const AdaptedProcess<Num>&, long);                   \
    template RbsdeSolution<Num> solve_half_penalized_lower<Num>(const TreeModel&, const GeneratorSpec<Num>&,         \
                                                                const AdaptedProcess<Num>&,                          \
                                                                const AdaptedProcess<Num>&, long);                   \
    template ConvergenceTable<Num> one_barrier_penalization_sweep<Num>(                                              \
        const TreeModel&, const GeneratorSpec<Num>&, const AdaptedProcess<Num>&, const std::vector<long>&,           \
        const Num&);                                                                                                 \
    template ConvergenceTable<Num> double_penalization_sweep<Num>(const TreeModel&, const GeneratorSpec<Num>&,       \
                                                                  const AdaptedProcess<Num>&,                        \
                                                                  const AdaptedProcess<Num>&, const PenaltyGrid&,    \
                                                                  const Num&);                                       \
    template DiagonalReport<Num> diagonal_convergence<Num>(const TreeModel&, const GeneratorSpec<Num>&,              \
                                                           const AdaptedProcess<Num>&, const AdaptedProcess<Num>&,   \
                                                           const Num&, long);                                        \
    template void write_convergence_csv<Num>(std::ostream&, const std::vector<ConvergenceRow<Num>>&);                \
    template void write_violations_csv<Num>(std::ostream&, const std::vector<OrderViolation<Num>>&);

REFLECTLAB_INSTANTIATE(Rational)
REFLECTLAB_INSTANTIATE(double)
#undef REFLECTLAB_INSTANTIATE

}  // namespace reflectlab
