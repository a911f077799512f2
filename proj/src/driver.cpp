#include "reflectlab/driver.hpp"

#include "reflectlab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace reflectlab {

template <class Num>
Driver<Num> Driver<Num>::monotone_cubic(Num cubic, Num intercept, Num slope) {
    if (cubic < Num(0)) throw DomainError("monotone-cubic driver needs a nonnegative cubic coefficient");
    return Driver(DriverForm::monotone_cubic, std::move(intercept), std::move(slope), std::move(cubic));
}

template <class Num>
Driver<Num> Driver<Num>::with_lower_penalty(const AdaptedProcess<Num>& lower, const Num& n) const {
    if (n < Num(0)) throw DomainError("penalty coefficient must be nonnegative");
    Driver out = *this;
    if (n > Num(0)) out.penalties_.push_back({n, std::vector<Num>(lower.values().begin(), lower.values().end()), true});
    return out;
}

template <class Num>
Driver<Num> Driver<Num>::with_upper_penalty(const AdaptedProcess<Num>& upper, const Num& m) const {
    if (m < Num(0)) throw DomainError("penalty coefficient must be nonnegative");
    Driver out = *this;
    if (m > Num(0)) out.penalties_.push_back({m, std::vector<Num>(upper.values().begin(), upper.values().end()), false});
    return out;
}

template <class Num>
Driver<Num> Driver<Num>::restricted_to(std::vector<char> active) const {
    Driver out = *this;
    out.active_ = std::move(active);
    return out;
}

template <class Num>
Num Driver<Num>::operator()(NodeId node, const Num& y) const {
    Num value(0);
    if (active_at(node)) {
        switch (form_) {
            case DriverForm::zero:
                break;
            case DriverForm::affine:
                value = intercept_ + slope_ * y;
                break;
            case DriverForm::monotone_cubic:
                value = intercept_ + slope_ * y - cubic_ * y * y * y;
                break;
        }
    }
    for (const auto& p : penalties_) {
        if (p.lower) {
            value += p.coefficient * positive_part(Num(p.level[node] - y));
        } else {
            value -= p.coefficient * positive_part(Num(y - p.level[node]));
        }
    }
    return value;
}

double implicit_step(double c, const std::function<double(std::size_t, double)>& f, std::size_t t, double dt,
                     double mu) {
    if (!(mu * dt < 1.0)) throw StepSizeError("implicit step needs mu * dt < 1, got " + to_string(mu * dt));
    auto g = [&](double y) { return y - f(t, y) * dt - c; };
    double lo = c - 1.0;
    double hi = c + 1.0;
    double width = 1.0;
    for (int i = 0; i < 2100 && !(g(lo) <= 0.0 && g(hi) >= 0.0); ++i) {
        width *= 2.0;
        lo = c - width;
        hi = c + width;
        if (!std::isfinite(lo) || !std::isfinite(hi)) break;
    }
    const double glo = g(lo);
    const double ghi = g(hi);
    if (!(glo <= 0.0 && ghi >= 0.0) || !std::isfinite(glo) || !std::isfinite(ghi)) {
        throw SolverError("implicit step: failed to bracket the root around c = " + to_string(c));
    }
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    for (int i = 0; i < 2200; ++i) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if (gm < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
}

namespace {

// Closed-form resolution of g(y) = c for g continuous, piecewise linear and
// strictly increasing.
template <class Num>
Num solve_piecewise_linear(const Num& c, const Driver<Num>& f, NodeId node, const Num& dt) {
    std::vector<Num> breaks;
    for (const auto& p : f.penalties()) breaks.push_back(p.level[node]);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    const Num base_slope = f.active_at(node) ? f.slope() : Num(0);
    auto slope_at = [&](const Num& y) {
        Num s = Num(1) - base_slope * dt;
        for (const auto& p : f.penalties()) {
            if (p.lower ? (y < p.level[node]) : (y > p.level[node])) s += p.coefficient * dt;
        }
        return s;
    };
    auto g = [&](const Num& y) { return step_map(f, node, dt, y); };
    auto linear_from = [&](const Num& anchor, const Num& representative) {
        const Num s = slope_at(representative);
        if (!(s > Num(0))) throw SolverError("implicit step: driver slope makes the step map non-increasing");
        return Num(anchor + (c - g(anchor)) / s);
    };

    if (breaks.empty()) {
        const Num s = slope_at(Num(0));
        if (!(s > Num(0))) throw SolverError("implicit step: driver slope makes the step map non-increasing");
        const Num a = f.active_at(node) ? f.intercept() : Num(0);
        return Num((c + a * dt) / s);
    }
    if (!(g(breaks.front()) < c)) return linear_from(breaks.front(), Num(breaks.front() - Num(1)));
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        if (!(g(breaks[k + 1]) < c)) {
            return linear_from(breaks[k], Num((breaks[k] + breaks[k + 1]) / Num(2)));
        }
    }
    return linear_from(breaks.back(), Num(breaks.back() + Num(1)));
}

}  // namespace

template <class Num>
Num implicit_step(const Num& c, const Driver<Num>& f, NodeId node, const Num& dt, const Num& mu) {
    if (!(mu * dt < Num(1))) {
        throw StepSizeError("implicit step needs mu * dt < 1, got " + to_string(Num(mu * dt)));
    }
    if (f.piecewise_linear()) return solve_piecewise_linear(c, f, node, dt);
    if constexpr (is_exact_v<Num>) {
        throw SolverError("monotone-cubic driver has no exact implicit step; use float mode");
    } else {
        return implicit_step(
            c, [&](std::size_t, double y) { return f(node, y); }, 0, dt, mu);
    }
}

template class Driver<Rational>;
template class Driver<double>;
template Rational implicit_step<Rational>(const Rational&, const Driver<Rational>&, NodeId, const Rational&,
                                          const Rational&);
template double implicit_step<double>(const double&, const Driver<double>&, NodeId, const double&, const double&);

}  // namespace reflectlab
