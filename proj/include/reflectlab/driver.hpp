#pragma once

#include "reflectlab/adapted.hpp"
#include "reflectlab/filtration.hpp"
#include "reflectlab/number.hpp"

#include <functional>
#include <vector>

namespace reflectlab {

enum class DriverForm { zero, affine, monotone_cubic };

/// n (level - y)^+ for a lower term, -m (y - level)^+ for an upper term.
template <class Num>
struct PenaltyTerm {
    Num coefficient;
    std::vector<Num> level;  // per node
    bool lower = true;
};

/// Generator f(node, y) from a closed catalogue:
///
///   zero            f = 0
///   affine(a, b)    f = a + b y
///   monotone-cubic  f = a + b y - c y^3   (c >= 0)
///
/// plus any number of penalty terms n (L - y)^+ and -m (y - U)^+. The base form
/// can be switched off on a set of nodes (penalties stay on), which is how
/// drivers that vanish after a stopping time are expressed.
template <class Num>
class Driver {
  public:
    static Driver zero() { return Driver(DriverForm::zero, Num(0), Num(0), Num(0)); }
    static Driver affine(Num intercept, Num slope) {
        return Driver(DriverForm::affine, std::move(intercept), std::move(slope), Num(0));
    }
    static Driver monotone_cubic(Num cubic, Num intercept = Num(0), Num slope = Num(0));

    Driver with_lower_penalty(const AdaptedProcess<Num>& lower, const Num& n) const;
    Driver with_upper_penalty(const AdaptedProcess<Num>& upper, const Num& m) const;
    /// Base form is zero at nodes where active[node] == 0.
    Driver restricted_to(std::vector<char> active) const;

    Num operator()(NodeId node, const Num& y) const;

    /// True when y -> f(node, y) is piecewise linear, so the implicit step
    /// can be resolved in closed form.
    bool piecewise_linear() const { return form_ != DriverForm::monotone_cubic; }
    bool active_at(NodeId node) const { return active_.empty() || active_[node] != 0; }

    DriverForm form() const { return form_; }
    const Num& intercept() const { return intercept_; }
    const Num& slope() const { return slope_; }
    const Num& cubic() const { return cubic_; }
    const std::vector<PenaltyTerm<Num>>& penalties() const { return penalties_; }

  private:
    Driver(DriverForm form, Num a, Num b, Num c)
        : form_(form), intercept_(std::move(a)), slope_(std::move(b)), cubic_(std::move(c)) {}

    DriverForm form_;
    Num intercept_;
    Num slope_;
    Num cubic_;
    std::vector<char> active_;
    std::vector<PenaltyTerm<Num>> penalties_;
};

/// Solves y = c + f(t, y) dt for a generic scalar generator by bracketing and
/// bisection. Requires mu * dt < 1 (StepSizeError otherwise); throws
/// SolverError when no bracket is found.
double implicit_step(double c, const std::function<double(std::size_t, double)>& f, std::size_t t, double dt,
                     double mu);

/// y = c + f(node, y) dt for a catalogue driver: closed form for piecewise
/// linear drivers (exact in rational mode), bisection otherwise (float only).
template <class Num>
Num implicit_step(const Num& c, const Driver<Num>& f, NodeId node, const Num& dt, const Num& mu);

/// g(y) = y - f(node, y) dt, strictly increasing when mu dt < 1.
template <class Num>
Num step_map(const Driver<Num>& f, NodeId node, const Num& dt, const Num& y) {
    return y - f(node, y) * dt;
}

}  // namespace reflectlab
