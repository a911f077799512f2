#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace reflectlab {

/// One value per node, indexed by node id. Carries no binding to a model;
/// operations check the node count when they are called.
template <class Num>
class AdaptedProcess {
  public:
    AdaptedProcess() = default;
    explicit AdaptedProcess(std::vector<Num> values) : values_(std::move(values)) {}
    AdaptedProcess(std::size_t nodes, const Num& fill) : values_(nodes, fill) {}

    std::size_t size() const { return values_.size(); }
    const Num& operator[](std::size_t node) const { return values_[node]; }
    Num& operator[](std::size_t node) { return values_[node]; }
    std::span<const Num> values() const { return values_; }

    bool operator==(const AdaptedProcess&) const = default;

  private:
    std::vector<Num> values_;
};

/// Increments decided at a node and earned over the edge into each of its
/// children, so they are constant across siblings. Indexed by the deciding
/// (parent) node; entries at terminal nodes are unused and kept at zero.
template <class Num>
class PredictableIncrements {
  public:
    PredictableIncrements() = default;
    explicit PredictableIncrements(std::vector<Num> increments) : inc_(std::move(increments)) {}
    PredictableIncrements(std::size_t nodes, const Num& fill) : inc_(nodes, fill) {}

    std::size_t size() const { return inc_.size(); }
    /// Increment over (t, t+1] decided at `parent`.
    const Num& at(std::size_t parent) const { return inc_[parent]; }
    Num& at(std::size_t parent) { return inc_[parent]; }
    std::span<const Num> values() const { return inc_; }

    bool operator==(const PredictableIncrements&) const = default;

  private:
    std::vector<Num> inc_;
};

/// ΔM over the edge into each node; the root entry is M_0 = 0.
template <class Num>
class MartingaleIncrements {
  public:
    MartingaleIncrements() = default;
    explicit MartingaleIncrements(std::vector<Num> deltas) : delta_(std::move(deltas)) {}
    MartingaleIncrements(std::size_t nodes, const Num& fill) : delta_(nodes, fill) {}

    std::size_t size() const { return delta_.size(); }
    const Num& into(std::size_t node) const { return delta_[node]; }
    Num& into(std::size_t node) { return delta_[node]; }
    std::span<const Num> values() const { return delta_; }

    bool operator==(const MartingaleIncrements&) const = default;

  private:
    std::vector<Num> delta_;
};

}  // namespace reflectlab
