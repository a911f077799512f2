#pragma once

#include "reflectlab/adapted.hpp"
#include "reflectlab/number.hpp"

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reflectlab {

using NodeId = std::size_t;

/// (level, index-within-level) address of a node; the external naming used by
/// scenario files and CSV output.
struct NodeAddress {
    std::size_t level = 0;
    std::size_t index = 0;

    auto operator<=>(const NodeAddress&) const = default;
};

std::string to_string(const NodeAddress& address);

/// Finite filtered probability space as a leveled, non-recombining tree.
///
/// Node ids are assigned level by level, and within a level in parent order,
/// so the children of a node and the leaves below a node are contiguous id
/// ranges. Every leaf sits at the terminal level N. The left limit X_{t-} of a
/// process at a node is read at its parent (at the root, at the root itself).
class TreeModel {
  public:
    /// branching[l][i] lists the probabilities of the children of node (l, i);
    /// children are numbered consecutively at level l + 1 in parent order.
    /// `times` has one entry per level: 0 = t_0 < t_1 < ... < t_N = T.
    TreeModel(std::vector<Rational> times, std::vector<std::vector<std::vector<Rational>>> branching);

    static TreeModel uniform(std::size_t depth, std::size_t factor);
    static TreeModel uniform_binary(std::size_t depth) { return uniform(depth, 2); }
    static TreeModel deterministic_chain(std::size_t steps) { return uniform(steps, 1); }

    std::size_t depth() const { return times_.size() - 1; }
    std::size_t node_count() const { return level_.size(); }
    std::size_t level_size(std::size_t level) const { return level_begin_[level + 1] - level_begin_[level]; }
    NodeId level_begin(std::size_t level) const { return level_begin_[level]; }
    NodeId level_end(std::size_t level) const { return level_begin_[level + 1]; }

    NodeId root() const { return 0; }
    NodeId node(const NodeAddress& address) const;
    NodeAddress address(NodeId node) const { return {level_[node], node - level_begin_[level_[node]]}; }
    std::size_t level_of(NodeId node) const { return level_[node]; }
    bool is_leaf(NodeId node) const { return level_[node] == depth(); }

    /// Parent node; the root is its own "parent" (left-limit convention).
    NodeId parent_or_self(NodeId node) const { return node == 0 ? 0 : parent_[node]; }
    std::optional<NodeId> parent(NodeId node) const;
    std::span<const NodeId> children(NodeId node) const;

    /// p(parent -> node); 1 at the root.
    const Rational& edge_probability(NodeId node) const { return edge_prob_[node]; }
    /// Product of edge probabilities from the root.
    const Rational& path_probability(NodeId node) const { return path_prob_[node]; }

    template <class Num>
    Num edge_probability_as(NodeId node) const {
        if constexpr (is_exact_v<Num>) {
            return edge_prob_[node];
        } else {
            return edge_prob_d_[node];
        }
    }

    const std::vector<Rational>& times() const { return times_; }
    template <class Num>
    Num time_as(std::size_t level) const {
        return from_rational<Num>(times_[level]);
    }
    /// t_{level+1} - t_level.
    template <class Num>
    Num step_as(std::size_t level) const {
        return from_rational<Num>(times_[level + 1] - times_[level]);
    }

    std::size_t leaf_count() const { return level_size(depth()); }
    NodeId leaf(std::size_t ordinal) const { return level_begin_[depth()] + ordinal; }
    std::size_t leaf_ordinal(NodeId leaf) const { return leaf - level_begin_[depth()]; }
    /// Half-open range of leaf ordinals below `node`.
    std::pair<std::size_t, std::size_t> leaf_range(NodeId node) const { return {leaf_first_[node], leaf_last_[node]}; }

    NodeId ancestor_at(NodeId node, std::size_t level) const;
    bool is_ancestor_or_self(NodeId ancestor, NodeId node) const;

    bool operator==(const TreeModel& other) const;

  private:
    void validate_and_index(const std::vector<std::vector<std::vector<Rational>>>& branching);

    std::vector<Rational> times_;
    std::vector<std::size_t> level_begin_;
    std::vector<std::size_t> level_;
    std::vector<NodeId> parent_;
    std::vector<std::size_t> first_child_;
    std::vector<std::size_t> child_count_;
    std::vector<NodeId> child_ids_;
    std::vector<Rational> edge_prob_;
    std::vector<double> edge_prob_d_;
    std::vector<Rational> path_prob_;
    std::vector<std::size_t> leaf_first_;
    std::vector<std::size_t> leaf_last_;
};

/// Recombining lattice: transitions[l][i] lists (target index at level l + 1,
/// probability). Expanded into the canonical non-recombining tree.
struct LatticeSpec {
    std::vector<Rational> times;
    std::vector<std::vector<std::vector<std::pair<std::size_t, Rational>>>> transitions;
};

struct ExpandedLattice {
    TreeModel model;
    /// Lattice address of every tree node.
    std::vector<NodeAddress> origin;
};

ExpandedLattice expand_lattice(const LatticeSpec& lattice);

/// A stopping time on the subtree rooted at `anchor`, represented by the
/// antichain of nodes at which it stops. Every path from the anchor to a leaf
/// meets exactly one stop node, at level >= floor_level.
class StoppingTime {
  public:
    StoppingTime(const TreeModel& model, NodeId anchor, std::vector<NodeId> stop_nodes, std::size_t floor_level);

    static StoppingTime immediately(const TreeModel& model, NodeId anchor);
    static StoppingTime at_horizon(const TreeModel& model, NodeId anchor);
    static StoppingTime at_level(const TreeModel& model, NodeId anchor, std::size_t level);

    /// Explains why the candidate is not a stopping time, or nullopt.
    static std::optional<std::string> validate(const TreeModel& model, NodeId anchor,
                                               std::span<const NodeId> stop_nodes, std::size_t floor_level);

    NodeId anchor() const { return anchor_; }
    std::size_t floor_level() const { return floor_level_; }
    const std::vector<NodeId>& stop_nodes() const { return stop_nodes_; }
    bool stops_at(NodeId node) const;

    /// Stop node on the path through leaf `leaf_ordinal` (which must lie below
    /// the anchor).
    NodeId stop_node_for_leaf(const TreeModel& model, std::size_t leaf_ordinal) const;

    bool operator==(const StoppingTime& other) const {
        return anchor_ == other.anchor_ && stop_nodes_ == other.stop_nodes_;
    }

  private:
    NodeId anchor_;
    std::size_t floor_level_;
    std::vector<NodeId> stop_nodes_;  // sorted
    std::size_t first_leaf_ = 0;
    std::vector<NodeId> per_leaf_;
};

/// tau ∧ level, path-wise.
StoppingTime truncate(const TreeModel& model, const StoppingTime& tau, std::size_t level);
/// True iff a <= b on every path below the common anchor.
bool pathwise_le(const TreeModel& model, const StoppingTime& a, const StoppingTime& b);

/// Number of stopping times on the subtree of `anchor` that stop at level >=
/// floor_level. For a binary tree of residual depth d: S(0) = 1, S(d) = 1 + S(d-1)^2.
BigInt count_stopping_times(const TreeModel& model, NodeId anchor, std::size_t floor_level);

/// Exhaustive, duplicate-free list in canonical order (stop-here first, then
/// lexicographic over children). Throws EnumerationOverflow naming the exact
/// count when it exceeds `budget`.
std::vector<StoppingTime> enumerate_stopping_times(const TreeModel& model, std::size_t floor_level,
                                                   std::size_t budget);
std::vector<StoppingTime> enumerate_stopping_times(const TreeModel& model, NodeId anchor,
                                                   std::size_t floor_level, std::size_t budget);

/// E[x(children) | node] for every node at `level`, indexed within the level.
template <class Num>
std::vector<Num> conditional_expectation(const TreeModel& model, const AdaptedProcess<Num>& x, std::size_t level);

/// Σ_c p(node -> c) x(c).
template <class Num>
Num expectation_over_children(const TreeModel& model, const AdaptedProcess<Num>& x, NodeId node);

/// A random variable on the paths below an anchor: one value per leaf, with
/// conditional path probabilities given the anchor.
template <class Num>
struct PathValues {
    NodeId anchor = 0;
    std::vector<Num> values;
    std::vector<Num> weights;

    Num expectation() const {
        Num total(0);
        for (std::size_t i = 0; i < values.size(); ++i) total += weights[i] * values[i];
        return total;
    }
};

/// Conditional path probabilities P(leaf | anchor) for the leaves below `anchor`.
template <class Num>
std::vector<Num> conditional_leaf_weights(const TreeModel& model, NodeId anchor);

/// X_tau per path below tau's anchor.
template <class Num>
PathValues<Num> stopped_value(const TreeModel& model, const AdaptedProcess<Num>& x, const StoppingTime& tau);

}  // namespace reflectlab
