#include "reflectlab/filtration.hpp"

#include "reflectlab/errors.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace reflectlab {

std::string to_string(const NodeAddress& address) {
    return std::to_string(address.level) + ":" + std::to_string(address.index);
}

TreeModel::TreeModel(std::vector<Rational> times, std::vector<std::vector<std::vector<Rational>>> branching)
    : times_(std::move(times)) {
    validate_and_index(branching);
}

void TreeModel::validate_and_index(const std::vector<std::vector<std::vector<Rational>>>& branching) {
    if (times_.size() < 2) throw ModelError("time grid needs at least two points (t_0 = 0 < T)");
    if (times_.front() != 0) throw ModelError("time grid must start at 0");
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i - 1] < times_[i])) {
            throw ModelError("time grid not strictly increasing at level " + std::to_string(i));
        }
    }
    const std::size_t n = times_.size() - 1;
    if (branching.size() != n) {
        throw ModelError("branching table has " + std::to_string(branching.size()) + " levels, expected " +
                         std::to_string(n));
    }

    level_begin_ = {0, 1};
    level_ = {0};
    parent_ = {0};
    edge_prob_ = {Rational(1)};
    path_prob_ = {Rational(1)};
    for (std::size_t l = 0; l < n; ++l) {
        const std::size_t width = level_begin_[l + 1] - level_begin_[l];
        if (branching[l].size() != width) {
            throw ModelError("level " + std::to_string(l) + " has " + std::to_string(width) +
                             " nodes but branching rows for " + std::to_string(branching[l].size()));
        }
        for (std::size_t i = 0; i < width; ++i) {
            const NodeId p = level_begin_[l] + i;
            const auto& row = branching[l][i];
            const std::string where = "node " + to_string(NodeAddress{l, i});
            if (row.empty()) throw ModelError(where + " has no children before the terminal level");
            Rational total = 0;
            for (const auto& q : row) {
                if (!(q > 0)) throw ModelError(where + " has a non-positive branch probability " + reflectlab::to_string(q));
                total += q;
            }
            if (total != 1) {
                throw ModelError(where + " branch probabilities sum to " + reflectlab::to_string(total) + ", not 1");
            }
            for (const auto& q : row) {
                level_.push_back(l + 1);
                parent_.push_back(p);
                edge_prob_.push_back(q);
                path_prob_.push_back(path_prob_[p] * q);
            }
        }
        level_begin_.push_back(level_.size());
    }

    const std::size_t count = level_.size();
    first_child_.assign(count, 0);
    child_count_.assign(count, 0);
    child_ids_.resize(count > 0 ? count - 1 : 0);
    for (NodeId c = 1; c < count; ++c) {
        const NodeId p = parent_[c];
        if (child_count_[p] == 0) first_child_[p] = c - 1;
        ++child_count_[p];
        child_ids_[c - 1] = c;
    }
    edge_prob_d_.resize(count);
    for (NodeId v = 0; v < count; ++v) edge_prob_d_[v] = edge_prob_[v].convert_to<double>();

    leaf_first_.assign(count, 0);
    leaf_last_.assign(count, 0);
    for (NodeId v = level_begin_[n]; v < count; ++v) {
        leaf_first_[v] = v - level_begin_[n];
        leaf_last_[v] = leaf_first_[v] + 1;
    }
    for (std::size_t l = n; l-- > 0;) {
        for (NodeId v = level_begin_[l]; v < level_begin_[l + 1]; ++v) {
            const NodeId first = child_ids_[first_child_[v]];
            const NodeId last = child_ids_[first_child_[v] + child_count_[v] - 1];
            leaf_first_[v] = leaf_first_[first];
            leaf_last_[v] = leaf_last_[last];
        }
    }
}

TreeModel TreeModel::uniform(std::size_t depth, std::size_t factor) {
    if (depth == 0) throw ModelError("tree depth must be at least 1");
    if (factor == 0) throw ModelError("branching factor must be positive");
    std::vector<Rational> times;
    for (std::size_t i = 0; i <= depth; ++i) times.emplace_back(static_cast<long>(i));
    std::vector<std::vector<std::vector<Rational>>> branching(depth);
    std::size_t width = 1;
    for (std::size_t l = 0; l < depth; ++l) {
        branching[l].assign(width, std::vector<Rational>(factor, Rational(1, static_cast<long>(factor))));
        width *= factor;
    }
    return TreeModel(std::move(times), std::move(branching));
}

NodeId TreeModel::node(const NodeAddress& address) const {
    if (address.level > depth() || address.index >= level_size(address.level)) {
        throw ModelError("no node at address " + to_string(address));
    }
    return level_begin_[address.level] + address.index;
}

std::optional<NodeId> TreeModel::parent(NodeId node) const {
    if (node == 0) return std::nullopt;
    return parent_[node];
}

std::span<const NodeId> TreeModel::children(NodeId node) const {
    if (child_count_[node] == 0) return {};
    return std::span<const NodeId>(child_ids_).subspan(first_child_[node], child_count_[node]);
}

NodeId TreeModel::ancestor_at(NodeId node, std::size_t level) const {
    if (level > level_[node]) throw DomainError("ancestor level below node level");
    while (level_[node] > level) node = parent_[node];
    return node;
}

bool TreeModel::is_ancestor_or_self(NodeId ancestor, NodeId node) const {
    if (level_[ancestor] > level_[node]) return false;
    return ancestor_at(node, level_[ancestor]) == ancestor;
}

bool TreeModel::operator==(const TreeModel& other) const {
    return times_ == other.times_ && parent_ == other.parent_ && edge_prob_ == other.edge_prob_;
}

ExpandedLattice expand_lattice(const LatticeSpec& lattice) {
    const std::size_t n = lattice.times.size() - 1;
    if (lattice.times.size() < 2) throw ModelError("lattice needs at least two time points");
    if (lattice.transitions.size() != n) throw ModelError("lattice transition table does not match the time grid");
    if (lattice.transitions[0].size() != 1) throw ModelError("lattice level 0 must have exactly one node");

    std::vector<std::vector<std::vector<Rational>>> branching(n);
    std::vector<NodeAddress> origin{{0, 0}};
    std::vector<std::size_t> frontier{0};
    for (std::size_t l = 0; l < n; ++l) {
        std::vector<std::size_t> next;
        const std::size_t next_width = l + 1 < n ? lattice.transitions[l + 1].size() : 0;
        for (std::size_t lattice_index : frontier) {
            if (lattice_index >= lattice.transitions[l].size()) {
                throw ModelError("lattice transition targets missing node " + to_string(NodeAddress{l, lattice_index}));
            }
            const auto& row = lattice.transitions[l][lattice_index];
            std::vector<Rational> probs;
            for (const auto& [target, q] : row) {
                if (l + 1 < n && target >= next_width) {
                    throw ModelError("lattice node " + to_string(NodeAddress{l, lattice_index}) +
                                     " points to missing node " + to_string(NodeAddress{l + 1, target}));
                }
                probs.push_back(q);
                next.push_back(target);
                origin.push_back({l + 1, target});
            }
            branching[l].push_back(std::move(probs));
        }
        frontier = std::move(next);
    }
    return {TreeModel(lattice.times, std::move(branching)), std::move(origin)};
}

// ---------------------------------------------------------------------------
// Stopping times

std::optional<std::string> StoppingTime::validate(const TreeModel& model, NodeId anchor,
                                                  std::span<const NodeId> stop_nodes, std::size_t floor_level) {
    if (anchor >= model.node_count()) return "anchor node out of range";
    if (floor_level < model.level_of(anchor)) return "floor level below the anchor level";
    if (floor_level > model.depth()) return "floor level beyond the horizon";
    std::vector<char> hit(model.node_count(), 0);
    for (NodeId v : stop_nodes) {
        if (v >= model.node_count()) return "stop node out of range";
        if (!model.is_ancestor_or_self(anchor, v)) {
            return "stop node " + to_string(model.address(v)) + " outside the subtree of " + to_string(model.address(anchor));
        }
        if (model.level_of(v) < floor_level) {
            return "stop node " + to_string(model.address(v)) + " below floor level " + std::to_string(floor_level);
        }
        if (hit[v]) return "duplicate stop node " + to_string(model.address(v));
        hit[v] = 1;
    }
    const auto [first, last] = model.leaf_range(anchor);
    for (std::size_t k = first; k < last; ++k) {
        NodeId v = model.leaf(k);
        int seen = 0;
        while (true) {
            seen += hit[v];
            if (v == anchor) break;
            v = model.parent_or_self(v);
        }
        if (seen != 1) {
            return "path to leaf " + to_string(model.address(model.leaf(k))) + " meets " + std::to_string(seen) +
                   " stop nodes";
        }
    }
    return std::nullopt;
}

StoppingTime::StoppingTime(const TreeModel& model, NodeId anchor, std::vector<NodeId> stop_nodes,
                           std::size_t floor_level)
    : anchor_(anchor), floor_level_(floor_level), stop_nodes_(std::move(stop_nodes)) {
    std::sort(stop_nodes_.begin(), stop_nodes_.end());
    if (auto problem = validate(model, anchor_, stop_nodes_, floor_level_)) {
        throw DomainError("invalid stopping time: " + *problem);
    }
    const auto [first, last] = model.leaf_range(anchor_);
    first_leaf_ = first;
    per_leaf_.resize(last - first);
    for (NodeId s : stop_nodes_) {
        const auto [a, b] = model.leaf_range(s);
        for (std::size_t k = a; k < b; ++k) per_leaf_[k - first] = s;
    }
}

StoppingTime StoppingTime::immediately(const TreeModel& model, NodeId anchor) {
    return StoppingTime(model, anchor, {anchor}, model.level_of(anchor));
}

StoppingTime StoppingTime::at_horizon(const TreeModel& model, NodeId anchor) {
    return at_level(model, anchor, model.depth());
}

StoppingTime StoppingTime::at_level(const TreeModel& model, NodeId anchor, std::size_t level) {
    if (level < model.level_of(anchor) || level > model.depth()) throw DomainError("level outside the anchor's subtree");
    std::vector<NodeId> nodes;
    for (NodeId v = model.level_begin(level); v < model.level_end(level); ++v) {
        if (model.is_ancestor_or_self(anchor, v)) nodes.push_back(v);
    }
    return StoppingTime(model, anchor, std::move(nodes), model.level_of(anchor));
}

bool StoppingTime::stops_at(NodeId node) const {
    return std::binary_search(stop_nodes_.begin(), stop_nodes_.end(), node);
}

NodeId StoppingTime::stop_node_for_leaf(const TreeModel&, std::size_t leaf_ordinal) const {
    if (leaf_ordinal < first_leaf_ || leaf_ordinal >= first_leaf_ + per_leaf_.size()) {
        throw DomainError("leaf outside the stopping time's subtree");
    }
    return per_leaf_[leaf_ordinal - first_leaf_];
}

StoppingTime truncate(const TreeModel& model, const StoppingTime& tau, std::size_t level) {
    const NodeId anchor = tau.anchor();
    if (level < model.level_of(anchor)) throw DomainError("truncation level before the anchor");
    std::vector<NodeId> nodes;
    const auto [first, last] = model.leaf_range(anchor);
    for (std::size_t k = first; k < last; ++k) {
        NodeId s = tau.stop_node_for_leaf(model, k);
        if (model.level_of(s) > level) s = model.ancestor_at(s, level);
        nodes.push_back(s);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return StoppingTime(model, anchor, std::move(nodes), std::min(tau.floor_level(), level));
}

bool pathwise_le(const TreeModel& model, const StoppingTime& a, const StoppingTime& b) {
    if (a.anchor() != b.anchor()) throw DomainError("stopping times have different anchors");
    const auto [first, last] = model.leaf_range(a.anchor());
    for (std::size_t k = first; k < last; ++k) {
        if (model.level_of(a.stop_node_for_leaf(model, k)) > model.level_of(b.stop_node_for_leaf(model, k))) {
            return false;
        }
    }
    return true;
}

namespace {

BigInt count_below(const TreeModel& model, NodeId node, std::size_t floor_level) {
    BigInt product = 1;
    for (NodeId c : model.children(node)) product *= count_below(model, c, floor_level);
    if (model.level_of(node) < floor_level) return product;
    return model.is_leaf(node) ? BigInt(1) : BigInt(product + 1);
}

// All antichains below `node`, each as a list of stop nodes, in canonical order.
std::vector<std::vector<NodeId>> antichains_below(const TreeModel& model, NodeId node, std::size_t floor_level) {
    std::vector<std::vector<NodeId>> out;
    if (model.level_of(node) >= floor_level) out.push_back({node});
    if (model.is_leaf(node)) return out;
    std::vector<std::vector<NodeId>> combos{{}};
    for (NodeId c : model.children(node)) {
        auto options = antichains_below(model, c, floor_level);
        std::vector<std::vector<NodeId>> next;
        next.reserve(combos.size() * options.size());
        for (const auto& prefix : combos) {
            for (const auto& opt : options) {
                auto merged = prefix;
                merged.insert(merged.end(), opt.begin(), opt.end());
                next.push_back(std::move(merged));
            }
        }
        combos = std::move(next);
    }
    for (auto& c : combos) out.push_back(std::move(c));
    return out;
}

}  // namespace

BigInt count_stopping_times(const TreeModel& model, NodeId anchor, std::size_t floor_level) {
    if (floor_level < model.level_of(anchor) || floor_level > model.depth()) {
        throw DomainError("floor level outside the anchor's subtree");
    }
    return count_below(model, anchor, floor_level);
}

std::vector<StoppingTime> enumerate_stopping_times(const TreeModel& model, std::size_t floor_level,
                                                   std::size_t budget) {
    return enumerate_stopping_times(model, model.root(), floor_level, budget);
}

std::vector<StoppingTime> enumerate_stopping_times(const TreeModel& model, NodeId anchor, std::size_t floor_level,
                                                   std::size_t budget) {
    const BigInt count = count_stopping_times(model, anchor, floor_level);
    if (count > BigInt(budget)) {
        throw EnumerationOverflow(count.str(), std::to_string(budget), "stopping times");
    }
    std::vector<StoppingTime> out;
    out.reserve(count.convert_to<std::size_t>());
    for (auto& nodes : antichains_below(model, anchor, floor_level)) {
        out.emplace_back(model, anchor, std::move(nodes), floor_level);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Expectations

template <class Num>
Num expectation_over_children(const TreeModel& model, const AdaptedProcess<Num>& x, NodeId node) {
    Num total(0);
    for (NodeId c : model.children(node)) total += model.edge_probability_as<Num>(c) * x[c];
    return total;
}

template <class Num>
std::vector<Num> conditional_expectation(const TreeModel& model, const AdaptedProcess<Num>& x, std::size_t level) {
    if (x.size() != model.node_count()) {
        throw ModelError("process has " + std::to_string(x.size()) + " values, model has " +
                         std::to_string(model.node_count()) + " nodes");
    }
    if (level >= model.depth()) {
        throw DomainError("conditional expectation at level " + std::to_string(level) + ": terminal nodes have no children");
    }
    std::vector<Num> out;
    out.reserve(model.level_size(level));
    for (NodeId v = model.level_begin(level); v < model.level_end(level); ++v) {
        out.push_back(expectation_over_children(model, x, v));
    }
    return out;
}

template <class Num>
std::vector<Num> conditional_leaf_weights(const TreeModel& model, NodeId anchor) {
    const auto [first, last] = model.leaf_range(anchor);
    std::vector<Num> w;
    w.reserve(last - first);
    for (std::size_t k = first; k < last; ++k) {
        const Rational q = model.path_probability(model.leaf(k)) / model.path_probability(anchor);
        w.push_back(from_rational<Num>(q));
    }
    return w;
}

template <class Num>
PathValues<Num> stopped_value(const TreeModel& model, const AdaptedProcess<Num>& x, const StoppingTime& tau) {
    if (x.size() != model.node_count()) throw ModelError("process does not match the model's node set");
    PathValues<Num> out;
    out.anchor = tau.anchor();
    out.weights = conditional_leaf_weights<Num>(model, tau.anchor());
    const auto [first, last] = model.leaf_range(tau.anchor());
    out.values.reserve(last - first);
    for (std::size_t k = first; k < last; ++k) out.values.push_back(x[tau.stop_node_for_leaf(model, k)]);
    return out;
}

#define REFLECTLAB_INSTANTIATE(Num)                                                                          \
    template Num expectation_over_children<Num>(const TreeModel&, const AdaptedProcess<Num>&, NodeId);       \
    template std::vector<Num> conditional_expectation<Num>(const TreeModel&, const AdaptedProcess<Num>&,     \
                                                           std::size_t);                                     \
    template std::vector<Num> conditional_leaf_weights<Num>(const TreeModel&, NodeId);                       \
    template PathValues<Num> stopped_value<Num>(const TreeModel&, const AdaptedProcess<Num>&, const StoppingTime&);

REFLECTLAB_INSTANTIATE(Rational)
REFLECTLAB_INSTANTIATE(double)
#undef REFLECTLAB_INSTANTIATE

}  // namespace reflectlab
