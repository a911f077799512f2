#include "reflectlab/processes.hpp"

#include "reflectlab/errors.hpp"

#include <ostream>

namespace reflectlab {

namespace {

void check_size(const TreeModel& model, std::size_t size, const char* what) {
    if (size != model.node_count()) {
        throw ModelError(std::string(what) + " has " + std::to_string(size) + " entries, model has " +
                         std::to_string(model.node_count()) + " nodes");
    }
}

std::string text(const Rational& q) { return to_string(q); }
std::string text(double x) { return to_string(x); }

}  // namespace

template <class Num>
void require_bound(const TreeModel& model, const AdaptedProcess<Num>& x, const char* what) {
    check_size(model, x.size(), what);
}
template <class Num>
void require_bound(const TreeModel& model, const PredictableIncrements<Num>& x, const char* what) {
    check_size(model, x.size(), what);
}
template <class Num>
void require_bound(const TreeModel& model, const MartingaleIncrements<Num>& x, const char* what) {
    check_size(model, x.size(), what);
}

template <class Num>
AdaptedProcess<Num> make_process(const TreeModel& model, const std::function<Num(NodeId)>& value) {
    std::vector<Num> v;
    v.reserve(model.node_count());
    for (NodeId n = 0; n < model.node_count(); ++n) v.push_back(value(n));
    return AdaptedProcess<Num>(std::move(v));
}

template <class Num>
AdaptedProcess<Num> martingale_from_terminal(const TreeModel& model, const std::vector<Num>& terminal) {
    if (terminal.size() != model.leaf_count()) throw ModelError("terminal values do not match the leaf count");
    AdaptedProcess<Num> x(model.node_count(), Num(0));
    for (std::size_t k = 0; k < terminal.size(); ++k) x[model.leaf(k)] = terminal[k];
    for (std::size_t l = model.depth(); l-- > 0;) {
        for (NodeId v = model.level_begin(l); v < model.level_end(l); ++v) x[v] = expectation_over_children(model, x, v);
    }
    return x;
}

template <class Num>
DoobDecomposition<Num> doob_decomposition(const TreeModel& model, const AdaptedProcess<Num>& x) {
    require_bound(model, x);
    DoobDecomposition<Num> out{MartingaleIncrements<Num>(model.node_count(), Num(0)),
                               PredictableIncrements<Num>(model.node_count(), Num(0))};
    for (NodeId v = 0; v < model.node_count(); ++v) {
        if (model.is_leaf(v)) continue;
        const Num mean = expectation_over_children(model, x, v);
        out.drift.at(v) = mean - x[v];
        for (NodeId c : model.children(v)) out.martingale.into(c) = x[c] - mean;
    }
    return out;
}

template <class Num>
AdaptedProcess<Num> reassemble(const TreeModel& model, const Num& initial, const PredictableIncrements<Num>& drift,
                               const MartingaleIncrements<Num>& martingale) {
    require_bound(model, drift);
    require_bound(model, martingale);
    AdaptedProcess<Num> x(model.node_count(), Num(0));
    x[0] = initial;
    for (NodeId c = 1; c < model.node_count(); ++c) {
        const NodeId p = model.parent_or_self(c);
        x[c] = x[p] + drift.at(p) + martingale.into(c);
    }
    return x;
}

template <class Num>
Num martingale_mean_residual(const TreeModel& model, const MartingaleIncrements<Num>& m) {
    require_bound(model, m);
    Num worst = abs_value(m.into(0));
    for (NodeId v = 0; v < model.node_count(); ++v) {
        if (model.is_leaf(v)) continue;
        Num mean(0);
        for (NodeId c : model.children(v)) mean += model.edge_probability_as<Num>(c) * m.into(c);
        worst = max_of(worst, abs_value(mean));
    }
    return worst;
}

template <class Num>
AdaptedProcess<Num> martingale_path(const TreeModel& model, const MartingaleIncrements<Num>& m) {
    require_bound(model, m);
    AdaptedProcess<Num> x(model.node_count(), Num(0));
    for (NodeId c = 1; c < model.node_count(); ++c) x[c] = x[model.parent_or_self(c)] + m.into(c);
    return x;
}

template <class Num>
AdaptedProcess<Num> accumulate(const TreeModel& model, const PredictableIncrements<Num>& inc) {
    require_bound(model, inc);
    AdaptedProcess<Num> x(model.node_count(), Num(0));
    for (NodeId c = 1; c < model.node_count(); ++c) {
        const NodeId p = model.parent_or_self(c);
        x[c] = x[p] + inc.at(p);
    }
    return x;
}

template <class Num>
AdaptedProcess<Num> snell_envelope(const TreeModel& model, const AdaptedProcess<Num>& x) {
    require_bound(model, x);
    AdaptedProcess<Num> s = x;
    for (std::size_t l = model.depth(); l-- > 0;) {
        for (NodeId v = model.level_begin(l); v < model.level_end(l); ++v) {
            s[v] = max_of(x[v], expectation_over_children(model, s, v));
        }
    }
    return s;
}

template <class Num>
Num class_d_norm(const TreeModel& model, const AdaptedProcess<Num>& x) {
    require_bound(model, x);
    std::vector<Num> a;
    a.reserve(x.size());
    for (const Num& v : x.values()) a.push_back(abs_value(v));
    return snell_envelope(model, AdaptedProcess<Num>(std::move(a)))[model.root()];
}

template <class Num>
PathValues<Num> total_variation(const TreeModel& model, const PredictableIncrements<Num>& v, const StoppingTime& tau) {
    require_bound(model, v);
    PathValues<Num> out;
    out.anchor = tau.anchor();
    out.weights = conditional_leaf_weights<Num>(model, tau.anchor());
    const auto [first, last] = model.leaf_range(tau.anchor());
    for (std::size_t k = first; k < last; ++k) {
        Num sum(0);
        for (NodeId n = tau.stop_node_for_leaf(model, k); n != tau.anchor(); n = model.parent_or_self(n)) {
            sum += abs_value(v.at(model.parent_or_self(n)));
        }
        out.values.push_back(sum);
    }
    return out;
}

template <class Num>
PathValues<Num> total_variation(const TreeModel& model, const AdaptedProcess<Num>& x, const StoppingTime& tau) {
    require_bound(model, x);
    PathValues<Num> out;
    out.anchor = tau.anchor();
    out.weights = conditional_leaf_weights<Num>(model, tau.anchor());
    const auto [first, last] = model.leaf_range(tau.anchor());
    for (std::size_t k = first; k < last; ++k) {
        Num sum(0);
        for (NodeId n = tau.stop_node_for_leaf(model, k); n != tau.anchor(); n = model.parent_or_self(n)) {
            sum += abs_value(Num(x[n] - x[model.parent_or_self(n)]));
        }
        out.values.push_back(sum);
    }
    return out;
}

template <class Num>
bool is_supermartingale(const TreeModel& model, const AdaptedProcess<Num>& s) {
    require_bound(model, s);
    for (NodeId v = 0; v < model.node_count(); ++v) {
        if (!model.is_leaf(v) && expectation_over_children(model, s, v) > s[v]) return false;
    }
    return true;
}

template <class Num>
void write_process_csv(std::ostream& out, const TreeModel& model, const AdaptedProcess<Num>& x) {
    require_bound(model, x);
    out << "level,index,value\n";
    for (NodeId v = 0; v < model.node_count(); ++v) {
        const auto a = model.address(v);
        out << a.level << ',' << a.index << ',' << text(x[v]) << '\n';
    }
}

template <class Num>
void write_increments_csv(std::ostream& out, const TreeModel& model, const PredictableIncrements<Num>& inc) {
    require_bound(model, inc);
    out << "parent_level,parent_index,child_index,value\n";
    for (NodeId c = 1; c < model.node_count(); ++c) {
        const NodeId p = model.parent_or_self(c);
        const auto pa = model.address(p);
        out << pa.level << ',' << pa.index << ',' << model.address(c).index << ',' << text(inc.at(p)) << '\n';
    }
}

template <class Num>
void write_increments_csv(std::ostream& out, const TreeModel& model, const MartingaleIncrements<Num>& m) {
    require_bound(model, m);
    out << "parent_level,parent_index,child_index,value\n";
    for (NodeId c = 1; c < model.node_count(); ++c) {
        const auto pa = model.address(model.parent_or_self(c));
        out << pa.level << ',' << pa.index << ',' << model.address(c).index << ',' << text(m.into(c)) << '\n';
    }
}

#define REFLECTLAB_INSTANTIATE(Num)                                                                              \
    template void require_bound<Num>(const TreeModel&, const AdaptedProcess<Num>&, const char*);                 \
    template void require_bound<Num>(const TreeModel&, const PredictableIncrements<Num>&, const char*);           \
    template void require_bound<Num>(const TreeModel&, const MartingaleIncrements<Num>&, const char*);           \
    template AdaptedProcess<Num> make_process<Num>(const TreeModel&, const std::function<Num(NodeId)>&);         \
    template AdaptedProcess<Num> martingale_from_terminal<Num>(const TreeModel&, const std::vector<Num>&);       \
    template DoobDecomposition<Num> doob_decomposition<Num>(const TreeModel&, const AdaptedProcess<Num>&);       \
    template AdaptedProcess<Num> reassemble<Num>(const TreeModel&, const Num&, const PredictableIncrements<Num>&, \
                                                 const MartingaleIncrements<Num>&);                              \
    template Num martingale_mean_residual<Num>(const TreeModel&, const MartingaleIncrements<Num>&);              \
    template AdaptedProcess<Num> martingale_path<Num>(const TreeModel&, const MartingaleIncrements<Num>&);       \
    template AdaptedProcess<Num> accumulate<Num>(const TreeModel&, const PredictableIncrements<Num>&);           \
    template AdaptedProcess<Num> snell_envelope<Num>(const TreeModel&, const AdaptedProcess<Num>&);              \
    template Num class_d_norm<Num>(const TreeModel&, const AdaptedProcess<Num>&);                                \
    template PathValues<Num> total_variation<Num>(const TreeModel&, const PredictableIncrements<Num>&,           \
                                                  const StoppingTime&);                                          \
    template PathValues<Num> total_variation<Num>(const TreeModel&, const AdaptedProcess<Num>&,                 \
                                                  const StoppingTime&);                                          \
    template bool is_supermartingale<Num>(const TreeModel&, const AdaptedProcess<Num>&);                         \
    template void write_process_csv<Num>(std::ostream&, const TreeModel&, const AdaptedProcess<Num>&);           \
    template void write_increments_csv<Num>(std::ostream&, const TreeModel&, const PredictableIncrements<Num>&); \
    template void write_increments_csv<Num>(std::ostream&, const TreeModel&, const MartingaleIncrements<Num>&);

REFLECTLAB_INSTANTIATE(Rational)
REFLECTLAB_INSTANTIATE(double)
#undef REFLECTLAB_INSTANTIATE

}  // namespace reflectlab
