#pragma once

#include "reflectlab/adapted.hpp"
#include "reflectlab/filtration.hpp"

#include <functional>
#include <iosfwd>
#include <string>

namespace reflectlab {

template <class Num>
void require_bound(const TreeModel& model, const AdaptedProcess<Num>& x, const char* what = "process");
template <class Num>
void require_bound(const TreeModel& model, const PredictableIncrements<Num>& x, const char* what = "increments");
template <class Num>
void require_bound(const TreeModel& model, const MartingaleIncrements<Num>& x, const char* what = "martingale");

template <class Num>
AdaptedProcess<Num> make_process(const TreeModel& model, const std::function<Num(NodeId)>& value);

/// Martingale closed by the given leaf values (one per leaf ordinal).
template <class Num>
AdaptedProcess<Num> martingale_from_terminal(const TreeModel& model, const std::vector<Num>& terminal);

template <class Num>
struct DoobDecomposition {
    MartingaleIncrements<Num> martingale;
    PredictableIncrements<Num> drift;
};

/// x_{t+1} = x_t + ΔA_{t+1} + ΔM_{t+1} with ΔA_{t+1} = E[x_{t+1}|F_t] - x_t.
template <class Num>
DoobDecomposition<Num> doob_decomposition(const TreeModel& model, const AdaptedProcess<Num>& x);

/// Rebuilds x from x_0 and the two increment families.
template <class Num>
AdaptedProcess<Num> reassemble(const TreeModel& model, const Num& initial, const PredictableIncrements<Num>& drift,
                               const MartingaleIncrements<Num>& martingale);

/// max over non-terminal nodes of |Σ_c p(c) ΔM(c)|, together with |ΔM at the root|.
template <class Num>
Num martingale_mean_residual(const TreeModel& model, const MartingaleIncrements<Num>& m);

/// M_t as a process (sum of increments from the root, M_0 = 0).
template <class Num>
AdaptedProcess<Num> martingale_path(const TreeModel& model, const MartingaleIncrements<Num>& m);

/// Increasing-process path K_t = Σ of increments decided strictly before t.
template <class Num>
AdaptedProcess<Num> accumulate(const TreeModel& model, const PredictableIncrements<Num>& inc);

/// Smallest supermartingale dominating x.
template <class Num>
AdaptedProcess<Num> snell_envelope(const TreeModel& model, const AdaptedProcess<Num>& x);

/// Finite analogue of the class D norm: sup over stopping times of E|X_tau|,
/// evaluated as the root value of the Snell envelope of |x|.
template <class Num>
Num class_d_norm(const TreeModel& model, const AdaptedProcess<Num>& x);

/// Per-path Σ|ΔV| over the edges up to tau's stop node (from tau's anchor).
template <class Num>
PathValues<Num> total_variation(const TreeModel& model, const PredictableIncrements<Num>& v, const StoppingTime& tau);
/// Same for an adapted process, summing |x(node) - x(parent)|.
template <class Num>
PathValues<Num> total_variation(const TreeModel& model, const AdaptedProcess<Num>& x, const StoppingTime& tau);

template <class Num>
bool is_supermartingale(const TreeModel& model, const AdaptedProcess<Num>& s);

/// CSV with header `level,index,value`, one row per node.
template <class Num>
void write_process_csv(std::ostream& out, const TreeModel& model, const AdaptedProcess<Num>& x);
/// CSV with header `parent_level,parent_index,child_index,value`, one row per edge.
template <class Num>
void write_increments_csv(std::ostream& out, const TreeModel& model, const PredictableIncrements<Num>& inc);
template <class Num>
void write_increments_csv(std::ostream& out, const TreeModel& model, const MartingaleIncrements<Num>& m);

}  // namespace reflectlab
