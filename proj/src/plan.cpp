#include <cmath>
#include <stdexcept>
#include <string>

#include "lginr/model.hpp"
#include "lginr/partition.hpp"

namespace lginr {

namespace {

// Largest value in [1, ...] whose monotone cost stays within budget, or 0 when
// even 1 exceeds it.
template <typename CostFn>
index find_dimension(index budget, CostFn&& cost) {
    if (cost(1) > budget) return 0;
    index lo = 1, hi = 2;
    while (cost(hi) <= budget) {
        lo = hi;
        hi *= 2;
        if (hi > (index{1} << 24)) break;
    }
    while (lo < hi) {
        index mid = (lo + hi + 1) / 2;
        if (cost(mid) <= budget)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

}  // namespace

PartitionPlan auto_partition(index target_total_params, double target_global_ratio,
                             std::span<const index> target_partition_size,
                             std::span<const index> signal_resolution, index depth,
                             index out_dim, bool fc_add_merge) {
    const index n = static_cast<index>(signal_resolution.size());
    if (n < 1 || static_cast<index>(target_partition_size.size()) != n)
        throw std::invalid_argument("auto_partition: resolution/partition-size dims differ");
    if (target_total_params < 1) throw std::invalid_argument("auto_partition: target must be >= 1");
    if (!(target_global_ratio > 0.0 && target_global_ratio < 1.0))
        throw std::invalid_argument("auto_partition: global ratio must lie in (0, 1)");

    PartitionPlan plan;
    plan.factors.resize(static_cast<std::size_t>(n));
    for (index d = 0; d < n; ++d) {
        const auto du = static_cast<std::size_t>(d);
        if (signal_resolution[du] < 1 || target_partition_size[du] < 1)
            throw std::invalid_argument("auto_partition: resolution and partition size must be >= 1");
        plan.factors[du] = static_cast<std::uint32_t>(
            (signal_resolution[du] + target_partition_size[du] - 1) / target_partition_size[du]);
    }

    ModelSpec spec;
    spec.kind = ModelKind::lgs;
    spec.in_dim = n;
    spec.out_dim = out_dim;
    spec.depth = depth;
    spec.omega = 30.f;
    spec.merge = fc_add_merge ? MergeKind::fc_add : MergeKind::concat_fc;
    spec.grid = make_unit_grid(plan.factors);
    const index K = spec.grid.partition_count();

    auto breakdown_at = [&](index hl, index hg) {
        spec.local_hidden = hl;
        spec.global_hidden = hg;
        return param_breakdown(spec, K);
    };
    auto global_net_params = [&](index hg) { return breakdown_at(1, hg).global_net; };

    const auto target_global =
        static_cast<index>(std::llround(target_global_ratio * static_cast<double>(target_total_params)));
    index hg = find_dimension(target_global, global_net_params);
    if (hg < 1)
        throw std::invalid_argument("auto_partition: global share too small for a 1-wide network");

    const index local_budget = target_total_params - global_net_params(hg);
    index hl = find_dimension(local_budget, [&](index h) {
        const auto b = breakdown_at(h, hg);
        return b.local_total + b.merge;
    });
    if (hl < 1)
        throw std::invalid_argument("auto_partition: target too small, no feasible local width (" +
                                    std::to_string(K) + " partitions)");

    // Nudge the global width until the realized total lands within 1% of the
    // target. Detect the infeasible case where one step overshoots the window
    // from both sides.
    const double tol = 0.01 * static_cast<double>(target_total_params);
    int last_dir = 0;
    for (;;) {
        const index total = breakdown_at(hl, hg).total;
        const double gap = static_cast<double>(total - target_total_params);
        if (std::fabs(gap) <= tol) {
            plan.local_hidden = hl;
            plan.global_hidden = hg;
            plan.predicted_total_params = total;
            return plan;
        }
        const int dir = gap > 0 ? -1 : 1;
        if (last_dir != 0 && dir != last_dir)
            throw std::invalid_argument(
                "auto_partition: no global width meets the 1% budget window");
        last_dir = dir;
        hg += dir;
        if (hg < 1)
            throw std::invalid_argument(
                "auto_partition: infeasible target, global width fell below 1");
    }
}

}  // namespace lginr
