#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lginr/tensors.hpp"

namespace lginr {

// Axis-aligned hyperrectangle of the input coordinate space.
struct Bounds {
    std::vector<double> lo;
    std::vector<double> hi;

    index dims() const { return static_cast<index>(lo.size()); }
    void validate() const;

    // (-1, 1)^n, the normalization every loaded Signal uses.
    static Bounds unit(index n);
};

// Equal tiling of the bounds into factors[d] cells per dimension.
struct PartitionGrid {
    Bounds bounds;
    std::vector<std::uint32_t> factors;

    index dims() const { return static_cast<index>(factors.size()); }
    index partition_count() const;
    double delta(index d) const;
    void validate() const;
};

PartitionGrid make_unit_grid(std::vector<std::uint32_t> factors);

// Per-dimension cell of a point: floor((p - lo) / delta), clamped so points on
// the max boundary belong to the last cell. Throws when p leaves the bounds.
std::vector<std::uint32_t> locate(const PartitionGrid& grid, std::span<const double> p);

// Row-major linearization, last dimension fastest.
index flat_index(const PartitionGrid& grid, std::span<const std::uint32_t> cell);
std::vector<std::uint32_t> unflatten(const PartitionGrid& grid, index flat);

template <typename T>
index locate_flat(const PartitionGrid& grid, const T* p);

// Flat cell id for every row of a B x n coordinate matrix.
template <typename T>
std::vector<std::uint32_t> locate_all(const PartitionGrid& grid, const Mat<T>& coords);

// ---------------------------------------------------------------------------
// Automatic partitioning: pick factors by ceil division of the resolution,
// then search hidden dimensions so the realized parameter count lands within
// 1% of the target. Throws when no feasible plan exists.
// ---------------------------------------------------------------------------
struct PartitionPlan {
    std::vector<std::uint32_t> factors;
    index local_hidden = 0;
    index global_hidden = 0;
    index predicted_total_params = 0;
};

PartitionPlan auto_partition(index target_total_params, double target_global_ratio,
                             std::span<const index> target_partition_size,
                             std::span<const index> signal_resolution, index depth,
                             index out_dim, bool fc_add_merge = false);

}  // namespace lginr
