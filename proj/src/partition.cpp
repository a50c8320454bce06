#include "lginr/partition.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lginr {

void Bounds::validate() const {
    if (lo.size() != hi.size() || lo.empty())
        throw std::invalid_argument("bounds: need matching non-empty lo/hi");
    for (std::size_t d = 0; d < lo.size(); ++d)
        if (!(lo[d] < hi[d]))
            throw std::invalid_argument("bounds: lo must be < hi in dimension " + std::to_string(d));
}

Bounds Bounds::unit(index n) {
    Bounds b;
    b.lo.assign(static_cast<std::size_t>(n), -1.0);
    b.hi.assign(static_cast<std::size_t>(n), 1.0);
    return b;
}

index PartitionGrid::partition_count() const {
    index k = 1;
    for (auto c : factors) k *= static_cast<index>(c);
    return k;
}

double PartitionGrid::delta(index d) const {
    return (bounds.hi[static_cast<std::size_t>(d)] - bounds.lo[static_cast<std::size_t>(d)]) /
           static_cast<double>(factors[static_cast<std::size_t>(d)]);
}

void PartitionGrid::validate() const {
    bounds.validate();
    if (factors.size() != bounds.lo.size())
        throw std::invalid_argument("grid: factors dimensionality differs from bounds");
    for (auto c : factors)
        if (c == 0) throw std::invalid_argument("grid: partition factors must be >= 1");
}

PartitionGrid make_unit_grid(std::vector<std::uint32_t> factors) {
    PartitionGrid g;
    g.bounds = Bounds::unit(static_cast<index>(factors.size()));
    g.factors = std::move(factors);
    g.validate();
    return g;
}

std::vector<std::uint32_t> locate(const PartitionGrid& grid, std::span<const double> p) {
    const index n = grid.dims();
    if (static_cast<index>(p.size()) != n)
        throw std::invalid_argument("locate: point dimensionality differs from grid");
    std::vector<std::uint32_t> cell(static_cast<std::size_t>(n));
    for (index d = 0; d < n; ++d) {
        const auto du = static_cast<std::size_t>(d);
        const double lo = grid.bounds.lo[du];
        const double hi = grid.bounds.hi[du];
        if (!(p[du] >= lo && p[du] <= hi))
            throw std::out_of_range("locate: coordinate outside bounds in dimension " +
                                    std::to_string(d));
        auto idx = static_cast<std::int64_t>(std::floor((p[du] - lo) / grid.delta(d)));
        const std::int64_t last = static_cast<std::int64_t>(grid.factors[du]) - 1;
        if (idx < 0) idx = 0;
        if (idx > last) idx = last;
        cell[du] = static_cast<std::uint32_t>(idx);
    }
    return cell;
}

index flat_index(const PartitionGrid& grid, std::span<const std::uint32_t> cell) {
    const index n = grid.dims();
    if (static_cast<index>(cell.size()) != n)
        throw std::invalid_argument("flat_index: cell dimensionality differs from grid");
    index flat = 0;
    for (index d = 0; d < n; ++d) {
        const auto du = static_cast<std::size_t>(d);
        if (cell[du] >= grid.factors[du])
            throw std::out_of_range("flat_index: cell index out of range in dimension " +
                                    std::to_string(d));
        flat = flat * static_cast<index>(grid.factors[du]) + static_cast<index>(cell[du]);
    }
    return flat;
}

std::vector<std::uint32_t> unflatten(const PartitionGrid& grid, index flat) {
    if (flat < 0 || flat >= grid.partition_count())
        throw std::out_of_range("unflatten: flat index out of range");
    const index n = grid.dims();
    std::vector<std::uint32_t> cell(static_cast<std::size_t>(n));
    for (index d = n - 1; d >= 0; --d) {
        const auto c = static_cast<index>(grid.factors[static_cast<std::size_t>(d)]);
        cell[static_cast<std::size_t>(d)] = static_cast<std::uint32_t>(flat % c);
        flat /= c;
    }
    return cell;
}

template <typename T>
index locate_flat(const PartitionGrid& grid, const T* p) {
    const index n = grid.dims();
    index flat = 0;
    for (index d = 0; d < n; ++d) {
        const auto du = static_cast<std::size_t>(d);
        const double v = static_cast<double>(p[d]);
        const double lo = grid.bounds.lo[du];
        const double hi = grid.bounds.hi[du];
        if (!(v >= lo && v <= hi))
            throw std::out_of_range("locate: coordinate outside bounds in dimension " +
                                    std::to_string(d));
        auto idx = static_cast<std::int64_t>(std::floor((v - lo) / grid.delta(d)));
        const std::int64_t last = static_cast<std::int64_t>(grid.factors[du]) - 1;
        if (idx < 0) idx = 0;
        if (idx > last) idx = last;
        flat = flat * static_cast<index>(grid.factors[du]) + idx;
    }
    return flat;
}

template <typename T>
std::vector<std::uint32_t> locate_all(const PartitionGrid& grid, const Mat<T>& coords) {
    if (coords.cols != grid.dims())
        throw std::invalid_argument("locate_all: coordinate dimensionality differs from grid");
    std::vector<std::uint32_t> ids(static_cast<std::size_t>(coords.rows));
    for (index i = 0; i < coords.rows; ++i)
        ids[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(locate_flat(grid, coords.row(i)));
    return ids;
}

template index locate_flat<float>(const PartitionGrid&, const float*);
template index locate_flat<double>(const PartitionGrid&, const double*);
template std::vector<std::uint32_t> locate_all<float>(const PartitionGrid&, const Mat<float>&);
template std::vector<std::uint32_t> locate_all<double>(const PartitionGrid&, const Mat<double>&);

}  // namespace lginr
