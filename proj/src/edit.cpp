#include "lginr/edit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

namespace lginr {

template <typename T>
Model<T> crop(const Model<T>& model, const std::vector<index>& drop) {
    const index K = model.spec.partition_count();
    std::set<index> dropped;
    for (index k : drop) {
        if (k < 0 || k >= K)
            throw std::out_of_range("crop: partition " + std::to_string(k) + " out of range");
        if (!model.present.keep[static_cast<std::size_t>(k)])
            throw std::invalid_argument("crop: partition " + std::to_string(k) +
                                        " was already cropped");
        if (!dropped.insert(k).second)
            throw std::invalid_argument("crop: partition " + std::to_string(k) +
                                        " listed twice");
    }
    if (drop.empty()) return model;
    if (model.present.kept_count() - static_cast<index>(dropped.size()) < 1)
        throw std::invalid_argument("crop: at least one partition must remain");

    Model<T> out;
    out.spec = model.spec;
    out.present = model.present;
    for (index k : dropped) out.present.keep[static_cast<std::size_t>(k)] = 0;

    const auto old_slots = model.present.slots();
    const index kept_new = out.present.kept_count();
    out.weights.global = model.weights.global;
    out.weights.merge = model.weights.merge;
    out.weights.local.resize(model.weights.local.size());
    for (std::size_t s = 0; s < model.weights.local.size(); ++s) {
        const auto& src = model.weights.local[s];
        auto& dst = out.weights.local[s];
        dst.w = BatchedMat<T>(kept_new, src.w.rows, src.w.cols);
        dst.b = BatchedMat<T>(kept_new, src.b.rows, src.b.cols);
        index slot = 0;
        for (index k = 0; k < K; ++k) {
            if (!out.present.keep[static_cast<std::size_t>(k)]) continue;
            const index from = old_slots[static_cast<std::size_t>(k)];
            std::memcpy(dst.w.slice(slot), src.w.slice(from), sizeof(T) * src.w.slice_size());
            std::memcpy(dst.b.slice(slot), src.b.slice(from), sizeof(T) * src.b.slice_size());
            ++slot;
        }
    }
    return out;
}

template Model<float> crop<float>(const Model<float>&, const std::vector<index>&);
template Model<double> crop<double>(const Model<double>&, const std::vector<index>&);

namespace {

index reflect_source(index j, index c_old) {
    while (j >= c_old) j = 2 * c_old - 1 - j;
    if (j < 0) j = 0;
    return j;
}

template <typename T>
T extend_layer_bound(index fan_in, float omega, bool first) {
    if (first) return T(1) / static_cast<T>(fan_in);
    return static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in)) /
                          static_cast<double>(omega));
}

}  // namespace

template <typename T>
ExtendResult<T> extend(const Model<T>& model, std::span<const std::uint32_t> new_factors,
                       const Bounds& new_bounds, Rng& rng, ExtendInit rule) {
    const ModelSpec& spec = model.spec;
    const index n = spec.grid.dims();
    if (static_cast<index>(new_factors.size()) != n)
        throw std::invalid_argument("extend: factor dimensionality differs from model");
    new_bounds.validate();
    if (new_bounds.dims() != n)
        throw std::invalid_argument("extend: bounds dimensionality differs from model");
    if (model.present.kept_count() != spec.partition_count())
        throw std::invalid_argument("extend: model must be uncropped");

    bool unchanged = true;
    for (index d = 0; d < n; ++d) {
        const auto du = static_cast<std::size_t>(d);
        if (new_factors[du] < spec.grid.factors[du])
            throw std::invalid_argument("extend: factors cannot shrink (dimension " +
                                        std::to_string(d) + ")");
        if (new_factors[du] != spec.grid.factors[du]) unchanged = false;
        if (std::fabs(new_bounds.lo[du] - spec.grid.bounds.lo[du]) > 1e-12)
            throw std::invalid_argument(
                "extend: new bounds must keep the old minimum corner (dimension " +
                std::to_string(d) + ")");
        const double want_hi =
            spec.grid.bounds.lo[du] + static_cast<double>(new_factors[du]) * spec.grid.delta(d);
        if (std::fabs(new_bounds.hi[du] - want_hi) > 1e-9 * std::max(1.0, std::fabs(want_hi)))
            throw std::invalid_argument(
                "extend: new bounds must extend the old hyperrectangle by whole partitions "
                "(dimension " + std::to_string(d) + ")");
    }

    ExtendResult<T> res;
    if (unchanged) {
        res.model = model;
        res.freeze_old.local_slice.assign(static_cast<std::size_t>(spec.partition_count()), 1);
        return res;
    }

    Model<T>& out = res.model;
    out.spec = spec;
    out.spec.grid.factors.assign(new_factors.begin(), new_factors.end());
    // derive hi from the old delta so the old partitions keep exact ranges
    out.spec.grid.bounds = new_bounds;
    for (index d = 0; d < n; ++d)
        out.spec.grid.bounds.hi[static_cast<std::size_t>(d)] =
            spec.grid.bounds.lo[static_cast<std::size_t>(d)] +
            static_cast<double>(new_factors[static_cast<std::size_t>(d)]) * spec.grid.delta(d);

    const index K_new = out.spec.partition_count();
    out.present = CropMask::all(K_new);
    out.weights.global = model.weights.global;
    out.weights.merge = model.weights.merge;

    res.freeze_old.local_slice.assign(static_cast<std::size_t>(K_new), 0);

    const index D = spec.depth;
    out.weights.local.resize(static_cast<std::size_t>(D));
    for (index s = 0; s < D; ++s) {
        const auto su = static_cast<std::size_t>(s);
        const auto& src = model.weights.local[su];
        auto& dst = out.weights.local[su];
        dst.w = BatchedMat<T>(K_new, src.w.rows, src.w.cols);
        dst.b = BatchedMat<T>(K_new, src.b.rows, src.b.cols);
        const T bound = extend_layer_bound<T>(src.w.cols, spec.omega, s == 0);
        for (index k = 0; k < K_new; ++k) {
            auto cell = unflatten(out.spec.grid, k);
            bool is_old = true;
            std::vector<std::uint32_t> src_cell(cell.size());
            for (index d = 0; d < n; ++d) {
                const auto du = static_cast<std::size_t>(d);
                const auto c_old = static_cast<index>(spec.grid.factors[du]);
                const auto j = static_cast<index>(cell[du]);
                if (j >= c_old) is_old = false;
                const index sj = rule == ExtendInit::clamp ? std::min(j, c_old - 1)
                                                           : reflect_source(j, c_old);
                src_cell[du] = static_cast<std::uint32_t>(sj);
            }
            if (is_old && s == 0)
                res.freeze_old.local_slice[static_cast<std::size_t>(k)] = 1;
            if (!is_old && rule == ExtendInit::random) {
                auto w = uniform<T>(rng, -bound, bound, src.w.rows, src.w.cols);
                std::memcpy(dst.w.slice(k), w.data.data(), sizeof(T) * src.w.slice_size());
                continue;  // biases stay zero
            }
            const index from = flat_index(spec.grid, src_cell);
            std::memcpy(dst.w.slice(k), src.w.slice(from), sizeof(T) * src.w.slice_size());
            std::memcpy(dst.b.slice(k), src.b.slice(from), sizeof(T) * src.b.slice_size());
        }
    }
    return res;
}

template ExtendResult<float> extend<float>(const Model<float>&, std::span<const std::uint32_t>,
                                           const Bounds&, Rng&, ExtendInit);
template ExtendResult<double> extend<double>(const Model<double>&, std::span<const std::uint32_t>,
                                             const Bounds&, Rng&, ExtendInit);

template <typename T>
void renormalize_bounds(Model<T>& model, const Bounds& new_bounds) {
    new_bounds.validate();
    if (new_bounds.dims() != model.spec.grid.dims())
        throw std::invalid_argument("renormalize: bounds dimensionality differs from model");
    model.spec.grid.bounds = new_bounds;
}

template void renormalize_bounds<float>(Model<float>&, const Bounds&);
template void renormalize_bounds<double>(Model<double>&, const Bounds&);

// ---------------------------------------------------------------------------
// drop-spec parsing
// ---------------------------------------------------------------------------
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

index parse_int(const std::string& s) {
    std::size_t used = 0;
    index v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("drop: '" + s + "' is not an index");
    }
    if (used != s.size() || v < 0)
        throw std::invalid_argument("drop: '" + s + "' is not a non-negative index");
    return v;
}

}  // namespace

std::vector<index> parse_drop_spec(const std::string& spec, const PartitionGrid& grid) {
    if (spec.empty()) throw std::invalid_argument("drop: empty selection");
    std::set<index> out;
    if (spec.find("..") == std::string::npos) {
        for (const auto& tok : split(spec, ',')) {
            const index k = parse_int(tok);
            if (k >= grid.partition_count())
                throw std::out_of_range("drop: partition " + tok + " out of range");
            out.insert(k);
        }
        return {out.begin(), out.end()};
    }

    const index n = grid.dims();
    for (const auto& term : split(spec, ';')) {
        const auto dims = split(term, ',');
        if (static_cast<index>(dims.size()) != n)
            throw std::invalid_argument("drop: rectangle '" + term + "' needs " +
                                        std::to_string(n) + " comma-separated ranges");
        std::vector<std::pair<index, index>> ranges;
        for (index d = 0; d < n; ++d) {
            const auto& part = dims[static_cast<std::size_t>(d)];
            const auto dots = part.find("..");
            index lo, hi;
            if (dots == std::string::npos) {
                lo = hi = parse_int(part);
            } else {
                lo = parse_int(part.substr(0, dots));
                hi = parse_int(part.substr(dots + 2));
            }
            const auto limit = static_cast<index>(grid.factors[static_cast<std::size_t>(d)]);
            if (lo > hi || hi >= limit)
                throw std::out_of_range("drop: range '" + part + "' out of bounds for dimension " +
                                        std::to_string(d));
            ranges.emplace_back(lo, hi);
        }
        // enumerate the rectangle
        std::vector<index> cell(static_cast<std::size_t>(n));
        for (index d = 0; d < n; ++d) cell[static_cast<std::size_t>(d)] = ranges[static_cast<std::size_t>(d)].first;
        for (;;) {
            std::vector<std::uint32_t> ucell(cell.begin(), cell.end());
            out.insert(flat_index(grid, ucell));
            index d = n - 1;
            for (; d >= 0; --d) {
                auto& c = cell[static_cast<std::size_t>(d)];
                if (++c <= ranges[static_cast<std::size_t>(d)].second) break;
                c = ranges[static_cast<std::size_t>(d)].first;
            }
            if (d < 0) break;
        }
    }
    return {out.begin(), out.end()};
}

}  // namespace lginr
