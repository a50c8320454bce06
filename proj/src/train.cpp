#include "lginr/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace lginr {

void TrainConfig::validate() const {
    if (iters < 0) throw std::invalid_argument("train: iters must be >= 0");
    if (!(lr > 0)) throw std::invalid_argument("train: lr must be > 0");
    if (!(sample_fraction > 0 && sample_fraction <= 1))
        throw std::invalid_argument("train: sample fraction must lie in (0, 1]");
    if (log_every < 1) throw std::invalid_argument("train: log_every must be >= 1");
}

template <typename T>
AdamState<T> make_adam_state(const WeightSet<T>& weights) {
    AdamState<T> st;
    st.m = zeros_like(weights);
    st.v = zeros_like(weights);
    return st;
}
template AdamState<float> make_adam_state<float>(const WeightSet<float>&);
template AdamState<double> make_adam_state<double>(const WeightSet<double>&);

template <typename T>
void adamw_step(WeightSet<T>& weights, const WeightSet<T>& grads, AdamState<T>& state,
                const TrainConfig& cfg, const FreezeMask* freeze) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T eps = static_cast<T>(cfg.eps);
    const T wd = static_cast<T>(cfg.weight_decay);
    const T corr1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
    const T corr2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
    const T lr_local = static_cast<T>(cfg.lr);
    const T lr_global = static_cast<T>(cfg.global_lr >= 0 ? cfg.global_lr : cfg.lr);

    visit_params(weights, grads, state.m, state.v,
                 [&](ParamGroup group, index slice, T* w, const T* g, T* m, T* v,
                     std::size_t count) {
                     if (freeze) {
                         if (group == ParamGroup::global_net && freeze->global_net) return;
                         if (group == ParamGroup::merge_op && freeze->merge_op) return;
                         if (group == ParamGroup::local_slice && !freeze->local_slice.empty() &&
                             static_cast<std::size_t>(slice) < freeze->local_slice.size() &&
                             freeze->local_slice[static_cast<std::size_t>(slice)])
                             return;
                     }
                     const T lr = group == ParamGroup::local_slice ? lr_local : lr_global;
                     for (std::size_t i = 0; i < count; ++i) {
                         if (!std::isfinite(g[i]))
                             throw std::invalid_argument("adamw: non-finite gradient");
                         m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                         v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                         const T mhat = m[i] * corr1;
                         const T vhat = v[i] * corr2;
                         w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * w[i]);
                     }
                 });
}
template void adamw_step<float>(WeightSet<float>&, const WeightSet<float>&, AdamState<float>&,
                                const TrainConfig&, const FreezeMask*);
template void adamw_step<double>(WeightSet<double>&, const WeightSet<double>&, AdamState<double>&,
                                 const TrainConfig&, const FreezeMask*);

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------
PartitionIndex build_partition_index(const Signal& signal, const PartitionGrid& grid) {
    if (signal.dims() != grid.dims())
        throw std::invalid_argument("sample: signal dimensionality differs from grid");
    PartitionIndex pix;
    pix.points.resize(static_cast<std::size_t>(grid.partition_count()));
    auto coords = grid_coords(signal.resolution);
    for (index p = 0; p < coords.rows; ++p) {
        const index k = locate_flat(grid, coords.row(p));
        pix.points[static_cast<std::size_t>(k)].push_back(p);
    }
    return pix;
}

namespace {

template <typename T>
Batch<T> assemble_batch(const Signal& signal, const Mat<float>& coords,
                        const std::vector<index>& point_ids,
                        const std::vector<std::uint32_t>& pids) {
    const index n = signal.dims();
    const index m = signal.channels;
    const index B = static_cast<index>(point_ids.size());
    Batch<T> b;
    b.coords = Mat<T>(B, n);
    b.targets = Mat<T>(B, m);
    b.pids = pids;
    for (index i = 0; i < B; ++i) {
        const index p = point_ids[static_cast<std::size_t>(i)];
        const float* src = coords.row(p);
        for (index d = 0; d < n; ++d) b.coords(i, d) = static_cast<T>(src[d]);
        for (index c = 0; c < m; ++c)
            b.targets(i, c) = static_cast<T>(signal.values[static_cast<std::size_t>(p * m + c)]);
    }
    return b;
}

}  // namespace

template <typename T>
Batch<T> sample_batch_indexed(const Signal& signal, const PartitionGrid& grid,
                              const PartitionIndex& pix, const Mat<float>& coords,
                              double fraction, Rng& rng, const CropMask* present) {
    if (!(fraction > 0 && fraction <= 1))
        throw std::invalid_argument("sample: fraction must lie in (0, 1]");
    const index K = grid.partition_count();

    auto is_present = [&](index k) {
        return !present || present->keep[static_cast<std::size_t>(k)] != 0;
    };

    std::vector<index> point_ids;
    std::vector<std::uint32_t> pids;

    if (fraction == 1.0) {
        for (index k = 0; k < K; ++k) {
            if (!is_present(k)) continue;
            for (index p : pix.points[static_cast<std::size_t>(k)]) {
                point_ids.push_back(p);
                pids.push_back(static_cast<std::uint32_t>(k));
            }
        }
    } else {
        index min_count = std::numeric_limits<index>::max();
        for (index k = 0; k < K; ++k)
            if (is_present(k))
                min_count = std::min(
                    min_count, static_cast<index>(pix.points[static_cast<std::size_t>(k)].size()));
        const index per = static_cast<index>(std::floor(
            fraction * static_cast<double>(min_count == std::numeric_limits<index>::max() ? 0 : min_count)));
        if (per < 1) throw std::invalid_argument("sample: empty batch, fraction too small");
        std::vector<index> pool;
        for (index k = 0; k < K; ++k) {
            if (!is_present(k)) continue;
            pool = pix.points[static_cast<std::size_t>(k)];
            // partial Fisher-Yates: draw `per` points without replacement
            const index count = static_cast<index>(pool.size());
            for (index i = 0; i < per; ++i) {
                const index j =
                    i + static_cast<index>(rng.below(static_cast<std::uint64_t>(count - i)));
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
                point_ids.push_back(pool[static_cast<std::size_t>(i)]);
                pids.push_back(static_cast<std::uint32_t>(k));
            }
        }
    }
    if (point_ids.empty()) throw std::invalid_argument("sample: empty batch");
    return assemble_batch<T>(signal, coords, point_ids, pids);
}

template <typename T>
Batch<T> sample_batch(const Signal& signal, const PartitionGrid& grid, double fraction, Rng& rng,
                      const CropMask* present) {
    auto pix = build_partition_index(signal, grid);
    auto coords = grid_coords(signal.resolution);
    return sample_batch_indexed<T>(signal, grid, pix, coords, fraction, rng, present);
}

template Batch<float> sample_batch<float>(const Signal&, const PartitionGrid&, double, Rng&,
                                          const CropMask*);
template Batch<double> sample_batch<double>(const Signal&, const PartitionGrid&, double, Rng&,
                                            const CropMask*);
template Batch<float> sample_batch_indexed<float>(const Signal&, const PartitionGrid&,
                                                  const PartitionIndex&, const Mat<float>&, double,
                                                  Rng&, const CropMask*);
template Batch<double> sample_batch_indexed<double>(const Signal&, const PartitionGrid&,
                                                    const PartitionIndex&, const Mat<float>&,
                                                    double, Rng&, const CropMask*);

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------
template <typename T>
FitResult fit(Model<T>& model, const Signal& signal, const TrainConfig& cfg,
              const FreezeMask* freeze) {
    cfg.validate();
    signal.validate();
    if (signal.channels != model.spec.out_dim)
        throw std::invalid_argument("fit: signal channels differ from model out_dim");

    const auto t0 = std::chrono::steady_clock::now();
    auto pix = build_partition_index(signal, model.spec.grid);
    for (index k = 0; k < model.spec.partition_count(); ++k)
        if (model.present.keep[static_cast<std::size_t>(k)] &&
            pix.points[static_cast<std::size_t>(k)].empty())
            throw std::invalid_argument(
                "fit: partition " + std::to_string(k) +
                " contains no grid points; partition factors exceed the signal resolution");

    Rng rng(cfg.seed);
    auto state = make_adam_state(model.weights);
    FitResult res;
    res.final_loss = std::numeric_limits<double>::quiet_NaN();

    const auto coords = grid_coords(signal.resolution);
    const bool full_grid = cfg.sample_fraction == 1.0;
    Batch<T> full;
    if (full_grid)
        full = sample_batch_indexed<T>(signal, model.spec.grid, pix, coords, 1.0, rng,
                                       &model.present);

    Batch<T> scratch;
    for (index it = 1; it <= cfg.iters; ++it) {
        if (!full_grid)
            scratch = sample_batch_indexed<T>(signal, model.spec.grid, pix, coords,
                                              cfg.sample_fraction, rng, &model.present);
        const Batch<T>& batch = full_grid ? full : scratch;
        auto bw = backward(model, batch.coords, batch.pids, batch.targets);
        if (!std::isfinite(bw.loss)) throw divergence_error(it);
        adamw_step(model.weights, bw.grads, state, cfg, freeze);
        res.final_loss = bw.loss;
        if (it % cfg.log_every == 0 || it == cfg.iters) {
            const double mse01 = bw.loss / 4.0;
            res.history.push_back({it, mse01, mse01 > 0 ? 10.0 * std::log10(1.0 / mse01)
                                                        : std::numeric_limits<double>::infinity()});
        }
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

template FitResult fit<float>(Model<float>&, const Signal&, const TrainConfig&, const FreezeMask*);
template FitResult fit<double>(Model<double>&, const Signal&, const TrainConfig&,
                               const FreezeMask*);

}  // namespace lginr
