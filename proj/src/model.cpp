#include "lginr/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lginr {

const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::siren: return "siren";
        case ModelKind::spp: return "spp";
        case ModelKind::lgs: return "lgs";
    }
    return "?";
}

const char* to_string(MergeKind k) {
    return k == MergeKind::concat_fc ? "concat_fc" : "fc_add";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "siren") return ModelKind::siren;
    if (s == "spp") return ModelKind::spp;
    if (s == "lgs") return ModelKind::lgs;
    throw std::invalid_argument("unknown architecture '" + s + "' (expected siren, spp or lgs)");
}

MergeKind merge_kind_from_string(const std::string& s) {
    if (s == "concat_fc") return MergeKind::concat_fc;
    if (s == "fc_add") return MergeKind::fc_add;
    throw std::invalid_argument("unknown merge operator '" + s + "' (expected concat_fc or fc_add)");
}

void ModelSpec::validate() const {
    grid.validate();
    if (in_dim != grid.dims())
        throw std::invalid_argument("spec: in_dim differs from grid dimensionality");
    if (out_dim < 1) throw std::invalid_argument("spec: out_dim must be >= 1");
    if (depth < 2) throw std::invalid_argument("spec: depth must be >= 2");
    if (local_hidden < 1) throw std::invalid_argument("spec: local hidden dim must be >= 1");
    if (!(omega > 0.f)) throw std::invalid_argument("spec: omega must be > 0");
    if (kind == ModelKind::lgs) {
        if (global_hidden < 1)
            throw std::invalid_argument("spec: lgs needs a global hidden dim >= 1");
    } else {
        if (global_hidden != 0)
            throw std::invalid_argument("spec: only lgs has a global sub-network");
        if (kind == ModelKind::siren && partition_count() != 1)
            throw std::invalid_argument("spec: siren requires all partition factors == 1");
    }
}

CropMask CropMask::all(index partitions) {
    CropMask m;
    m.keep.assign(static_cast<std::size_t>(partitions), 1);
    return m;
}

index CropMask::kept_count() const {
    index n = 0;
    for (auto b : keep) n += b ? 1 : 0;
    return n;
}

std::vector<index> CropMask::slots() const {
    std::vector<index> s(keep.size(), -1);
    index next = 0;
    for (std::size_t k = 0; k < keep.size(); ++k)
        if (keep[k]) s[k] = next++;
    return s;
}

// ---------------------------------------------------------------------------
// parameter accounting
// ---------------------------------------------------------------------------
namespace {

index dense_params(index in, index out) { return in * out + out; }

index local_params_per_partition(const ModelSpec& s) {
    return dense_params(s.in_dim, s.local_hidden) +
           (s.depth - 2) * dense_params(s.local_hidden, s.local_hidden) +
           dense_params(s.local_hidden, s.out_dim);
}

}  // namespace

ParamBreakdown param_breakdown(const ModelSpec& spec, index kept_partitions) {
    ParamBreakdown b;
    b.local_per_partition = local_params_per_partition(spec);
    b.local_total = kept_partitions * b.local_per_partition;
    if (spec.kind == ModelKind::lgs) {
        b.global_net = dense_params(spec.in_dim, spec.global_hidden) +
                       (spec.depth - 2) * dense_params(spec.global_hidden, spec.global_hidden);
        const index merge_in =
            spec.merge == MergeKind::concat_fc ? spec.local_hidden + spec.global_hidden
                                               : spec.global_hidden;
        b.merge = dense_params(merge_in, spec.local_hidden);
    }
    b.total = b.local_total + b.global_net + b.merge;
    return b;
}

index param_count(const ModelSpec& spec) {
    return param_breakdown(spec, spec.partition_count()).total;
}

template <typename T>
index param_count(const Model<T>& model) {
    return param_breakdown(model.spec, model.present.kept_count()).total;
}
template index param_count<float>(const Model<float>&);
template index param_count<double>(const Model<double>&);

// ---------------------------------------------------------------------------
// init
// ---------------------------------------------------------------------------
namespace {

template <typename T>
T layer_bound(index fan_in, float omega, bool first) {
    if (first) return T(1) / static_cast<T>(fan_in);
    return static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in)) /
                          static_cast<double>(omega));
}

}  // namespace

template <typename T>
Model<T> init(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    Model<T> m;
    m.spec = spec;
    const index K = spec.partition_count();
    m.present = CropMask::all(K);

    const index D = spec.depth;
    const index hl = spec.local_hidden;

    if (spec.kind == ModelKind::lgs) {
        const index hg = spec.global_hidden;
        m.weights.global.resize(static_cast<std::size_t>(D - 1));
        for (index s = 0; s < D - 1; ++s) {
            const index in = s == 0 ? spec.in_dim : hg;
            const T bound = layer_bound<T>(in, spec.omega, s == 0);
            auto& layer = m.weights.global[static_cast<std::size_t>(s)];
            layer.w = uniform<T>(rng, -bound, bound, hg, in);
            layer.b = Mat<T>::zeros(1, hg);
        }
        const index merge_in = spec.merge == MergeKind::concat_fc ? hl + hg : hg;
        const T mb = layer_bound<T>(merge_in, spec.omega, false);
        m.weights.merge.w = uniform<T>(rng, -mb, mb, hl, merge_in);
        m.weights.merge.b = Mat<T>::zeros(1, hl);
    }

    m.weights.local.resize(static_cast<std::size_t>(D));
    for (index s = 0; s < D; ++s) {
        const index in = s == 0 ? spec.in_dim : hl;
        const index out = s == D - 1 ? spec.out_dim : hl;
        const T bound = layer_bound<T>(in, spec.omega, s == 0);
        auto& stack = m.weights.local[static_cast<std::size_t>(s)];
        stack.w = uniform_batched<T>(rng, -bound, bound, K, out, in);
        stack.b = BatchedMat<T>(K, 1, out);
    }
    return m;
}

template Model<float> init<float>(const ModelSpec&, Rng&);
template Model<double> init<double>(const ModelSpec&, Rng&);

// ---------------------------------------------------------------------------
// grouping
// ---------------------------------------------------------------------------
Grouping group_by_partition(const std::vector<std::uint32_t>& pids, const CropMask& present) {
    const index K = static_cast<index>(present.keep.size());
    std::vector<index> counts(static_cast<std::size_t>(K), 0);
    for (auto id : pids) {
        if (static_cast<index>(id) >= K)
            throw std::out_of_range("forward: partition id out of range");
        if (!present.keep[id])
            throw std::invalid_argument("forward: coordinate maps to a cropped partition " +
                                        std::to_string(id));
        ++counts[id];
    }
    auto slots = present.slots();
    Grouping g;
    g.order.resize(pids.size());
    std::vector<index> offset(static_cast<std::size_t>(K), 0);
    index pos = 0;
    for (index k = 0; k < K; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) continue;
        g.segs.push_back({slots[static_cast<std::size_t>(k)], pos,
                          counts[static_cast<std::size_t>(k)]});
        offset[static_cast<std::size_t>(k)] = pos;
        pos += counts[static_cast<std::size_t>(k)];
    }
    for (std::size_t i = 0; i < pids.size(); ++i)
        g.order[static_cast<std::size_t>(offset[pids[i]]++)] = static_cast<index>(i);
    return g;
}

// ---------------------------------------------------------------------------
// locally connected stage kernels: per-segment products on grouped matrices
// ---------------------------------------------------------------------------
namespace {

// out[:, seg] = W[slot] * in[:, seg] + b[slot]
template <typename T>
void lc_forward(const BatchedDense<T>& stack, const Mat<T>& in, const std::vector<Segment>& segs,
                Mat<T>& out) {
    parallel_for(static_cast<index>(segs.size()), 1, [&](index s0, index s1) {
        for (index s = s0; s < s1; ++s) {
            const Segment& seg = segs[static_cast<std::size_t>(s)];
            kern::mm_nn(stack.w.slice(seg.slot), in.data.data() + seg.begin,
                        out.data.data() + seg.begin, stack.w.rows, stack.w.cols, seg.width,
                        stack.w.cols, in.cols, out.cols, false);
            const T* b = stack.b.slice(seg.slot);
            for (index i = 0; i < out.rows; ++i) {
                T* oi = out.row(i) + seg.begin;
                for (index j = 0; j < seg.width; ++j) oi[j] += b[i];
            }
        }
    });
}

// Weight/bias gradients into the owning slices, plus optionally the gradient
// w.r.t. the stage input. Each slice is touched by at most one segment.
template <typename T>
void lc_backward(const BatchedDense<T>& stack, const Mat<T>& in, const Mat<T>& dz,
                 const std::vector<Segment>& segs, BatchedDense<T>& grad, Mat<T>* din) {
    parallel_for(static_cast<index>(segs.size()), 1, [&](index s0, index s1) {
        for (index s = s0; s < s1; ++s) {
            const Segment& seg = segs[static_cast<std::size_t>(s)];
            Mat<T> in_t(seg.width, in.rows);
            for (index i = 0; i < in.rows; ++i) {
                const T* src = in.row(i) + seg.begin;
                for (index j = 0; j < seg.width; ++j) in_t(j, i) = src[j];
            }
            kern::mm_nn(dz.data.data() + seg.begin, in_t.data.data(), grad.w.slice(seg.slot),
                        dz.rows, seg.width, in.rows, dz.cols, in_t.cols, in.rows, false);
            T* gb = grad.b.slice(seg.slot);
            for (index i = 0; i < dz.rows; ++i) {
                const T* zi = dz.row(i) + seg.begin;
                T acc = T(0);
                for (index j = 0; j < seg.width; ++j) acc += zi[j];
                gb[i] += acc;
            }
            if (din)
                kern::mm_tn(stack.w.slice(seg.slot), dz.data.data() + seg.begin,
                            din->data.data() + seg.begin, stack.w.cols, stack.w.rows, seg.width,
                            stack.w.cols, dz.cols, din->cols, false);
        }
    });
}

template <typename T>
Mat<T> dense_forward(const Dense<T>& layer, const Mat<T>& in) {
    Mat<T> z = matmul(layer.w, in);
    add_col_bias(z, layer.b, 0, z.cols);
    return z;
}

template <typename T>
Mat<T> apply_sin(T scale, const Mat<T>& z) {
    Mat<T> a(z.rows, z.cols);
    sin_scaled(scale, z.data.data(), a.data.data(), z.size());
    return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------
template <typename T>
ForwardTrace<T> forward_trace(const Model<T>& model, const Mat<T>& coords,
                              const std::vector<std::uint32_t>& pids) {
    const ModelSpec& spec = model.spec;
    if (coords.cols != spec.in_dim)
        throw std::invalid_argument("forward: coordinate dimensionality differs from model");
    if (coords.rows != static_cast<index>(pids.size()))
        throw std::invalid_argument("forward: one partition id per coordinate required");

    ForwardTrace<T> t;
    t.grouping = group_by_partition(pids, model.present);
    const index B = t.grouping.batch();
    const index n = spec.in_dim;
    const index D = spec.depth;
    const index hl = spec.local_hidden;
    const index hg = spec.global_hidden;
    const bool lgs = spec.kind == ModelKind::lgs;
    const T omega = static_cast<T>(spec.omega);
    const T omega_m = spec.omega_in_merge ? omega : T(1);

    for (index r = 0; r < coords.rows; ++r) {
        const T* p = coords.row(r);
        for (index d = 0; d < n; ++d) {
            const double v = static_cast<double>(p[d]);
            if (!(v >= spec.grid.bounds.lo[static_cast<std::size_t>(d)] &&
                  v <= spec.grid.bounds.hi[static_cast<std::size_t>(d)]))
                throw std::out_of_range("forward: coordinate outside grid bounds");
        }
    }
    t.x = Mat<T>(n, B);
    for (index c = 0; c < B; ++c) {
        const T* p = coords.row(t.grouping.order[static_cast<std::size_t>(c)]);
        for (index d = 0; d < n; ++d) t.x(d, c) = p[d];
    }

    t.local_pre.resize(static_cast<std::size_t>(D - 1));
    t.stage_out.resize(static_cast<std::size_t>(D - 1));
    if (lgs) {
        t.global_pre.resize(static_cast<std::size_t>(D - 1));
        t.merge_pre.resize(static_cast<std::size_t>(D - 1));
    }

    const Mat<T>* lp = &t.x;  // local path input
    Mat<T> g_cur;             // lgs: sine output of the current global stage
    for (index s = 0; s < D - 1; ++s) {
        const auto su = static_cast<std::size_t>(s);
        Mat<T>& zl = t.local_pre[su];
        zl = Mat<T>(hl, B);
        lc_forward(model.weights.local[su], *lp, t.grouping.segs, zl);

        if (lgs) {
            const Mat<T>& gp = s == 0 ? t.x : g_cur;
            t.global_pre[su] = dense_forward(model.weights.global[su], gp);
            Mat<T> g_next = apply_sin(omega, t.global_pre[su]);
            Mat<T> l = apply_sin(omega, zl);
            Mat<T>& zm = t.merge_pre[su];
            if (spec.merge == MergeKind::concat_fc) {
                Mat<T> cat(hl + hg, B);
                std::memcpy(cat.data.data(), l.data.data(), sizeof(T) * l.data.size());
                std::memcpy(cat.data.data() + l.data.size(), g_next.data.data(),
                            sizeof(T) * g_next.data.size());
                zm = matmul(model.weights.merge.w, cat);
                add_col_bias(zm, model.weights.merge.b, 0, B);
                t.stage_out[su] = apply_sin(omega_m, zm);
            } else {
                zm = matmul(model.weights.merge.w, g_next);
                add_col_bias(zm, model.weights.merge.b, 0, B);
                Mat<T> ms = apply_sin(omega_m, zm);
                t.stage_out[su] = Mat<T>(hl, B);
                ew_add(l.data.data(), ms.data.data(), t.stage_out[su].data.data(), ms.size());
            }
            g_cur = std::move(g_next);
        } else {
            t.stage_out[su] = apply_sin(omega, zl);
        }
        lp = &t.stage_out[su];
    }

    t.y = Mat<T>(spec.out_dim, B);
    lc_forward(model.weights.local[static_cast<std::size_t>(D - 1)], *lp, t.grouping.segs, t.y);

    t.out = Mat<T>(coords.rows, spec.out_dim);
    for (index c = 0; c < B; ++c) {
        T* dst = t.out.row(t.grouping.order[static_cast<std::size_t>(c)]);
        for (index i = 0; i < spec.out_dim; ++i) dst[i] = t.y(i, c);
    }
    return t;
}

template <typename T>
Mat<T> forward(const Model<T>& model, const Mat<T>& coords,
               const std::vector<std::uint32_t>& pids) {
    return forward_trace(model, coords, pids).out;
}

template ForwardTrace<float> forward_trace<float>(const Model<float>&, const Mat<float>&,
                                                  const std::vector<std::uint32_t>&);
template ForwardTrace<double> forward_trace<double>(const Model<double>&, const Mat<double>&,
                                                    const std::vector<std::uint32_t>&);
template Mat<float> forward<float>(const Model<float>&, const Mat<float>&,
                                   const std::vector<std::uint32_t>&);
template Mat<double> forward<double>(const Model<double>&, const Mat<double>&,
                                     const std::vector<std::uint32_t>&);

// ---------------------------------------------------------------------------
// structural helpers
// ---------------------------------------------------------------------------
template <typename T>
WeightSet<T> zeros_like(const WeightSet<T>& w) {
    WeightSet<T> z;
    z.global.resize(w.global.size());
    for (std::size_t i = 0; i < w.global.size(); ++i) {
        z.global[i].w = Mat<T>::zeros(w.global[i].w.rows, w.global[i].w.cols);
        z.global[i].b = Mat<T>::zeros(w.global[i].b.rows, w.global[i].b.cols);
    }
    z.merge.w = Mat<T>::zeros(w.merge.w.rows, w.merge.w.cols);
    z.merge.b = Mat<T>::zeros(w.merge.b.rows, w.merge.b.cols);
    z.local.resize(w.local.size());
    for (std::size_t i = 0; i < w.local.size(); ++i) {
        z.local[i].w = BatchedMat<T>(w.local[i].w.batch, w.local[i].w.rows, w.local[i].w.cols);
        z.local[i].b = BatchedMat<T>(w.local[i].b.batch, w.local[i].b.rows, w.local[i].b.cols);
    }
    return z;
}

template WeightSet<float> zeros_like<float>(const WeightSet<float>&);
template WeightSet<double> zeros_like<double>(const WeightSet<double>&);

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------
template <typename T>
BackwardResult<T> backward(const Model<T>& model, const Mat<T>& coords,
                           const std::vector<std::uint32_t>& pids, const Mat<T>& targets) {
    const ModelSpec& spec = model.spec;
    if (targets.rows != coords.rows || targets.cols != spec.out_dim)
        throw std::invalid_argument("backward: target shape must be batch x out_dim");

    ForwardTrace<T> t = forward_trace(model, coords, pids);
    const index B = t.grouping.batch();
    const index D = spec.depth;
    const index hl = spec.local_hidden;
    const index hg = spec.global_hidden;
    const bool lgs = spec.kind == ModelKind::lgs;
    const T omega = static_cast<T>(spec.omega);
    const T omega_m = spec.omega_in_merge ? omega : T(1);

    BackwardResult<T> res;
    res.grads = zeros_like(model.weights);

    // grouped residual, loss, and dL/dY
    Mat<T> tg(spec.out_dim, B);
    for (index c = 0; c < B; ++c) {
        const T* src = targets.row(t.grouping.order[static_cast<std::size_t>(c)]);
        for (index i = 0; i < spec.out_dim; ++i) tg(i, c) = src[i];
    }
    const index total = B * spec.out_dim;
    Mat<T> dy(spec.out_dim, B);
    double loss = 0;
    const T scale = T(2) / static_cast<T>(total);
    for (index i = 0; i < total; ++i) {
        const T r = t.y.data[static_cast<std::size_t>(i)] - tg.data[static_cast<std::size_t>(i)];
        loss += static_cast<double>(r) * static_cast<double>(r);
        dy.data[static_cast<std::size_t>(i)] = scale * r;
    }
    res.loss = loss / static_cast<double>(total);

    const auto& segs = t.grouping.segs;
    const auto& weights = model.weights;

    // final linear stage
    const Mat<T>& last_in = D >= 2 ? t.stage_out[static_cast<std::size_t>(D - 2)] : t.x;
    Mat<T> dstage(hl, B);
    lc_backward(weights.local[static_cast<std::size_t>(D - 1)], last_in, dy, segs,
                res.grads.local[static_cast<std::size_t>(D - 1)], &dstage);

    Mat<T> dg_chain;  // gradient flowing into the next-lower global stage output
    for (index s = D - 2; s >= 0; --s) {
        const auto su = static_cast<std::size_t>(s);
        const Mat<T>& stage_in = s == 0 ? t.x : t.stage_out[su - 1];
        Mat<T> dl(hl, B);  // gradient w.r.t. L = sin(omega * local_pre)
        Mat<T> dg(hg, B);  // gradient w.r.t. G = sin(omega * global_pre), lgs only

        if (lgs) {
            // back through the merge
            Mat<T> dzm(hl, B);
            dsin_scaled(omega_m, t.merge_pre[su].data.data(), dstage.data.data(),
                        dzm.data.data(), dzm.size());
            Mat<T> g = apply_sin(omega, t.global_pre[su]);
            if (spec.merge == MergeKind::concat_fc) {
                Mat<T> l = apply_sin(omega, t.local_pre[su]);
                Mat<T> cat(hl + hg, B);
                std::memcpy(cat.data.data(), l.data.data(), sizeof(T) * l.data.size());
                std::memcpy(cat.data.data() + l.data.size(), g.data.data(),
                            sizeof(T) * g.data.size());
                Mat<T> cat_t = transposed(cat);
                matmul_into(dzm, cat_t, res.grads.merge.w, true);
                accum_row_sums(dzm, res.grads.merge.b, 0, B);
                Mat<T> dcat = matmul_tn(weights.merge.w, dzm);
                std::memcpy(dl.data.data(), dcat.data.data(), sizeof(T) * dl.data.size());
                std::memcpy(dg.data.data(), dcat.data.data() + dl.data.size(),
                            sizeof(T) * dg.data.size());
            } else {
                Mat<T> g_t = transposed(g);
                matmul_into(dzm, g_t, res.grads.merge.w, true);
                accum_row_sums(dzm, res.grads.merge.b, 0, B);
                dl = dstage;  // additive skip path
                dg = matmul_tn(weights.merge.w, dzm);
            }
            // add the contribution of the next global stage's input
            if (dg_chain.size() > 0)
                ew_add(dg.data.data(), dg_chain.data.data(), dg.data.data(), dg.size());

            // back through the global sine stage
            Mat<T> dzg(hg, B);
            dsin_scaled(omega, t.global_pre[su].data.data(), dg.data.data(), dzg.data.data(),
                        dzg.size());
            Mat<T> gin_t;
            if (s == 0) {
                gin_t = transposed(t.x);
            } else {
                Mat<T> g_prev = apply_sin(omega, t.global_pre[su - 1]);
                gin_t = transposed(g_prev);
            }
            matmul_into(dzg, gin_t, res.grads.global[su].w, true);
            accum_row_sums(dzg, res.grads.global[su].b, 0, B);
            if (s > 0) dg_chain = matmul_tn(weights.global[su].w, dzg);
        } else {
            dl = std::move(dstage);
        }

        // back through the local sine stage
        Mat<T> dzl(hl, B);
        dsin_scaled(omega, t.local_pre[su].data.data(), dl.data.data(), dzl.data.data(),
                    dzl.size());
        if (s > 0) {
            dstage = Mat<T>(hl, B);
            lc_backward(weights.local[su], stage_in, dzl, segs, res.grads.local[su], &dstage);
        } else {
            lc_backward(weights.local[su], stage_in, dzl, segs, res.grads.local[su],
                        static_cast<Mat<T>*>(nullptr));
        }
    }
    return res;
}

template BackwardResult<float> backward<float>(const Model<float>&, const Mat<float>&,
                                               const std::vector<std::uint32_t>&,
                                               const Mat<float>&);
template BackwardResult<double> backward<double>(const Model<double>&, const Mat<double>&,
                                                 const std::vector<std::uint32_t>&,
                                                 const Mat<double>&);

}  // namespace lginr
