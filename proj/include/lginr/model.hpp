#pragma once

#include <string>
#include <vector>

#include "lginr/partition.hpp"
#include "lginr/tensors.hpp"

namespace lginr {

enum class ModelKind { siren, spp, lgs };
enum class MergeKind { concat_fc, fc_add };

const char* to_string(ModelKind k);
const char* to_string(MergeKind k);
ModelKind model_kind_from_string(const std::string& s);
MergeKind merge_kind_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Architecture description.
//
// depth counts the local/backbone layers including the linear output layer;
// the global sub-network of an lgs has depth-1 sine layers and never emits
// signal values. The shared merge stage follows every sine stage: with
// concat_fc it is sin(omega * (W [L;G] + b)), with fc_add it is
// L + sin(omega * (W G + b)). Setting omega_in_merge to false evaluates the
// merge sine at unit frequency instead, for comparison runs.
// ---------------------------------------------------------------------------
struct ModelSpec {
    ModelKind kind = ModelKind::siren;
    index in_dim = 0;
    index out_dim = 0;
    index depth = 0;
    index local_hidden = 0;
    index global_hidden = 0;  // 0 unless kind == lgs
    float omega = 30.f;
    MergeKind merge = MergeKind::concat_fc;
    bool omega_in_merge = true;
    PartitionGrid grid;

    index partition_count() const { return grid.partition_count(); }
    void validate() const;
};

// Keep/drop flag per partition, aligned with the original flat ordering.
struct CropMask {
    std::vector<std::uint8_t> keep;

    static CropMask all(index partitions);
    index kept_count() const;
    // flat partition id -> position among kept slices, -1 when cropped
    std::vector<index> slots() const;
};

template <typename T>
struct Dense {
    Mat<T> w;  // out x in
    Mat<T> b;  // 1 x out
};

template <typename T>
struct BatchedDense {
    BatchedMat<T> w;  // kept x out x in
    BatchedMat<T> b;  // kept x 1 x out
};

template <typename T>
struct WeightSet {
    std::vector<Dense<T>> global;        // depth-1 stages, lgs only
    Dense<T> merge;                      // shared merge stage, lgs only
    std::vector<BatchedDense<T>> local;  // depth stacks, one slice per kept partition
};

template <typename T>
struct Model {
    ModelSpec spec;
    CropMask present;
    WeightSet<T> weights;
};

// ---------------------------------------------------------------------------
// Parameter accounting (weights + biases).
// ---------------------------------------------------------------------------
struct ParamBreakdown {
    index local_per_partition = 0;
    index local_total = 0;  // over kept partitions
    index global_net = 0;
    index merge = 0;
    index total = 0;
};

ParamBreakdown param_breakdown(const ModelSpec& spec, index kept_partitions);
index param_count(const ModelSpec& spec);
template <typename T>
index param_count(const Model<T>& model);

// ---------------------------------------------------------------------------
// Initialization: first layers (everything fed raw coordinates) draw from
// U(-1/fan_in, 1/fan_in); deeper layers and the merge from
// U(-sqrt(6/fan_in)/omega, sqrt(6/fan_in)/omega); biases start at zero.
// Draw order is fixed: global stages, merge, then local stacks stage by stage
// and slice by slice.
// ---------------------------------------------------------------------------
template <typename T>
Model<T> init(const ModelSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Batched evaluation. coords is B x n with one sample per row, pids holds the
// flat partition id of each row (from locate_all). Throws if a sample falls
// outside the grid bounds or in a cropped partition.
// ---------------------------------------------------------------------------

// Samples regrouped contiguously by partition, ascending flat id, original
// order within a partition.
struct Segment {
    index slot;   // kept-slice index of the partition
    index begin;  // first grouped column
    index width;
};
struct Grouping {
    std::vector<index> order;  // grouped column -> original row
    std::vector<Segment> segs;
    index batch() const { return static_cast<index>(order.size()); }
};
Grouping group_by_partition(const std::vector<std::uint32_t>& pids, const CropMask& present);

// Grouped intermediate state; kept by backward and exposed for inspection.
// Columns follow grouping.order; activations are recomputed from the cached
// pre-activations where needed.
template <typename T>
struct ForwardTrace {
    Grouping grouping;
    Mat<T> x;                        // n x B grouped inputs
    std::vector<Mat<T>> local_pre;   // depth-1 sine-stage pre-activations
    std::vector<Mat<T>> global_pre;  // lgs only
    std::vector<Mat<T>> merge_pre;   // lgs only
    std::vector<Mat<T>> stage_out;   // input to the next local stage (merge output for lgs)
    Mat<T> y;                        // m x B grouped outputs
    Mat<T> out;                      // B x m in original row order
};

template <typename T>
ForwardTrace<T> forward_trace(const Model<T>& model, const Mat<T>& coords,
                              const std::vector<std::uint32_t>& pids);

template <typename T>
Mat<T> forward(const Model<T>& model, const Mat<T>& coords, const std::vector<std::uint32_t>& pids);

// Mean squared error over all outputs plus gradients for every weight tensor.
// Local gradients only accumulate from samples of the owning partition; merge
// and global gradients accumulate across the whole batch.
template <typename T>
struct BackwardResult {
    double loss = 0;
    WeightSet<T> grads;
};

template <typename T>
BackwardResult<T> backward(const Model<T>& model, const Mat<T>& coords,
                           const std::vector<std::uint32_t>& pids, const Mat<T>& targets);

// ---------------------------------------------------------------------------
// Structural helpers shared by the optimizer and the editing operations.
// ---------------------------------------------------------------------------
template <typename T>
WeightSet<T> zeros_like(const WeightSet<T>& w);

enum class ParamGroup { global_net, merge_op, local_slice };

// Invokes fn(group, slice /* -1 unless local */, w, g, m, v, count) for every
// parameter tensor, local stacks sliced per partition.
template <typename T, typename Fn>
void visit_params(WeightSet<T>& w, const WeightSet<T>& g, WeightSet<T>& m, WeightSet<T>& v,
                  Fn&& fn) {
    for (std::size_t i = 0; i < w.global.size(); ++i) {
        fn(ParamGroup::global_net, index{-1}, w.global[i].w.data.data(), g.global[i].w.data.data(),
           m.global[i].w.data.data(), v.global[i].w.data.data(), w.global[i].w.data.size());
        fn(ParamGroup::global_net, index{-1}, w.global[i].b.data.data(), g.global[i].b.data.data(),
           m.global[i].b.data.data(), v.global[i].b.data.data(), w.global[i].b.data.size());
    }
    if (w.merge.w.size() > 0) {
        fn(ParamGroup::merge_op, index{-1}, w.merge.w.data.data(), g.merge.w.data.data(),
           m.merge.w.data.data(), v.merge.w.data.data(), w.merge.w.data.size());
        fn(ParamGroup::merge_op, index{-1}, w.merge.b.data.data(), g.merge.b.data.data(),
           m.merge.b.data.data(), v.merge.b.data.data(), w.merge.b.data.size());
    }
    for (std::size_t s = 0; s < w.local.size(); ++s) {
        auto& lw = w.local[s];
        for (index k = 0; k < lw.w.batch; ++k) {
            fn(ParamGroup::local_slice, k, lw.w.slice(k), g.local[s].w.slice(k),
               m.local[s].w.slice(k), v.local[s].w.slice(k),
               static_cast<std::size_t>(lw.w.slice_size()));
            fn(ParamGroup::local_slice, k, lw.b.slice(k), g.local[s].b.slice(k),
               m.local[s].b.slice(k), v.local[s].b.slice(k),
               static_cast<std::size_t>(lw.b.slice_size()));
        }
    }
}

}  // namespace lginr
