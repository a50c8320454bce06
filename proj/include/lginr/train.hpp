#pragma once

#include <stdexcept>

#include "lginr/model.hpp"
#include "lginr/signalio.hpp"

namespace lginr {

struct TrainConfig {
    index iters = 0;
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double sample_fraction = 1.0;
    std::uint64_t seed = 0;
    index log_every = 100;
    // Optional separate rate for the global sub-network and merge operator;
    // negative means "use lr".
    double global_lr = -1.0;

    void validate() const;
};

// Per-slice freeze flags aligned with the kept local slices, plus switches for
// the shared groups. Empty local_slice means nothing local is frozen.
struct FreezeMask {
    std::vector<std::uint8_t> local_slice;
    bool global_net = false;
    bool merge_op = false;
};

template <typename T>
struct AdamState {
    WeightSet<T> m, v;
    index step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const WeightSet<T>& weights);

// Decoupled weight decay: w -= lr * (mhat / (sqrt(vhat) + eps) + wd * w).
template <typename T>
void adamw_step(WeightSet<T>& weights, const WeightSet<T>& grads, AdamState<T>& state,
                const TrainConfig& cfg, const FreezeMask* freeze = nullptr);

template <typename T>
struct Batch {
    Mat<T> coords;  // B x n
    std::vector<std::uint32_t> pids;
    Mat<T> targets;  // B x m
};

// Grid-point ids of every partition, in grid order.
struct PartitionIndex {
    std::vector<std::vector<index>> points;
};
PartitionIndex build_partition_index(const Signal& signal, const PartitionGrid& grid);

// fraction == 1 returns every present-partition point exactly once; otherwise
// draws floor(fraction * smallest-partition-point-count) coordinates uniformly
// without replacement from every present partition, so counts stay equal.
template <typename T>
Batch<T> sample_batch(const Signal& signal, const PartitionGrid& grid, double fraction, Rng& rng,
                      const CropMask* present = nullptr);

template <typename T>
Batch<T> sample_batch_indexed(const Signal& signal, const PartitionGrid& grid,
                              const PartitionIndex& pix, const Mat<float>& grid_points,
                              double fraction, Rng& rng, const CropMask* present);

struct HistoryEntry {
    index iter = 0;
    double mse = 0;  // batch MSE on the [0, 1] scale
    double psnr = 0;
};

struct FitResult {
    std::vector<HistoryEntry> history;
    double final_loss = 0;  // last batch MSE in value space ([-1, 1])
    double seconds = 0;
};

class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(index it)
        : std::runtime_error("training diverged: non-finite loss at iteration " +
                             std::to_string(it)),
          iteration(it) {}
    index iteration;
};

// sample -> backward -> adamw, cfg.iters times. History records the batch
// loss ahead of each logged update.
template <typename T>
FitResult fit(Model<T>& model, const Signal& signal, const TrainConfig& cfg,
              const FreezeMask* freeze = nullptr);

}  // namespace lginr
