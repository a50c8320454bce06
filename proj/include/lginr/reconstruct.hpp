#pragma once

#include "lginr/model.hpp"
#include "lginr/signalio.hpp"

namespace lginr {

struct ReconstructStats {
    index filled_points = 0;  // points in cropped partitions, set to fill_value
};

// Decodes the model over a regular grid of the given resolution. Points in
// cropped partitions receive fill_value; everything else is the forward output
// clamped to [-1, 1]. Evaluation is chunked, which cannot change any value:
// the forward pass is bitwise independent of batch composition.
Signal reconstruct(const Model<float>& model, std::span<const index> resolution,
                   float fill_value = 0.f, ReconstructStats* stats = nullptr);

}  // namespace lginr
