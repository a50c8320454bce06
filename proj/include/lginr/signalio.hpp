#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lginr/tensors.hpp"

namespace lginr {

// An n-dimensional sampled signal. Values are row-major over the resolution,
// channels fastest, always inside [-1, 1]. The coordinate of sample i along
// dimension d is linspace(-1, 1, resolution[d]) inclusive of both endpoints.
struct Signal {
    std::vector<index> resolution;
    index channels = 1;
    std::vector<float> values;

    index dims() const { return static_cast<index>(resolution.size()); }
    index point_count() const;
    void validate() const;
};

// points x n coordinate matrix in the same row-major point order as Signal
// values. Single-point dimensions map to 0.
Mat<float> grid_coords(std::span<const index> resolution);

// Binary PGM (P5) / PPM (P6), 8-bit, maxval 255. Bytes map to 2*(v/255) - 1.
Signal load_image(const std::filesystem::path& path);
void save_image(const Signal& signal, const std::filesystem::path& path);

// WAV PCM16 mono, canonical 44-byte header. Samples map to s / 32768.
Signal load_wav(const std::filesystem::path& path, int* sample_rate = nullptr);
void save_wav(const Signal& signal, const std::filesystem::path& path, int sample_rate);

}  // namespace lginr
