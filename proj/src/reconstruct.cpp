#include "lginr/reconstruct.hpp"

#include <algorithm>

namespace lginr {

Signal reconstruct(const Model<float>& model, std::span<const index> resolution, float fill_value,
                   ReconstructStats* stats) {
    if (static_cast<index>(resolution.size()) != model.spec.in_dim)
        throw std::invalid_argument("reconstruct: resolution dimensionality differs from model");
    if (!(fill_value >= -1.f && fill_value <= 1.f))
        throw std::invalid_argument("reconstruct: fill value must lie in [-1, 1]");

    Signal s;
    s.resolution.assign(resolution.begin(), resolution.end());
    s.channels = model.spec.out_dim;
    const auto coords = grid_coords(resolution);
    const index points = coords.rows;
    const index m = model.spec.out_dim;
    s.values.assign(static_cast<std::size_t>(points * m), fill_value);

    const auto pids = locate_all(model.spec.grid, coords);
    index filled = 0;

    const index chunk = 1 << 16;
    Mat<float> block;
    std::vector<std::uint32_t> block_ids;
    std::vector<index> block_points;
    for (index start = 0; start < points; start += chunk) {
        const index stop = std::min(points, start + chunk);
        block_points.clear();
        block_ids.clear();
        for (index p = start; p < stop; ++p) {
            const auto id = pids[static_cast<std::size_t>(p)];
            if (model.present.keep[id]) {
                block_points.push_back(p);
                block_ids.push_back(id);
            } else {
                ++filled;
            }
        }
        if (block_points.empty()) continue;
        block = Mat<float>(static_cast<index>(block_points.size()), model.spec.in_dim);
        for (index i = 0; i < block.rows; ++i) {
            const float* src = coords.row(block_points[static_cast<std::size_t>(i)]);
            std::copy(src, src + model.spec.in_dim, block.row(i));
        }
        const auto out = forward(model, block, block_ids);
        for (index i = 0; i < out.rows; ++i) {
            const index p = block_points[static_cast<std::size_t>(i)];
            for (index c = 0; c < m; ++c)
                s.values[static_cast<std::size_t>(p * m + c)] =
                    std::clamp(out(i, c), -1.f, 1.f);
        }
    }
    if (stats) stats->filled_points = filled;
    return s;
}

}  // namespace lginr
