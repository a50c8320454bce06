#pragma once

#include <string>

#include "lginr/model.hpp"
#include "lginr/train.hpp"

namespace lginr {

// Removes the local weight slices of the dropped partitions. Global and merge
// weights are untouched; forward outputs on kept partitions are bitwise
// unchanged. Throws when dropping an absent partition or the last one.
template <typename T>
Model<T> crop(const Model<T>& model, const std::vector<index>& drop);

enum class ExtendInit {
    mirror,  // reflect indices at the old boundary: j >= C maps to 2C-1-j,
             // repeated while out of range, then clamped at 0
    clamp,   // replicate the nearest border slice
    random,  // fresh draws with the usual layer bounds
};

template <typename T>
struct ExtendResult {
    Model<T> model;
    // Old-region slices marked frozen, sized to the new grid. Optional to use;
    // fine-tuning everything is the default reading.
    FreezeMask freeze_old;
};

// Grows the grid while keeping the partition size fixed: new_bounds must keep
// the old minimum corner and satisfy hi = lo + factor * old_delta per
// dimension, so existing partitions keep their coordinate ranges and the old
// region reconstructs bitwise identically. Requires an uncropped model.
template <typename T>
ExtendResult<T> extend(const Model<T>& model, std::span<const std::uint32_t> new_factors,
                       const Bounds& new_bounds, Rng& rng, ExtendInit rule = ExtendInit::mirror);

// Affine remap of the grid bounds only; weights keep their values. Used after
// a structural extension to map the enlarged hyperrectangle back onto the
// (-1,1)^n convention of freshly loaded signals before fine-tuning.
template <typename T>
void renormalize_bounds(Model<T>& model, const Bounds& new_bounds);

// Partition selection syntax: either a comma list of flat indices ("0,5,17")
// or ';'-separated axis-aligned index rectangles with one inclusive range or
// index per dimension ("0..3,0..3" or "2,0..7"). A term counts as a rectangle
// when it contains "..". Returns sorted unique flat indices.
std::vector<index> parse_drop_spec(const std::string& spec, const PartitionGrid& grid);

}  // namespace lginr
