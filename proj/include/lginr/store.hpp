#pragma once

#include <filesystem>

#include "lginr/model.hpp"

namespace lginr {

// Binary model container. Little-endian throughout; all weights are f32.
//
//   offset  size          field
//   0       8             magic 4C 47 49 4E 52 00 vv 00 ("LGINR", version byte vv = 1)
//   8       4             kind        u32  (0 siren, 1 spp, 2 lgs)
//   12      4             in_dim n    u32
//   16      4             out_dim m   u32
//   20      4             depth D     u32
//   24      4             local_hidden  u32
//   28      4             global_hidden u32 (0 unless lgs)
//   32      4             omega       f32
//   36      4             merge_kind  u32  (0 concat_fc, 1 fc_add)
//   40      16n           bounds      per dimension lo f64, hi f64
//   40+16n  4n            factors     u32 per dimension
//   ...     ceil(K/8)     present bitmap, bit k at byte k>>3, LSB first
//   ...     payload       f32 weights:
//                           global block: stages 1..D-1, each W row-major then b
//                           merge block:  W row-major then b
//                           one local block per kept partition, ascending flat
//                           index: stages 1..D, each W row-major then b
//
// File size is derivable from the header alone; a local block spans exactly
// local-params-per-partition * 4 bytes, which is what makes crop_file a plain
// byte splice.

void save(const Model<float>& model, const std::filesystem::path& path);
Model<float> load(const std::filesystem::path& path);

// Header-level crop: rewrites the bitmap and splices kept local blocks without
// deserializing any weights. Output is bitwise save(crop(load(input))).
void crop_file(const std::filesystem::path& input, const std::vector<index>& drop,
               const std::filesystem::path& output);

}  // namespace lginr
