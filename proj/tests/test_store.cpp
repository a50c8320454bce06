#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "lginr/edit.hpp"
#include "lginr/store.hpp"

using namespace lginr;
using idx = lginr::index;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("lginr_store_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Model<float> random_model(Rng& rng) {
    ModelSpec s;
    const int pick = static_cast<int>(rng.below(3));
    s.kind = pick == 0 ? ModelKind::siren : (pick == 1 ? ModelKind::spp : ModelKind::lgs);
    s.in_dim = 1 + static_cast<idx>(rng.below(2));
    s.out_dim = 1 + static_cast<idx>(rng.below(3));
    s.depth = 2 + static_cast<idx>(rng.below(3));
    s.local_hidden = 1 + static_cast<idx>(rng.below(6));
    std::vector<std::uint32_t> factors;
    for (idx d = 0; d < s.in_dim; ++d)
        factors.push_back(s.kind == ModelKind::siren
                              ? 1u
                              : 1u + static_cast<std::uint32_t>(rng.below(4)));
    s.grid = make_unit_grid(factors);
    if (s.kind == ModelKind::lgs) {
        s.global_hidden = 1 + static_cast<idx>(rng.below(8));
        s.merge = rng.below(2) ? MergeKind::fc_add : MergeKind::concat_fc;
    }
    s.omega = 10.f + static_cast<float>(rng.below(40));
    return init<float>(s, rng);
}

bool models_equal(const Model<float>& a, const Model<float>& b) {
    if (a.present.keep != b.present.keep) return false;
    if (a.spec.grid.factors != b.spec.grid.factors) return false;
    if (a.spec.grid.bounds.lo != b.spec.grid.bounds.lo) return false;
    if (a.spec.grid.bounds.hi != b.spec.grid.bounds.hi) return false;
    if (a.spec.kind != b.spec.kind || a.spec.merge != b.spec.merge) return false;
    if (a.spec.omega != b.spec.omega) return false;
    for (std::size_t s = 0; s < a.weights.global.size(); ++s)
        if (a.weights.global[s].w.data != b.weights.global[s].w.data ||
            a.weights.global[s].b.data != b.weights.global[s].b.data)
            return false;
    if (a.weights.merge.w.data != b.weights.merge.w.data) return false;
    for (std::size_t s = 0; s < a.weights.local.size(); ++s)
        if (a.weights.local[s].w.data != b.weights.local[s].w.data ||
            a.weights.local[s].b.data != b.weights.local[s].b.data)
            return false;
    return true;
}

}  // namespace

TEST_CASE("save -> load -> save reaches a byte-identical fixed point") {
    TempDir dir;
    Rng rng(1);
    for (int trial = 0; trial < 8; ++trial) {
        auto m = random_model(rng);
        const auto p1 = dir.path / ("a" + std::to_string(trial) + ".lginr");
        const auto p2 = dir.path / ("b" + std::to_string(trial) + ".lginr");
        save(m, p1);
        auto loaded = load(p1);
        CHECK(models_equal(m, loaded));
        save(loaded, p2);
        CHECK(read_bytes(p1) == read_bytes(p2));
    }
}

TEST_CASE("cameraman-config file size is header + 4 bytes per parameter") {
    TempDir dir;
    ModelSpec s;
    s.kind = ModelKind::lgs;
    s.in_dim = 2;
    s.out_dim = 1;
    s.depth = 5;
    s.local_hidden = 14;
    s.global_hidden = 84;
    s.grid = make_unit_grid({16, 16});
    Rng rng(2);
    auto m = init<float>(s, rng);
    const auto p = dir.path / "cam.lginr";
    save(m, p);
    // header: 8 magic + 32 scalar fields + 32 bounds + 8 factors + 32 bitmap
    const std::size_t header = 8 + 32 + 32 + 8 + 32;
    CHECK(fs::file_size(p) == header + 4u * 198930u);
}

TEST_CASE("tampered magic and version are rejected with offsets") {
    TempDir dir;
    Rng rng(3);
    auto m = random_model(rng);
    const auto p = dir.path / "m.lginr";
    save(m, p);
    auto bytes = read_bytes(p);

    auto bad = bytes;
    bad[2] = 'X';
    std::ofstream(dir.path / "bad.lginr", std::ios::binary)
        .write(reinterpret_cast<char*>(bad.data()), static_cast<std::streamsize>(bad.size()));
    CHECK_THROWS_WITH_AS((void)load(dir.path / "bad.lginr"), doctest::Contains("offset 0"),
                         std::runtime_error);

    auto badver = bytes;
    badver[6] = 9;
    std::ofstream(dir.path / "badver.lginr", std::ios::binary)
        .write(reinterpret_cast<char*>(badver.data()),
               static_cast<std::streamsize>(badver.size()));
    CHECK_THROWS_WITH_AS((void)load(dir.path / "badver.lginr"), doctest::Contains("offset 6"),
                         std::runtime_error);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 5);
    std::ofstream(dir.path / "short.lginr", std::ios::binary)
        .write(reinterpret_cast<char*>(truncated.data()),
               static_cast<std::streamsize>(truncated.size()));
    CHECK_THROWS_WITH_AS((void)load(dir.path / "short.lginr"),
                         doctest::Contains("does not match"), std::runtime_error);
}

TEST_CASE("save rejects non-finite weights") {
    TempDir dir;
    Rng rng(4);
    auto m = random_model(rng);
    m.weights.local[0].w.data[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(save(m, dir.path / "nan.lginr"), doctest::Contains("non-finite"),
                         std::invalid_argument);
}

TEST_CASE("crop_file with an empty drop list is byte identical") {
    TempDir dir;
    Rng rng(5);
    auto m = random_model(rng);
    const auto p = dir.path / "in.lginr";
    save(m, p);
    crop_file(p, {}, dir.path / "out.lginr");
    CHECK(read_bytes(p) == read_bytes(dir.path / "out.lginr"));
}

TEST_CASE("crop_file shrinks by exactly one local block per partition") {
    TempDir dir;
    ModelSpec s;
    s.kind = ModelKind::lgs;
    s.in_dim = 2;
    s.out_dim = 1;
    s.depth = 4;
    s.local_hidden = 6;
    s.global_hidden = 9;
    s.grid = make_unit_grid({3, 3});
    Rng rng(6);
    auto m = init<float>(s, rng);
    const auto p = dir.path / "in.lginr";
    save(m, p);
    crop_file(p, {4}, dir.path / "out.lginr");
    const auto pp = param_breakdown(s, s.partition_count()).local_per_partition;
    CHECK(fs::file_size(p) - fs::file_size(dir.path / "out.lginr") ==
          static_cast<std::uintmax_t>(pp) * 4);
}

TEST_CASE("crop_file equals the load-crop-save route bitwise") {
    TempDir dir;
    Rng rng(7);
    for (int trial = 0; trial < 6; ++trial) {
        auto m = random_model(rng);
        const idx K = m.spec.partition_count();
        if (K < 2) continue;
        std::vector<idx> drop;
        for (idx k = 0; k < K; ++k)
            if (rng.below(3) == 0 && static_cast<idx>(drop.size()) < K - 1) drop.push_back(k);
        const auto input = dir.path / ("i" + std::to_string(trial) + ".lginr");
        save(m, input);

        const auto spliced = dir.path / ("s" + std::to_string(trial) + ".lginr");
        crop_file(input, drop, spliced);
        const auto rebuilt = dir.path / ("r" + std::to_string(trial) + ".lginr");
        save(crop(load(input), drop), rebuilt);
        CHECK(read_bytes(spliced) == read_bytes(rebuilt));
    }
}

TEST_CASE("crop_file validates the drop set") {
    TempDir dir;
    ModelSpec s;
    s.kind = ModelKind::spp;
    s.in_dim = 1;
    s.out_dim = 1;
    s.depth = 3;
    s.local_hidden = 4;
    s.grid = make_unit_grid({4});
    Rng rng(8);
    auto m = init<float>(s, rng);
    const auto p = dir.path / "in.lginr";
    save(m, p);
    CHECK_THROWS_AS(crop_file(p, {9}, dir.path / "x.lginr"), std::out_of_range);
    CHECK_THROWS_AS(crop_file(p, {0, 1, 2, 3}, dir.path / "x.lginr"), std::invalid_argument);

    crop_file(p, {1}, dir.path / "c.lginr");
    CHECK_THROWS_AS(crop_file(dir.path / "c.lginr", {1}, dir.path / "x.lginr"),
                    std::invalid_argument);
}

TEST_CASE("a cropped model round-trips through the container") {
    TempDir dir;
    ModelSpec s;
    s.kind = ModelKind::lgs;
    s.in_dim = 2;
    s.out_dim = 1;
    s.depth = 3;
    s.local_hidden = 3;
    s.global_hidden = 4;
    s.grid = make_unit_grid({4, 2});
    Rng rng(9);
    auto m = crop(init<float>(s, rng), {0, 5});
    const auto p = dir.path / "cropped.lginr";
    save(m, p);
    auto loaded = load(p);
    CHECK(models_equal(m, loaded));
    CHECK(loaded.present.kept_count() == 6);
}
