#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "lginr/edit.hpp"
#include "lginr/reconstruct.hpp"

using namespace lginr;
using idx = lginr::index;

namespace {

ModelSpec cameraman_lgs() {
    ModelSpec s;
    s.kind = ModelKind::lgs;
    s.in_dim = 2;
    s.out_dim = 1;
    s.depth = 5;
    s.local_hidden = 14;
    s.global_hidden = 84;
    s.grid = make_unit_grid({16, 16});
    return s;
}

ModelSpec small_lgs(std::vector<std::uint32_t> factors, idx depth = 3, idx hl = 4, idx hg = 5) {
    ModelSpec s;
    s.kind = ModelKind::lgs;
    s.in_dim = static_cast<idx>(factors.size());
    s.out_dim = 1;
    s.depth = depth;
    s.local_hidden = hl;
    s.global_hidden = hg;
    s.grid = make_unit_grid(std::move(factors));
    return s;
}

}  // namespace

TEST_CASE("empty drop set returns the model unchanged") {
    Rng rng(1);
    auto m = init<float>(small_lgs({2, 2}), rng);
    auto c = crop(m, {});
    CHECK(c.present.kept_count() == 4);
    for (std::size_t s = 0; s < m.weights.local.size(); ++s)
        CHECK(c.weights.local[s].w.data == m.weights.local[s].w.data);
}

TEST_CASE("cameraman-config crop arithmetic") {
    Rng rng(2);
    auto m = init<float>(cameraman_lgs(), rng);
    CHECK(param_count(m) == 198930);

    std::vector<idx> drop_all_but_one(255);
    std::iota(drop_all_but_one.begin(), drop_all_but_one.end(), 1);  // keep partition 0
    auto one = crop(m, drop_all_but_one);
    CHECK(param_count(one) == 23058 + 687);

    std::vector<idx> drop64(64);
    std::iota(drop64.begin(), drop64.end(), 100);
    auto c = crop(m, drop64);
    CHECK(param_count(c) == 198930 - 64 * 687);
}

TEST_CASE("crop preserves kept-partition outputs bitwise") {
    auto spec = small_lgs({3, 3}, 4, 5, 7);
    Rng rng(3);
    auto m = init<float>(spec, rng);
    Rng crng(4);
    auto coords = uniform<float>(crng, -1.f, 1.f, 300, 2);
    auto pids = locate_all(spec.grid, coords);
    auto before = forward(m, coords, pids);

    auto cropped = crop(m, {1, 7});
    // evaluate only the surviving coordinates
    std::vector<idx> keep_rows;
    for (idx i = 0; i < coords.rows; ++i)
        if (pids[static_cast<std::size_t>(i)] != 1u && pids[static_cast<std::size_t>(i)] != 7u)
            keep_rows.push_back(i);
    Mat<float> kc(static_cast<idx>(keep_rows.size()), 2);
    std::vector<std::uint32_t> kp;
    for (idx i = 0; i < kc.rows; ++i) {
        kc(i, 0) = coords(keep_rows[static_cast<std::size_t>(i)], 0);
        kc(i, 1) = coords(keep_rows[static_cast<std::size_t>(i)], 1);
        kp.push_back(pids[static_cast<std::size_t>(keep_rows[static_cast<std::size_t>(i)])]);
    }
    auto after = forward(cropped, kc, kp);
    for (idx i = 0; i < kc.rows; ++i)
        CHECK(after(i, 0) == before(keep_rows[static_cast<std::size_t>(i)], 0));
}

TEST_CASE("crop errors: repeats, absent partitions, dropping everything") {
    Rng rng(5);
    auto m = init<float>(small_lgs({2, 2}), rng);
    CHECK_THROWS_AS((void)crop(m, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS((void)crop(m, {7}), std::out_of_range);
    auto c = crop(m, {1});
    CHECK_THROWS_AS((void)crop(c, {1}), std::invalid_argument);
    CHECK_THROWS_AS((void)crop(c, {0, 2, 3}), std::invalid_argument);
}

TEST_CASE("crop composes: crop(crop(m,A),B) == crop(m,A|B)") {
    auto spec = small_lgs({4, 2});
    Rng rng(6);
    auto m = init<float>(spec, rng);
    auto ab = crop(crop(m, {1, 4}), {2, 7});
    auto joint = crop(m, {1, 2, 4, 7});
    CHECK(ab.present.keep == joint.present.keep);
    for (std::size_t s = 0; s < ab.weights.local.size(); ++s) {
        CHECK(ab.weights.local[s].w.data == joint.weights.local[s].w.data);
        CHECK(ab.weights.local[s].b.data == joint.weights.local[s].b.data);
    }
}

TEST_CASE("proportionality: params drop linearly with each cropped partition") {
    auto spec = small_lgs({4, 4});
    Rng rng(7);
    auto m = init<float>(spec, rng);
    const auto b = param_breakdown(spec, spec.partition_count());
    for (idx k = 0; k < 5; ++k) {
        std::vector<idx> drop(static_cast<std::size_t>(k));
        std::iota(drop.begin(), drop.end(), 0);
        auto c = crop(m, drop);
        CHECK(param_count(c) == b.total - k * b.local_per_partition);
    }
}

TEST_CASE("extend with unchanged factors returns the same model") {
    auto spec = small_lgs({4, 2});
    Rng rng(8);
    auto m = init<float>(spec, rng);
    Rng erng(9);
    std::vector<std::uint32_t> same{4, 2};
    auto r = extend(m, same, m.spec.grid.bounds, erng);
    for (std::size_t s = 0; s < m.weights.local.size(); ++s)
        CHECK(r.model.weights.local[s].w.data == m.weights.local[s].w.data);
}

TEST_CASE("mirror extension copies reflected neighbours") {
    auto spec = small_lgs({16, 8}, 3, 3, 4);
    Rng rng(10);
    auto m = init<float>(spec, rng);

    Bounds nb = spec.grid.bounds;
    nb.hi[1] = nb.lo[1] + 16 * spec.grid.delta(1);  // grow dim 1 from 8 to 16
    Rng erng(11);
    std::vector<std::uint32_t> nf{16, 16};
    auto r = extend(m, nf, nb, erng);
    CHECK(r.model.spec.partition_count() == 256);
    CHECK(r.model.present.kept_count() == 256);

    auto& old_grid = m.spec.grid;
    auto& new_grid = r.model.spec.grid;
    for (std::uint32_t i = 0; i < 16; ++i) {
        // (i, 8) initialized from (i, 7); (i, 9) from (i, 6)
        for (auto [j_new, j_src] : {std::pair<std::uint32_t, std::uint32_t>{8, 7}, {9, 6}}) {
            std::vector<std::uint32_t> nc{i, j_new}, oc{i, j_src};
            const idx slot_new = flat_index(new_grid, nc);
            const idx slot_old = flat_index(old_grid, oc);
            for (std::size_t s = 0; s < m.weights.local.size(); ++s) {
                const float* a = r.model.weights.local[s].w.slice(slot_new);
                const float* b = m.weights.local[s].w.slice(slot_old);
                for (idx t = 0; t < m.weights.local[s].w.slice_size(); ++t) CHECK(a[t] == b[t]);
            }
        }
    }
    // freeze mask marks exactly the old region
    idx frozen = 0;
    for (auto f : r.freeze_old.local_slice) frozen += f;
    CHECK(frozen == 128);
}

TEST_CASE("extension preserves old-region outputs bitwise at matching coordinates") {
    auto spec = small_lgs({4, 4}, 4, 5, 6);
    Rng rng(12);
    auto m = init<float>(spec, rng);
    Rng crng(13);
    auto coords = uniform<float>(crng, -1.f, 1.f, 400, 2);
    auto pids = locate_all(spec.grid, coords);
    auto before = forward(m, coords, pids);

    Bounds nb = spec.grid.bounds;
    nb.hi[0] = nb.lo[0] + 6 * spec.grid.delta(0);
    nb.hi[1] = nb.lo[1] + 7 * spec.grid.delta(1);
    Rng erng(14);
    std::vector<std::uint32_t> nf{6, 7};
    auto r = extend(m, nf, nb, erng);

    auto new_pids = locate_all(r.model.spec.grid, coords);
    auto after = forward(r.model, coords, new_pids);
    CHECK(after.data == before.data);
}

TEST_CASE("clamp and random extension rules behave as named") {
    auto spec = small_lgs({1, 4}, 3, 3, 4);
    Rng rng(15);
    auto m = init<float>(spec, rng);
    Bounds nb = spec.grid.bounds;
    nb.hi[1] = nb.lo[1] + 12 * spec.grid.delta(1);
    std::vector<std::uint32_t> nf{1, 12};

    Rng e1(16);
    auto clamped = extend(m, nf, nb, e1, ExtendInit::clamp);
    std::vector<std::uint32_t> far_cell{0, 11}, border{0, 3};
    const idx far = flat_index(clamped.model.spec.grid, far_cell);
    const idx src = flat_index(m.spec.grid, border);
    CHECK(clamped.model.weights.local[0].w.slice(far)[0] == m.weights.local[0].w.slice(src)[0]);

    Rng e2(17);
    auto randomized = extend(m, nf, nb, e2, ExtendInit::random);
    bool differs = false;
    for (idx t = 0; t < m.weights.local[0].w.slice_size(); ++t)
        if (randomized.model.weights.local[0].w.slice(far)[t] !=
            m.weights.local[0].w.slice(src)[t])
            differs = true;
    CHECK(differs);
}

TEST_CASE("extend validation: shrinking factors and inconsistent bounds") {
    auto spec = small_lgs({4, 4});
    Rng rng(18);
    auto m = init<float>(spec, rng);
    Rng erng(19);

    std::vector<std::uint32_t> shrink{3, 4};
    CHECK_THROWS_AS((void)extend(m, shrink, m.spec.grid.bounds, erng), std::invalid_argument);

    std::vector<std::uint32_t> grow{4, 8};
    Bounds wrong = m.spec.grid.bounds;  // bounds not extended to match
    CHECK_THROWS_AS((void)extend(m, grow, wrong, erng), std::invalid_argument);

    auto c = crop(m, {3});
    Bounds nb = m.spec.grid.bounds;
    nb.hi[1] = nb.lo[1] + 8 * m.spec.grid.delta(1);
    CHECK_THROWS_WITH_AS((void)extend(c, grow, nb, erng), doctest::Contains("uncropped"),
                         std::invalid_argument);
}

TEST_CASE("renormalize_bounds rescales the grid only") {
    auto spec = small_lgs({2, 2});
    Rng rng(20);
    auto m = init<float>(spec, rng);
    auto weights_before = m.weights.local[0].w.data;
    Bounds nb;
    nb.lo = {-1.0, -1.0};
    nb.hi = {3.0, 1.0};
    renormalize_bounds(m, nb);
    CHECK(m.spec.grid.bounds.hi[0] == 3.0);
    CHECK(m.weights.local[0].w.data == weights_before);
}

TEST_CASE("drop-spec parsing: lists, rectangles, errors") {
    auto grid = make_unit_grid({16, 16});
    CHECK(parse_drop_spec("0", grid) == std::vector<idx>{0});
    CHECK(parse_drop_spec("5,1,5", grid) == std::vector<idx>{1, 5});

    auto corner = parse_drop_spec("0..3,0..3", grid);
    CHECK(corner.size() == 16);
    for (idx k : corner) {
        auto cell = unflatten(grid, k);
        CHECK(cell[0] <= 3);
        CHECK(cell[1] <= 3);
    }

    auto strip = parse_drop_spec("2,0..15", grid);
    CHECK(strip.size() == 16);

    auto two_rects = parse_drop_spec("0..1,0..1;14..15,14..15", grid);
    CHECK(two_rects.size() == 8);

    CHECK_THROWS_AS((void)parse_drop_spec("", grid), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_drop_spec("300", grid), std::out_of_range);
    CHECK_THROWS_AS((void)parse_drop_spec("0..3", grid), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_drop_spec("0..20,0..3", grid), std::out_of_range);
    CHECK_THROWS_AS((void)parse_drop_spec("x,1", grid), std::invalid_argument);
}
