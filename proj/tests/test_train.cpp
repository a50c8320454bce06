#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "lginr/train.hpp"

using namespace lginr;
using idx = lginr::index;

namespace {

Signal constant_signal(std::vector<idx> resolution, float value) {
    Signal s;
    s.resolution = std::move(resolution);
    s.channels = 1;
    s.values.assign(static_cast<std::size_t>(s.point_count()), value);
    return s;
}

Signal noise_signal(Rng& rng, std::vector<idx> resolution) {
    Signal s;
    s.resolution = std::move(resolution);
    s.channels = 1;
    for (idx i = 0; i < s.point_count(); ++i)
        s.values.push_back(rng.uniform_real<float>(-0.8f, 0.8f));
    return s;
}

ModelSpec tiny_lgs(std::vector<std::uint32_t> factors, idx hl = 6, idx hg = 8, idx depth = 3) {
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

template <typename T>
std::vector<T> flatten_weights(const Model<T>& m) {
    std::vector<T> all;
    for (auto& l : m.weights.global) {
        all.insert(all.end(), l.w.data.begin(), l.w.data.end());
        all.insert(all.end(), l.b.data.begin(), l.b.data.end());
    }
    all.insert(all.end(), m.weights.merge.w.data.begin(), m.weights.merge.w.data.end());
    all.insert(all.end(), m.weights.merge.b.data.begin(), m.weights.merge.b.data.end());
    for (auto& l : m.weights.local) {
        all.insert(all.end(), l.w.data.begin(), l.w.data.end());
        all.insert(all.end(), l.b.data.begin(), l.b.data.end());
    }
    return all;
}

}  // namespace

TEST_CASE("full-grid sampling returns every point exactly once") {
    auto grid = make_unit_grid({4, 4});
    auto signal = constant_signal({64, 64}, 0.f);
    Rng rng(1);
    auto batch = sample_batch<float>(signal, grid, 1.0, rng);
    CHECK(batch.coords.rows == 4096);
    std::map<std::pair<float, float>, int> seen;
    for (idx i = 0; i < batch.coords.rows; ++i)
        ++seen[{batch.coords(i, 0), batch.coords(i, 1)}];
    CHECK(static_cast<idx>(seen.size()) == 4096);
    for (auto& [_, count] : seen) CHECK(count == 1);
}

TEST_CASE("fractional sampling draws equal counts per partition") {
    auto grid = make_unit_grid({4, 4});
    auto signal = constant_signal({64, 64}, 0.f);
    Rng rng(2);
    auto batch = sample_batch<float>(signal, grid, 0.25, rng);
    CHECK(batch.coords.rows == 1024);
    std::map<std::uint32_t, idx> hist;
    for (auto id : batch.pids) ++hist[id];
    CHECK(static_cast<idx>(hist.size()) == 16);
    for (auto& [_, count] : hist) CHECK(count == 64);
}

TEST_CASE("per-partition counts stay equal for assorted fractions") {
    auto grid = make_unit_grid({3, 5});
    Rng srng(77);
    auto signal = noise_signal(srng, {33, 41});  // ragged partitions
    for (double fraction : {0.07, 0.33, 0.5, 0.99}) {
        Rng rng(3);
        auto batch = sample_batch<float>(signal, grid, fraction, rng);
        std::map<std::uint32_t, idx> hist;
        for (auto id : batch.pids) ++hist[id];
        CHECK(static_cast<idx>(hist.size()) == 15);
        const idx want = hist.begin()->second;
        for (auto& [_, count] : hist) CHECK(count == want);
    }
}

TEST_CASE("draws are unique within a partition (without replacement)") {
    auto grid = make_unit_grid({2, 2});
    auto signal = constant_signal({16, 16}, 0.25f);
    Rng rng(9);
    auto batch = sample_batch<float>(signal, grid, 0.5, rng);
    std::map<std::pair<float, float>, int> seen;
    for (idx i = 0; i < batch.coords.rows; ++i)
        ++seen[{batch.coords(i, 0), batch.coords(i, 1)}];
    for (auto& [_, count] : seen) CHECK(count == 1);
}

TEST_CASE("too-small fractions raise the empty-batch error") {
    auto grid = make_unit_grid({4, 4});
    auto signal = constant_signal({64, 64}, 0.f);
    Rng rng(4);
    CHECK_THROWS_WITH_AS((void)sample_batch<float>(signal, grid, 0.001, rng),
                         doctest::Contains("empty batch"), std::invalid_argument);
}

TEST_CASE("adamw: zero gradient leaves weights unchanged without decay") {
    auto spec = tiny_lgs({2, 2});
    Rng rng(5);
    auto model = init<float>(spec, rng);
    auto before = flatten_weights(model);
    auto grads = zeros_like(model.weights);
    auto state = make_adam_state(model.weights);
    TrainConfig cfg;
    cfg.iters = 1;
    cfg.lr = 0.1;
    adamw_step(model.weights, grads, state, cfg);
    CHECK(flatten_weights(model) == before);
}

TEST_CASE("adamw: first step with unit gradients moves by about -lr") {
    auto spec = tiny_lgs({2, 2});
    Rng rng(6);
    auto model = init<float>(spec, rng);
    auto before = flatten_weights(model);
    auto grads = zeros_like(model.weights);
    for (auto& l : grads.global) {
        std::fill(l.w.data.begin(), l.w.data.end(), 1.f);
        std::fill(l.b.data.begin(), l.b.data.end(), 1.f);
    }
    std::fill(grads.merge.w.data.begin(), grads.merge.w.data.end(), 1.f);
    std::fill(grads.merge.b.data.begin(), grads.merge.b.data.end(), 1.f);
    for (auto& l : grads.local) {
        std::fill(l.w.data.begin(), l.w.data.end(), 1.f);
        std::fill(l.b.data.begin(), l.b.data.end(), 1.f);
    }
    auto state = make_adam_state(model.weights);
    TrainConfig cfg;
    cfg.iters = 1;
    cfg.lr = 0.1;
    adamw_step(model.weights, grads, state, cfg);
    auto after = flatten_weights(model);
    for (std::size_t i = 0; i < after.size(); ++i)
        CHECK(after[i] - before[i] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adamw: pure decoupled decay shrinks weights geometrically") {
    auto spec = tiny_lgs({2, 2});
    Rng rng(7);
    auto model = init<float>(spec, rng);
    auto before = flatten_weights(model);
    auto grads = zeros_like(model.weights);
    auto state = make_adam_state(model.weights);
    TrainConfig cfg;
    cfg.iters = 1;
    cfg.lr = 0.5;
    cfg.weight_decay = 0.01;
    const int steps = 3;
    for (int i = 0; i < steps; ++i) adamw_step(model.weights, grads, state, cfg);
    auto after = flatten_weights(model);
    const double factor = std::pow(1.0 - 0.5 * 0.01, steps);
    for (std::size_t i = 0; i < after.size(); ++i)
        CHECK(static_cast<double>(after[i]) ==
              doctest::Approx(static_cast<double>(before[i]) * factor).epsilon(1e-5));
}

TEST_CASE("adamw rejects non-finite gradients") {
    auto spec = tiny_lgs({2, 2});
    Rng rng(8);
    auto model = init<float>(spec, rng);
    auto grads = zeros_like(model.weights);
    grads.merge.w.data[0] = std::numeric_limits<float>::quiet_NaN();
    auto state = make_adam_state(model.weights);
    TrainConfig cfg;
    cfg.lr = 0.1;
    CHECK_THROWS_WITH_AS(adamw_step(model.weights, grads, state, cfg),
                         doctest::Contains("non-finite"), std::invalid_argument);
}

TEST_CASE("fit with zero iterations leaves the model untouched") {
    auto spec = tiny_lgs({2, 2});
    Rng rng(10);
    auto model = init<float>(spec, rng);
    auto before = flatten_weights(model);
    auto signal = constant_signal({16, 16}, 0.5f);
    TrainConfig cfg;
    cfg.iters = 0;
    auto res = fit(model, signal, cfg);
    CHECK(flatten_weights(model) == before);
    CHECK(res.history.empty());
}

TEST_CASE("a constant signal is fit to tiny error in a few hundred steps") {
    auto spec = tiny_lgs({2, 2});
    Rng rng(11);
    auto model = init<float>(spec, rng);
    auto signal = constant_signal({16, 16}, 0.5f);
    TrainConfig cfg;
    cfg.iters = 200;
    cfg.lr = 5e-4;
    cfg.seed = 11;
    auto res = fit(model, signal, cfg);
    CHECK(res.final_loss < 1e-4);
}

TEST_CASE("fit is bitwise reproducible for a fixed seed") {
    auto spec = tiny_lgs({2, 2});
    Rng srng(90);
    auto signal = noise_signal(srng, {16, 16});
    TrainConfig cfg;
    cfg.iters = 50;
    cfg.lr = 1e-3;
    cfg.sample_fraction = 0.5;
    cfg.seed = 42;

    Rng r1(12), r2(12);
    auto m1 = init<float>(spec, r1);
    auto m2 = init<float>(spec, r2);
    auto h1 = fit(m1, signal, cfg);
    auto h2 = fit(m2, signal, cfg);
    CHECK(flatten_weights(m1) == flatten_weights(m2));
    CHECK(h1.final_loss == h2.final_loss);
}

TEST_CASE("loss trends downward over training") {
    auto spec = tiny_lgs({2, 2}, 8, 10, 4);
    Rng srng(91);
    auto signal = noise_signal(srng, {24, 24});
    Rng rng(13);
    auto model = init<float>(spec, rng);
    TrainConfig cfg;
    cfg.iters = 300;
    cfg.lr = 1e-3;
    cfg.seed = 13;
    cfg.log_every = 50;
    auto res = fit(model, signal, cfg);
    REQUIRE(res.history.size() >= 2);
    CHECK(res.history.back().mse < res.history.front().mse);
}

TEST_CASE("frozen tensors stay bitwise unchanged through fit") {
    auto spec = tiny_lgs({2, 2});
    Rng srng(92);
    auto signal = noise_signal(srng, {16, 16});
    Rng rng(14);
    auto model = init<float>(spec, rng);

    FreezeMask freeze;
    freeze.local_slice = {1, 0, 0, 1};  // freeze partitions 0 and 3
    freeze.global_net = true;

    std::vector<float> frozen_before;
    for (auto& l : model.weights.global)
        frozen_before.insert(frozen_before.end(), l.w.data.begin(), l.w.data.end());
    for (auto& stack : model.weights.local) {
        frozen_before.insert(frozen_before.end(), stack.w.slice(0),
                             stack.w.slice(0) + stack.w.slice_size());
        frozen_before.insert(frozen_before.end(), stack.w.slice(3),
                             stack.w.slice(3) + stack.w.slice_size());
    }

    TrainConfig cfg;
    cfg.iters = 40;
    cfg.lr = 1e-3;
    cfg.seed = 14;
    auto unfrozen_merge = model.weights.merge.w.data;
    fit(model, signal, cfg, &freeze);

    std::vector<float> frozen_after;
    for (auto& l : model.weights.global)
        frozen_after.insert(frozen_after.end(), l.w.data.begin(), l.w.data.end());
    for (auto& stack : model.weights.local) {
        frozen_after.insert(frozen_after.end(), stack.w.slice(0),
                            stack.w.slice(0) + stack.w.slice_size());
        frozen_after.insert(frozen_after.end(), stack.w.slice(3),
                            stack.w.slice(3) + stack.w.slice_size());
    }
    CHECK(frozen_before == frozen_after);
    CHECK(model.weights.merge.w.data != unfrozen_merge);  // the rest trained
}

TEST_CASE("every partition contributes to every sampled batch") {
    auto grid = make_unit_grid({4, 2});
    Rng srng(93);
    auto signal = noise_signal(srng, {32, 32});
    Rng rng(15);
    for (int it = 0; it < 10; ++it) {
        auto batch = sample_batch<float>(signal, grid, 0.1, rng);
        std::set<std::uint32_t> parts(batch.pids.begin(), batch.pids.end());
        CHECK(parts.size() == 8);
    }
}

TEST_CASE("oversized partition factors fail cleanly in fit") {
    ModelSpec spec = tiny_lgs({16, 16}, 3, 4);
    Rng rng(16);
    auto model = init<float>(spec, rng);
    auto signal = constant_signal({8, 8}, 0.f);  // fewer points than partitions
    TrainConfig cfg;
    cfg.iters = 1;
    CHECK_THROWS_WITH_AS(fit(model, signal, cfg), doctest::Contains("no grid points"),
                         std::invalid_argument);
}
