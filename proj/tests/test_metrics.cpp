#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lginr/metrics.hpp"

using namespace lginr;
using idx = lginr::index;

namespace {

Signal random_signal(Rng& rng, std::vector<idx> resolution, idx channels) {
    Signal s;
    s.resolution = std::move(resolution);
    s.channels = channels;
    const idx count = s.point_count() * channels;
    s.values.reserve(static_cast<std::size_t>(count));
    for (idx i = 0; i < count; ++i) s.values.push_back(rng.uniform_real<float>(-1.f, 1.f));
    return s;
}

// Oracle: direct per-element two-pass mean of squared [0,1]-scale differences.
double naive_mse(const Signal& a, const Signal& b) {
    std::vector<double> sq(a.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double ua = (static_cast<double>(a.values[i]) + 1.0) / 2.0;
        const double ub = (static_cast<double>(b.values[i]) + 1.0) / 2.0;
        sq[i] = (ua - ub) * (ua - ub);
    }
    double acc = 0;
    for (double v : sq) acc += v;
    return acc / static_cast<double>(sq.size());
}

// Oracle: direct (non-separable) SSIM with an explicit 11x11 window per valid
// position.
double naive_ssim(const Signal& a, const Signal& b) {
    const idx h = a.resolution[0], w = a.resolution[1];
    double win[11][11];
    const double sigma = 1.5;
    double norm = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double dx = i - 5, dy = j - 5;
            win[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            norm += win[i][j];
        }
    for (auto& row : win)
        for (auto& v : row) v /= norm;

    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0;
    for (idx c = 0; c < a.channels; ++c) {
        double acc = 0;
        idx count = 0;
        for (idx i = 5; i < h - 5; ++i)
            for (idx j = 5; j < w - 5; ++j) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int u = -5; u <= 5; ++u)
                    for (int v = -5; v <= 5; ++v) {
                        const auto at = static_cast<std::size_t>(((i + u) * w + (j + v)) * a.channels + c);
                        const double va = (static_cast<double>(a.values[at]) + 1.0) / 2.0;
                        const double vb = (static_cast<double>(b.values[at]) + 1.0) / 2.0;
                        const double wt = win[u + 5][v + 5];
                        ma += wt * va;
                        mb += wt * vb;
                        maa += wt * va * va;
                        mbb += wt * vb * vb;
                        mab += wt * va * vb;
                    }
                const double sa = maa - ma * ma, sb = mbb - mb * mb, sab = mab - ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * sab + c2)) /
                       ((ma * ma + mb * mb + c1) * (sa + sb + c2));
                ++count;
            }
        total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(a.channels);
}

}  // namespace

TEST_CASE("mse basics") {
    Rng rng(1);
    auto a = random_signal(rng, {8, 8}, 1);
    CHECK(mse(a, a) == 0.0);

    // constant difference of 0.1 on the [0,1] scale = 0.2 in value space
    auto b = a;
    for (auto& v : b.values) v = std::max(-1.f, v - 0.2f);
    bool clipped = false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.values[i] - 0.2f < -1.f) clipped = true;
    if (!clipped) CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("mse equals the naive oracle") {
    Rng rng(7);
    auto a = random_signal(rng, {13, 9}, 3);
    auto b = random_signal(rng, {13, 9}, 3);
    CHECK(mse(a, b) == doctest::Approx(naive_mse(a, b)).epsilon(1e-12));

    auto c = random_signal(rng, {13, 10}, 3);
    CHECK_THROWS_AS((void)mse(a, c), std::invalid_argument);
}

TEST_CASE("psnr reference points and sentinel") {
    CHECK(psnr_from_mse(1e-3) == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(psnr_from_mse(1e-4) == doctest::Approx(40.0).epsilon(1e-12));
    Rng rng(3);
    auto a = random_signal(rng, {4, 4}, 1);
    CHECK(std::isinf(psnr(a, a)));
}

TEST_CASE("psnr decreases as mse grows") {
    double prev = psnr_from_mse(1e-6);
    for (double m = 1e-5; m < 1.0; m *= 10) {
        const double p = psnr_from_mse(m);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim of a signal with itself is exactly one") {
    Rng rng(9);
    auto a = random_signal(rng, {16, 16}, 1);
    CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("ssim of a high-contrast pattern and its negative is negative") {
    Signal a;
    a.resolution = {16, 16};
    a.channels = 1;
    for (idx i = 0; i < 16; ++i)
        for (idx j = 0; j < 16; ++j) a.values.push_back(((i + j) % 2 == 0) ? 0.8f : -0.8f);
    Signal b = a;
    for (auto& v : b.values) v = -v;  // u -> 1 - u on the [0,1] scale
    CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("ssim matches an independent direct implementation") {
    Rng rng(21);
    auto a = random_signal(rng, {20, 14}, 1);
    auto b = random_signal(rng, {20, 14}, 1);
    CHECK(ssim(a, b) == doctest::Approx(naive_ssim(a, b)).epsilon(1e-6));

    auto c3 = random_signal(rng, {12, 18}, 3);
    auto d3 = random_signal(rng, {12, 18}, 3);
    CHECK(ssim(c3, d3) == doctest::Approx(naive_ssim(c3, d3)).epsilon(1e-6));
}

TEST_CASE("ssim is symmetric and bounded by the window") {
    Rng rng(30);
    auto a = random_signal(rng, {15, 15}, 1);
    auto b = random_signal(rng, {15, 15}, 1);
    CHECK(ssim(a, b) == ssim(b, a));

    auto tiny = random_signal(rng, {8, 8}, 1);
    CHECK_THROWS_AS((void)ssim(tiny, tiny), std::invalid_argument);

    auto audio = random_signal(rng, {64}, 1);
    CHECK_THROWS_AS((void)ssim(audio, audio), std::invalid_argument);
}
