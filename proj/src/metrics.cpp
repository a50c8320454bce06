#include "lginr/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lginr {

namespace {

void check_shapes(const Signal& a, const Signal& b, const char* op) {
    if (a.resolution != b.resolution || a.channels != b.channels)
        throw std::invalid_argument(std::string(op) + ": signal shapes differ");
}

}  // namespace

double mse(const Signal& a, const Signal& b) {
    check_shapes(a, b, "mse");
    double acc = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = (static_cast<double>(a.values[i]) - static_cast<double>(b.values[i])) / 2.0;
        acc += d * d;
    }
    return acc / static_cast<double>(a.values.size());
}

double psnr_from_mse(double mse01) {
    if (mse01 <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse01);
}

double psnr(const Signal& a, const Signal& b) { return psnr_from_mse(mse(a, b)); }

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;

std::vector<double> gaussian_window() {
    std::vector<double> w(kWindow);
    const double sigma = 1.5;
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
        const double x = i - kRadius;
        w[static_cast<std::size_t>(i)] = std::exp(-(x * x) / (2 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// separable valid-region blur: in is h x w, out is (h-10) x (w-10)
void blur_valid(const std::vector<double>& in, index h, index w, const std::vector<double>& win,
                std::vector<double>& tmp, std::vector<double>& out) {
    const index wv = w - 2 * kRadius;
    tmp.assign(static_cast<std::size_t>(h * wv), 0.0);
    for (index i = 0; i < h; ++i)
        for (index j = 0; j < wv; ++j) {
            double acc = 0;
            const double* row = in.data() + i * w + j;
            for (int t = 0; t < kWindow; ++t) acc += win[static_cast<std::size_t>(t)] * row[t];
            tmp[static_cast<std::size_t>(i * wv + j)] = acc;
        }
    const index hv = h - 2 * kRadius;
    out.assign(static_cast<std::size_t>(hv * wv), 0.0);
    for (index i = 0; i < hv; ++i)
        for (index j = 0; j < wv; ++j) {
            double acc = 0;
            for (int t = 0; t < kWindow; ++t)
                acc += win[static_cast<std::size_t>(t)] * tmp[static_cast<std::size_t>((i + t) * wv + j)];
            out[static_cast<std::size_t>(i * wv + j)] = acc;
        }
}

}  // namespace

double ssim(const Signal& a, const Signal& b) {
    check_shapes(a, b, "ssim");
    if (a.dims() != 2) throw std::invalid_argument("ssim: needs 2-dimensional signals");
    const index h = a.resolution[0], w = a.resolution[1];
    if (h < kWindow || w < kWindow)
        throw std::invalid_argument("ssim: signal smaller than the 11x11 window");

    const auto win = gaussian_window();
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;

    const index hv = h - 2 * kRadius, wv = w - 2 * kRadius;
    std::vector<double> pa(static_cast<std::size_t>(h * w)), pb(pa.size()), paa(pa.size()),
        pbb(pa.size()), pab(pa.size());
    std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;

    double total = 0;
    for (index c = 0; c < a.channels; ++c) {
        for (index i = 0; i < h * w; ++i) {
            const double va = (static_cast<double>(a.values[static_cast<std::size_t>(i * a.channels + c)]) + 1.0) / 2.0;
            const double vb = (static_cast<double>(b.values[static_cast<std::size_t>(i * a.channels + c)]) + 1.0) / 2.0;
            pa[static_cast<std::size_t>(i)] = va;
            pb[static_cast<std::size_t>(i)] = vb;
            paa[static_cast<std::size_t>(i)] = va * va;
            pbb[static_cast<std::size_t>(i)] = vb * vb;
            pab[static_cast<std::size_t>(i)] = va * vb;
        }
        blur_valid(pa, h, w, win, tmp, mu_a);
        blur_valid(pb, h, w, win, tmp, mu_b);
        blur_valid(paa, h, w, win, tmp, m_aa);
        blur_valid(pbb, h, w, win, tmp, m_bb);
        blur_valid(pab, h, w, win, tmp, m_ab);

        double acc = 0;
        for (index i = 0; i < hv * wv; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const double ma = mu_a[iu], mb = mu_b[iu];
            const double va = m_aa[iu] - ma * ma;
            const double vb = m_bb[iu] - mb * mb;
            const double cov = m_ab[iu] - ma * mb;
            acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += acc / static_cast<double>(hv * wv);
    }
    return total / static_cast<double>(a.channels);
}

}  // namespace lginr
