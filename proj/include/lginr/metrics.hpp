#pragma once

#include "lginr/signalio.hpp"

namespace lginr {

// Reconstruction quality on the [0, 1] scale (values mapped via (v + 1) / 2).

double mse(const Signal& a, const Signal& b);

// 10 * log10(1 / mse) with MAX = 1; +infinity when the signals are identical.
double psnr(const Signal& a, const Signal& b);
double psnr_from_mse(double mse01);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// data range 1, valid window positions only, averaged over channels.
double ssim(const Signal& a, const Signal& b);

}  // namespace lginr
