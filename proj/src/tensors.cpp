#include "lginr/tensors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

namespace lginr {

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(x)) return false;
    return true;
}
template bool all_finite<float>(const std::vector<float>&);
template bool all_finite<double>(const std::vector<double>&);

// ---------------------------------------------------------------------------
// threading
// ---------------------------------------------------------------------------
namespace {
int g_threads = 1;
}

int thread_count() { return g_threads; }

void set_thread_count(int n) {
    if (n < 1) throw std::invalid_argument("thread count must be >= 1");
    g_threads = n;
}

void parallel_for(index total, index grain, const std::function<void(index, index)>& fn) {
    if (total <= 0) return;
    int nt = g_threads;
    if (nt <= 1 || total <= grain) {
        fn(0, total);
        return;
    }
    index chunks = (total + grain - 1) / grain;
    if (chunks < nt) nt = static_cast<int>(chunks);
    index per = (total + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt - 1));
    for (int t = 1; t < nt; ++t) {
        index b = t * per;
        index e = std::min(total, b + per);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    fn(0, std::min(total, per));
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------
namespace kern {

template <typename T>
void mm_nn(const T* a, const T* b, T* c, index m, index k, index n,
           index lda, index ldb, index ldc, bool accumulate) {
    parallel_for(m, (m * k * n > (index{1} << 21)) ? 8 : m, [=](index i0, index i1) {
        for (index i = i0; i < i1; ++i) {
            T* ci = c + i * ldc;
            if (!accumulate)
                for (index j = 0; j < n; ++j) ci[j] = T(0);
            const T* ai = a + i * lda;
            for (index p = 0; p < k; ++p) {
                const T aip = ai[p];
                const T* bp = b + p * ldb;
                for (index j = 0; j < n; ++j) ci[j] += aip * bp[j];
            }
        }
    });
}

template <typename T>
void mm_tn(const T* a, const T* b, T* c, index m, index k, index n,
           index lda, index ldb, index ldc, bool accumulate) {
    parallel_for(m, (m * k * n > (index{1} << 21)) ? 8 : m, [=](index i0, index i1) {
        for (index i = i0; i < i1; ++i) {
            T* ci = c + i * ldc;
            if (!accumulate)
                for (index j = 0; j < n; ++j) ci[j] = T(0);
            for (index p = 0; p < k; ++p) {
                const T api = a[p * lda + i];
                const T* bp = b + p * ldb;
                for (index j = 0; j < n; ++j) ci[j] += api * bp[j];
            }
        }
    });
}

template void mm_nn<float>(const float*, const float*, float*, index, index, index, index, index, index, bool);
template void mm_nn<double>(const double*, const double*, double*, index, index, index, index, index, index, bool);
template void mm_tn<float>(const float*, const float*, float*, index, index, index, index, index, index, bool);
template void mm_tn<double>(const double*, const double*, double*, index, index, index, index, index, index, bool);

}  // namespace kern

template <typename T>
void matmul_into(const Mat<T>& a, const Mat<T>& b, Mat<T>& out, bool accumulate) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                                    " vs " + std::to_string(b.rows) + ")");
    if (out.rows != a.rows || out.cols != b.cols) {
        if (accumulate) throw std::invalid_argument("matmul: accumulate target has wrong shape");
        out = Mat<T>(a.rows, b.cols);
    }
    kern::mm_nn(a.data.data(), b.data.data(), out.data.data(), a.rows, a.cols, b.cols,
                a.cols, b.cols, out.cols, accumulate);
}

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    Mat<T> out;
    matmul_into(a, b, out, false);
    return out;
}

template <typename T>
Mat<T> transposed(const Mat<T>& a) {
    Mat<T> t(a.cols, a.rows);
    for (index i = 0; i < a.rows; ++i)
        for (index j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
    return matmul(a, transposed(b));
}

template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: contraction dimensions differ");
    Mat<T> out(a.cols, b.cols);
    kern::mm_tn(a.data.data(), b.data.data(), out.data.data(), a.cols, a.rows, b.cols,
                a.cols, b.cols, out.cols, false);
    return out;
}

template <typename T>
BatchedMat<T> batched_matmul(const BatchedMat<T>& a, const BatchedMat<T>& b) {
    if (a.batch != b.batch)
        throw std::invalid_argument("batched_matmul: batch counts differ");
    if (a.cols != b.rows)
        throw std::invalid_argument("batched_matmul: inner dimensions differ");
    BatchedMat<T> out(a.batch, a.rows, b.cols);
    parallel_for(a.batch, 1 + (index{1} << 21) / (1 + a.rows * a.cols * b.cols),
                 [&](index k0, index k1) {
                     for (index k = k0; k < k1; ++k)
                         kern::mm_nn(a.slice(k), b.slice(k), out.slice(k), a.rows, a.cols, b.cols,
                                     a.cols, b.cols, b.cols, false);
                 });
    return out;
}

template void matmul_into<float>(const Mat<float>&, const Mat<float>&, Mat<float>&, bool);
template void matmul_into<double>(const Mat<double>&, const Mat<double>&, Mat<double>&, bool);
template Mat<float> matmul<float>(const Mat<float>&, const Mat<float>&);
template Mat<double> matmul<double>(const Mat<double>&, const Mat<double>&);
template Mat<float> matmul_nt<float>(const Mat<float>&, const Mat<float>&);
template Mat<double> matmul_nt<double>(const Mat<double>&, const Mat<double>&);
template Mat<float> matmul_tn<float>(const Mat<float>&, const Mat<float>&);
template Mat<double> matmul_tn<double>(const Mat<double>&, const Mat<double>&);
template Mat<float> transposed<float>(const Mat<float>&);
template Mat<double> transposed<double>(const Mat<double>&);
template BatchedMat<float> batched_matmul<float>(const BatchedMat<float>&, const BatchedMat<float>&);
template BatchedMat<double> batched_matmul<double>(const BatchedMat<double>&, const BatchedMat<double>&);

// ---------------------------------------------------------------------------
// trig
// ---------------------------------------------------------------------------
namespace {

// Round-to-nearest-even via the float magic constant; valid for |v| < 2^22.
inline float round_rne(float v) {
    const float magic = 12582912.0f;  // 1.5 * 2^23
    return (v + magic) - magic;
}

// Quadrant selection returns sin for even quadrants, cos for odd, with the
// sign flipped in quadrants 2 and 3. Branch free so the loop vectorizes.
inline float sincos_core(float x, int pick_cos) {
    const float two_over_pi = 0.63661977236758134f;
    const float c1 = 1.5703125f;
    const float c2 = 4.837512969970703125e-4f;
    const float c3 = 7.54978995489188216e-8f;
    float qf = round_rne(x * two_over_pi);
    std::int32_t q = static_cast<std::int32_t>(qf) + pick_cos;
    float r = x - qf * c1;
    r -= qf * c2;
    r -= qf * c3;
    float r2 = r * r;
    float ps = -1.9515295891e-4f;
    ps = ps * r2 + 8.3321608736e-3f;
    ps = ps * r2 + -1.6666654611e-1f;
    ps = ps * r2 * r + r;
    float pc = 2.443315711809948e-5f;
    pc = pc * r2 + -1.388731625493765e-3f;
    pc = pc * r2 + 4.166664568298827e-2f;
    pc = pc * r2 - 0.5f;
    pc = pc * r2 + 1.0f;
    std::int32_t sel = -(q & 1);
    std::int32_t bits = (std::bit_cast<std::int32_t>(ps) & ~sel) | (std::bit_cast<std::int32_t>(pc) & sel);
    bits ^= (q & 2) << 30;
    return std::bit_cast<float>(bits);
}

}  // namespace

float fast_sin(float x) { return sincos_core(x, 0); }
// cos(x) = sin(x + pi/2): shift the quadrant, negate the sign convention.
float fast_cos(float x) { return sincos_core(x, 1); }

template <typename T>
void sin_scaled(T scale, const T* z, T* out, index n) {
    parallel_for(n, index{1} << 16, [=](index b, index e) {
        for (index i = b; i < e; ++i) out[i] = fast_sin(scale * z[i]);
    });
}

template <typename T>
void cos_scaled(T scale, const T* z, T* out, index n) {
    parallel_for(n, index{1} << 16, [=](index b, index e) {
        for (index i = b; i < e; ++i) out[i] = fast_cos(scale * z[i]);
    });
}

template <typename T>
void dsin_scaled(T scale, const T* z, const T* upstream, T* out, index n) {
    parallel_for(n, index{1} << 16, [=](index b, index e) {
        for (index i = b; i < e; ++i) out[i] = upstream[i] * (scale * fast_cos(scale * z[i]));
    });
}

template <typename T>
void ew_add(const T* a, const T* b, T* out, index n) {
    for (index i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template void sin_scaled<float>(float, const float*, float*, index);
template void sin_scaled<double>(double, const double*, double*, index);
template void cos_scaled<float>(float, const float*, float*, index);
template void cos_scaled<double>(double, const double*, double*, index);
template void dsin_scaled<float>(float, const float*, const float*, float*, index);
template void dsin_scaled<double>(double, const double*, const double*, double*, index);
template void ew_add<float>(const float*, const float*, float*, index);
template void ew_add<double>(const double*, const double*, double*, index);

template <typename T>
void add_col_bias(Mat<T>& y, const Mat<T>& bias, index col_begin, index col_end) {
    if (bias.rows != 1 || bias.cols != y.rows)
        throw std::invalid_argument("add_col_bias: bias must be 1 x rows(y)");
    for (index i = 0; i < y.rows; ++i) {
        const T b = bias(0, i);
        T* yi = y.row(i);
        for (index j = col_begin; j < col_end; ++j) yi[j] += b;
    }
}

template <typename T>
void accum_row_sums(const Mat<T>& z, Mat<T>& bias_grad, index col_begin, index col_end) {
    if (bias_grad.rows != 1 || bias_grad.cols != z.rows)
        throw std::invalid_argument("accum_row_sums: target must be 1 x rows(z)");
    for (index i = 0; i < z.rows; ++i) {
        const T* zi = z.row(i);
        T lane[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
        index j = col_begin;
        for (; j + 8 <= col_end; j += 8)
            for (int l = 0; l < 8; ++l) lane[l] += zi[j + l];
        T s = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
              ((lane[4] + lane[5]) + (lane[6] + lane[7]));
        for (; j < col_end; ++j) s += zi[j];
        bias_grad(0, i) += s;
    }
}

template void add_col_bias<float>(Mat<float>&, const Mat<float>&, index, index);
template void add_col_bias<double>(Mat<double>&, const Mat<double>&, index, index);
template void accum_row_sums<float>(const Mat<float>&, Mat<float>&, index, index);
template void accum_row_sums<double>(const Mat<double>&, Mat<double>&, index, index);

// ---------------------------------------------------------------------------
// rng
// ---------------------------------------------------------------------------
namespace {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be >= 1");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

template <>
float Rng::uniform_real<float>(float lo, float hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform: requires lo < hi");
    const float u = static_cast<float>(next_u64() >> 40) * 0x1p-24f;
    return lo + u * (hi - lo);
}

template <>
double Rng::uniform_real<double>(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform: requires lo < hi");
    const double u = static_cast<double>(next_u64() >> 11) * 0x1p-53;
    return lo + u * (hi - lo);
}

Rng Rng::split() { return Rng(next_u64()); }

template <typename T>
Mat<T> uniform(Rng& rng, T lo, T hi, index rows, index cols) {
    Mat<T> m(rows, cols);
    for (auto& v : m.data) v = rng.uniform_real<T>(lo, hi);
    return m;
}

template <typename T>
BatchedMat<T> uniform_batched(Rng& rng, T lo, T hi, index batch, index rows, index cols) {
    BatchedMat<T> m(batch, rows, cols);
    for (auto& v : m.data) v = rng.uniform_real<T>(lo, hi);
    return m;
}

template Mat<float> uniform<float>(Rng&, float, float, index, index);
template Mat<double> uniform<double>(Rng&, double, double, index, index);
template BatchedMat<float> uniform_batched<float>(Rng&, float, float, index, index, index);
template BatchedMat<double> uniform_batched<double>(Rng&, double, double, index, index, index);

}  // namespace lginr
