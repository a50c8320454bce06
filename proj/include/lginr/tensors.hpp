#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lginr {

using index = std::int64_t;

// ---------------------------------------------------------------------------
// Dense row-major matrix of 32- or 64-bit floats. Biases are stored as 1xN.
// ---------------------------------------------------------------------------
template <typename T>
struct Mat {
    index rows = 0;
    index cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(index r, index c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c)) {}

    static Mat zeros(index r, index c) { return Mat(r, c); }

    index size() const { return rows * cols; }
    T* row(index i) { return data.data() + i * cols; }
    const T* row(index i) const { return data.data() + i * cols; }
    T& operator()(index i, index j) { return data[static_cast<std::size_t>(i * cols + j)]; }
    const T& operator()(index i, index j) const { return data[static_cast<std::size_t>(i * cols + j)]; }
};

// K equally shaped matrices stored contiguously, slice k at data + k*rows*cols.
template <typename T>
struct BatchedMat {
    index batch = 0;
    index rows = 0;
    index cols = 0;
    std::vector<T> data;

    BatchedMat() = default;
    BatchedMat(index b, index r, index c)
        : batch(b), rows(r), cols(c), data(static_cast<std::size_t>(b * r * c)) {}

    index slice_size() const { return rows * cols; }
    T* slice(index k) { return data.data() + k * slice_size(); }
    const T* slice(index k) const { return data.data() + k * slice_size(); }
};

template <typename T>
bool all_finite(const std::vector<T>& v);

template <typename T>
bool all_finite(const Mat<T>& m) { return all_finite(m.data); }
template <typename T>
bool all_finite(const BatchedMat<T>& m) { return all_finite(m.data); }

// ---------------------------------------------------------------------------
// Threading. Kernels may split disjoint output regions across threads; every
// output element is still produced by the same fixed op sequence, so results
// are bitwise independent of the thread count. Default is 1.
// ---------------------------------------------------------------------------
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over consecutive chunks of [0, total). Chunks smaller
// than grain stay on the calling thread.
void parallel_for(index total, index grain, const std::function<void(index, index)>& fn);

// ---------------------------------------------------------------------------
// Raw strided kernels. Each output element accumulates its products in
// ascending order of the contraction index; no reordering, no FMA contraction
// (enforced by -ffp-contract=off project-wide).
// ---------------------------------------------------------------------------
namespace kern {

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void mm_nn(const T* a, const T* b, T* c, index m, index k, index n,
           index lda, index ldb, index ldc, bool accumulate);

// c[m x n] (+)= a^T * b where a is [k x m]
template <typename T>
void mm_tn(const T* a, const T* b, T* c, index m, index k, index n,
           index lda, index ldb, index ldc, bool accumulate);

}  // namespace kern

// ---------------------------------------------------------------------------
// Matrix products (deterministic; see kern notes above).
// ---------------------------------------------------------------------------
template <typename T>
void matmul_into(const Mat<T>& a, const Mat<T>& b, Mat<T>& out, bool accumulate = false);

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b);

// a * b^T and a^T * b
template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b);
template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b);

template <typename T>
Mat<T> transposed(const Mat<T>& a);

// out[k] = a[k] * b[k]; bit-identical to batch-many independent matmul calls.
template <typename T>
BatchedMat<T> batched_matmul(const BatchedMat<T>& a, const BatchedMat<T>& b);

// ---------------------------------------------------------------------------
// Elementwise helpers used by the network layers.
// ---------------------------------------------------------------------------

// Polynomial sine/cosine for float32 paths: quadrant range reduction plus a
// fixed-order minimax polynomial. Max abs error < 1e-7 for |x| <= 2e3 and
// |result| <= 1 exactly. The double overloads defer to libm (used by the
// 64-bit gradient-check mode, where speed does not matter).
float fast_sin(float x);
float fast_cos(float x);
inline double fast_sin(double x) { return std::sin(x); }
inline double fast_cos(double x) { return std::cos(x); }

// out[i] = sin(scale * z[i]) / cos(scale * z[i])
template <typename T>
void sin_scaled(T scale, const T* z, T* out, index n);
template <typename T>
void cos_scaled(T scale, const T* z, T* out, index n);

// Chain-rule factor through a = sin(scale * z):
// out[i] = upstream[i] * (scale * cos(scale * z[i]))
template <typename T>
void dsin_scaled(T scale, const T* z, const T* upstream, T* out, index n);

// out[i] = a[i] + b[i]
template <typename T>
void ew_add(const T* a, const T* b, T* out, index n);

// y (out x batch) += bias broadcast over columns; bias is 1 x out.
template <typename T>
void add_col_bias(Mat<T>& y, const Mat<T>& bias, index col_begin, index col_end);

// bias_grad(0, i) += sum over columns [col_begin, col_end) of z(i, :).
// Summation uses eight interleaved lanes folded at the end; the order is
// fixed and documented rather than ascending.
template <typename T>
void accum_row_sums(const Mat<T>& z, Mat<T>& bias_grad, index col_begin, index col_end);

// ---------------------------------------------------------------------------
// Deterministic PRNG: xoshiro256++ seeded via splitmix64. The integer stream
// depends only on the seed, on every platform. split() derives an
// independently usable generator.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Unbiased integer in [0, n), n >= 1, via rejection sampling.
    std::uint64_t below(std::uint64_t n);

    // Uniform in [lo, hi): float uses 24 random mantissa bits, double 53.
    template <typename U>
    U uniform_real(U lo, U hi);

    Rng split();

private:
    std::array<std::uint64_t, 4> state_{};
};

// Matrix/stack fills; entries drawn row-major in ascending order.
template <typename T>
Mat<T> uniform(Rng& rng, T lo, T hi, index rows, index cols);
template <typename T>
BatchedMat<T> uniform_batched(Rng& rng, T lo, T hi, index batch, index rows, index cols);

}  // namespace lginr
