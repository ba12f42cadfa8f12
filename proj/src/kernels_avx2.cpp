#if defined(MSBT_HAVE_AVX2)

#include <immintrin.h>

#include "msbt/kernels.hpp"

namespace msbt::kernels {
namespace {

// 4 doubles per __m256d lane. Unaligned loads throughout; tensor buffers are
// plain std::vector storage.

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void matmul_nn_avx2(const double* a, const double* b, double* c,
                    size_t m, size_t k, size_t n) {
    const size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            const __m256d av = _mm256_set1_pd(arow[l]);
            const double* brow = b + l * n;
            size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_add_pd(cv, _mm256_mul_pd(av, _mm256_loadu_pd(brow + j)));
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += arow[l] * brow[j];
        }
    }
}

void matmul_nt_avx2(const double* a, const double* b, double* c,
                    size_t m, size_t k, size_t n) {
    const size_t k4 = k & ~size_t(3);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            size_t l = 0;
            for (; l < k4; l += 4) {
                acc = _mm256_add_pd(
                    acc, _mm256_mul_pd(_mm256_loadu_pd(arow + l), _mm256_loadu_pd(brow + l)));
            }
            double sum = hsum(acc);
            for (; l < k; ++l) sum += arow[l] * brow[l];
            crow[j] += sum;
        }
    }
}

void matmul_tn_avx2(const double* a, const double* b, double* c,
                    size_t m, size_t k, size_t n) {
    const size_t n4 = n & ~size_t(3);
    for (size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (size_t i = 0; i < m; ++i) {
            const __m256d av = _mm256_set1_pd(arow[i]);
            double* crow = c + i * n;
            size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_add_pd(cv, _mm256_mul_pd(av, _mm256_loadu_pd(brow + j)));
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += arow[i] * brow[j];
        }
    }
}

void add_avx2(const double* a, const double* b, double* dst, size_t n) {
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(dst + i,
                         _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* dst, size_t n) {
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(dst + i,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_avx2(double alpha, const double* x, double* dst, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) dst[i] = alpha * x[i];
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void acc_avx2(const double* x, double* y, size_t n) {
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(y + i,
                         _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

}  // namespace

const Kernels kAvx2 = {
    "avx2",
    matmul_nn_avx2,
    matmul_nt_avx2,
    matmul_tn_avx2,
    add_avx2,
    mul_avx2,
    scale_avx2,
    axpy_avx2,
    acc_avx2,
};

}  // namespace msbt::kernels

#endif  // MSBT_HAVE_AVX2
