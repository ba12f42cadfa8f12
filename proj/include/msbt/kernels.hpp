#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace msbt::kernels {

// Double-precision inner loops behind the tensor ops. All matmul variants
// ACCUMULATE into c (callers zero-initialize when they want a plain product),
// which lets the backward pass add into existing gradient buffers directly.
//
// Scalar versions are the reference; SIMD variants must agree with them to
// tight tolerance (see tests/test_kernels.cpp). Selection happens once per
// process: best available instruction set, overridable with MSBT_KERNELS.
struct Kernels {
    const char* name;

    // c[m x n] += a[m x k] * b[k x n]
    void (*matmul_nn)(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n);
    // c[m x n] += a[m x k] * b[n x k]^T   (rows of b are the contraction axis)
    void (*matmul_nt)(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n);
    // c[m x n] += a[k x m]^T * b[k x n]
    void (*matmul_tn)(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n);

    void (*add)(const double* a, const double* b, double* dst, size_t n);   // dst = a + b
    void (*mul)(const double* a, const double* b, double* dst, size_t n);   // dst = a .* b
    void (*scale)(double alpha, const double* x, double* dst, size_t n);    // dst = alpha * x
    void (*axpy)(double alpha, const double* x, double* y, size_t n);       // y += alpha * x
    void (*acc)(const double* x, double* y, size_t n);                      // y += x
};

extern const Kernels kScalar;
#if defined(MSBT_HAVE_AVX2)
extern const Kernels kAvx2;
#endif

// The active kernel table. First call performs detection (or honors the
// MSBT_KERNELS environment variable); afterwards the choice is fixed.
const Kernels& active();

// Force a backend by name ("scalar", "avx2"). Throws ConfigError if the name
// is unknown or the backend is not available on this machine.
void force(const std::string& name);

std::vector<std::string> available();

}  // namespace msbt::kernels
