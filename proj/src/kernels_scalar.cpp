#include "msbt/kernels.hpp"

namespace msbt::kernels {
namespace {

void matmul_nn_scalar(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + l * n;
            for (size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void matmul_nt_scalar(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (size_t l = 0; l < k; ++l) {
                acc += arow[l] * brow[l];
            }
            crow[j] += acc;
        }
    }
}

void matmul_tn_scalar(const double* a, const double* b, double* c,
                      size_t m, size_t k, size_t n) {
    for (size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void add_scalar_k(const double* a, const double* b, double* dst, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_scalar_k(const double* a, const double* b, double* dst, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_scalar_k(double alpha, const double* x, double* dst, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = alpha * x[i];
}

void axpy_scalar_k(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void acc_scalar_k(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

}  // namespace

const Kernels kScalar = {
    "scalar",
    matmul_nn_scalar,
    matmul_nt_scalar,
    matmul_tn_scalar,
    add_scalar_k,
    mul_scalar_k,
    scale_scalar_k,
    axpy_scalar_k,
    acc_scalar_k,
};

}  // namespace msbt::kernels
