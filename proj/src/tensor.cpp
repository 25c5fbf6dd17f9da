#include "ghq/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>

#ifdef GHQ_USE_CBLAS
#include <cblas.h>
#endif

namespace ghq {

namespace {

void check_matmul(const Tensor& a, const Tensor& b, std::size_t ak, std::size_t bk) {
    if (a.shape.size() != 2 || b.shape.size() != 2)
        throw std::invalid_argument("matmul: expected 2-D tensors");
    if (ak != bk)
        throw std::invalid_argument("matmul: inner dims mismatch " + a.shape_str() +
                                    " x " + b.shape_str());
}

#ifdef GHQ_USE_CBLAS
// OpenBLAS reads its thread count at first use; pin to one thread so results
// do not depend on machine core count.
void pin_blas_threads() {
    static std::once_flag once;
    std::call_once(once, [] { setenv("OPENBLAS_NUM_THREADS", "1", 0); });
}
#endif

void naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                const double* a, std::size_t lda, const double* b, std::size_t ldb,
                double* c) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = ta ? a[p * lda + i] : a[i * lda + p];
            if (av == 0.0) continue;
            const double* brow = tb ? nullptr : b + p * ldb;
            double* crow = c + i * n;
            if (tb) {
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
            } else {
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
}

Tensor gemm(bool ta, bool tb, const Tensor& a, const Tensor& b) {
    std::size_t m = ta ? a.shape[1] : a.shape[0];
    std::size_t ka = ta ? a.shape[0] : a.shape[1];
    std::size_t kb = tb ? b.shape[1] : b.shape[0];
    std::size_t n = tb ? b.shape[0] : b.shape[1];
    check_matmul(a, b, ka, kb);
    Tensor c = Tensor::zeros({m, n});
#ifdef GHQ_USE_CBLAS
    pin_blas_threads();
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
                tb ? CblasTrans : CblasNoTrans, (int)m, (int)n, (int)ka, 1.0,
                a.data.data(), (int)a.shape[1], b.data.data(), (int)b.shape[1], 0.0,
                c.data.data(), (int)n);
#else
    naive_gemm(ta, tb, m, n, ka, a.data.data(), a.shape[1], b.data.data(), b.shape[1],
               c.data.data());
#endif
    return c;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return gemm(false, false, a, b); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return gemm(false, true, a, b); }
Tensor matmul_tn(const Tensor& a, const Tensor& b) { return gemm(true, false, a, b); }

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace ghq
