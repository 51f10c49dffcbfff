#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Dense double-precision kernels behind the model and optimizer inner loops.
// Each operation has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a vectorized variant. The active set is chosen once at startup:
// highest supported ISA by default, overridable with GPLM_KERNELS=scalar|avx2.
// SIMD variants are tolerance-equivalence-tested against the scalar ones.
namespace gplm::kern {

struct Ops {
    // out = W x + b, W row-major rows x cols
    void (*affine)(const double* w, const double* x, const double* b,
                   double* out, std::size_t rows, std::size_t cols);
    // out = W^T d
    void (*matvec_t)(const double* w, const double* d, double* out,
                     std::size_t rows, std::size_t cols);
    // G += d a^T (rank-1 gradient accumulation)
    void (*rank1_update)(double* g, const double* d, const double* a,
                         std::size_t rows, std::size_t cols);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum of squared differences, sum_k (x_k - y_k)^2
    double (*sqdist)(const double* x, const double* y, std::size_t n);
    void (*relu)(double* v, std::size_t n);
    void (*scale)(double* v, double s, std::size_t n);
    // one Bernoulli added to a Poisson-binomial pmf prefix:
    // pmf[k] = pmf[k]*(1-p) + pmf[k-1]*p for k = count..1, pmf[0] *= 1-p
    void (*pb_convolve_step)(double* pmf, std::size_t count, double p);
    // fused optimizer updates over a flat parameter block
    void (*amsgrad_step)(double* theta, double* r, double* v, double* vhat,
                         const double* g, double beta1, double beta2,
                         double eta, double eps, std::size_t n);
    void (*adam_step)(double* theta, double* r, double* v, const double* g,
                      double beta1, double beta2, double corr1, double corr2,
                      double eta, double eps, std::size_t n);
    void (*rmsprop_step)(double* theta, double* v, const double* g,
                         double beta, double eta, double eps, std::size_t n);
    void (*sgd_step)(double* theta, const double* g, double eta, std::size_t n);

    const char* name;
};

const Ops& scalar_ops();
bool avx2_available();
const Ops& avx2_ops();  // valid only when avx2_available()

// Selected at first use from CPU features and GPLM_KERNELS.
const Ops& active();

}  // namespace gplm::kern
