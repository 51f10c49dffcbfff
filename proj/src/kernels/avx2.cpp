#include "gplm/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define GPLM_X86 1
#include <immintrin.h>
#else
#define GPLM_X86 0
#endif

#include <cmath>

namespace gplm::kern {

#if GPLM_X86

#define GPLM_AVX2 __attribute__((target("avx2,fma")))

namespace {

GPLM_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

GPLM_AVX2 void affine_avx2(const double* w, const double* x, const double* b,
                           double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        __m256d acc = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4)
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(wr + c), _mm256_loadu_pd(x + c), acc);
        double tail = b ? b[r] : 0.0;
        for (; c < cols; ++c) tail += wr[c] * x[c];
        out[r] = hsum(acc) + tail;
    }
}

GPLM_AVX2 void matvec_t_avx2(const double* w, const double* d, double* out,
                             std::size_t rows, std::size_t cols) {
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) _mm256_storeu_pd(out + c, _mm256_setzero_pd());
    for (; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        const __m256d dr = _mm256_set1_pd(d[r]);
        std::size_t k = 0;
        for (; k + 4 <= cols; k += 4) {
            __m256d acc = _mm256_loadu_pd(out + k);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(wr + k), dr, acc);
            _mm256_storeu_pd(out + k, acc);
        }
        for (; k < cols; ++k) out[k] += wr[k] * d[r];
    }
}

GPLM_AVX2 void rank1_update_avx2(double* g, const double* d, const double* a,
                                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* gr = g + r * cols;
        const __m256d dr = _mm256_set1_pd(d[r]);
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d acc = _mm256_loadu_pd(gr + c);
            acc = _mm256_fmadd_pd(dr, _mm256_loadu_pd(a + c), acc);
            _mm256_storeu_pd(gr + c, acc);
        }
        for (; c < cols; ++c) gr[c] += d[r] * a[c];
    }
}

GPLM_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_loadu_pd(y + i);
        acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), acc);
        _mm256_storeu_pd(y + i, acc);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

GPLM_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return hsum(acc) + tail;
}

GPLM_AVX2 double sqdist_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d diff =
            _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(diff, diff, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double diff = x[i] - y[i];
        tail += diff * diff;
    }
    return hsum(acc) + tail;
}

GPLM_AVX2 void relu_avx2(double* v, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(v + i, _mm256_max_pd(_mm256_loadu_pd(v + i), zero));
    for (; i < n; ++i)
        if (v[i] < 0.0) v[i] = 0.0;
}

GPLM_AVX2 void scale_avx2(double* v, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(v + i, _mm256_mul_pd(_mm256_loadu_pd(v + i), vs));
    for (; i < n; ++i) v[i] *= s;
}

// Descending blocks only read indices below anything already written, so the
// in-place shift-and-blend stays consistent with the scalar recurrence.
GPLM_AVX2 void pb_convolve_step_avx2(double* pmf, std::size_t count, double p) {
    const double q = 1.0 - p;
    const __m256d vp = _mm256_set1_pd(p);
    const __m256d vq = _mm256_set1_pd(q);
    std::size_t k = count;
    while (k >= 4) {
        const std::size_t base = k - 3;
        const __m256d cur = _mm256_loadu_pd(pmf + base);
        const __m256d prev = _mm256_loadu_pd(pmf + base - 1);
        _mm256_storeu_pd(pmf + base,
                         _mm256_fmadd_pd(cur, vq, _mm256_mul_pd(prev, vp)));
        k -= 4;
    }
    for (; k >= 1; --k) pmf[k] = pmf[k] * q + pmf[k - 1] * p;
    pmf[0] *= q;
}

GPLM_AVX2 void amsgrad_step_avx2(double* theta, double* r, double* v, double* vhat,
                                 const double* g, double beta1, double beta2,
                                 double eta, double eps, std::size_t n) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
    const __m256d veta = _mm256_set1_pd(eta);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d ri = _mm256_loadu_pd(r + i);
        ri = _mm256_fmadd_pd(vb1, ri, _mm256_mul_pd(vb1c, gi));
        _mm256_storeu_pd(r + i, ri);
        __m256d vi = _mm256_loadu_pd(v + i);
        vi = _mm256_fmadd_pd(vb2, vi, _mm256_mul_pd(vb2c, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(v + i, vi);
        __m256d vh = _mm256_max_pd(_mm256_loadu_pd(vhat + i), vi);
        _mm256_storeu_pd(vhat + i, vh);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vh), veps);
        __m256d th = _mm256_loadu_pd(theta + i);
        th = _mm256_sub_pd(th, _mm256_div_pd(_mm256_mul_pd(veta, ri), denom));
        _mm256_storeu_pd(theta + i, th);
    }
    for (; i < n; ++i) {
        r[i] = beta1 * r[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        if (v[i] > vhat[i]) vhat[i] = v[i];
        theta[i] -= eta * r[i] / (std::sqrt(vhat[i]) + eps);
    }
}

GPLM_AVX2 void adam_step_avx2(double* theta, double* r, double* v, const double* g,
                              double beta1, double beta2, double corr1,
                              double corr2, double eta, double eps, std::size_t n) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
    const __m256d vc1 = _mm256_set1_pd(corr1);
    const __m256d vc2 = _mm256_set1_pd(corr2);
    const __m256d veta = _mm256_set1_pd(eta);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d ri = _mm256_loadu_pd(r + i);
        ri = _mm256_fmadd_pd(vb1, ri, _mm256_mul_pd(vb1c, gi));
        _mm256_storeu_pd(r + i, ri);
        __m256d vi = _mm256_loadu_pd(v + i);
        vi = _mm256_fmadd_pd(vb2, vi, _mm256_mul_pd(vb2c, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(v + i, vi);
        const __m256d rhat = _mm256_mul_pd(ri, vc1);
        const __m256d vhat = _mm256_mul_pd(vi, vc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        __m256d th = _mm256_loadu_pd(theta + i);
        th = _mm256_sub_pd(th, _mm256_div_pd(_mm256_mul_pd(veta, rhat), denom));
        _mm256_storeu_pd(theta + i, th);
    }
    for (; i < n; ++i) {
        r[i] = beta1 * r[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double rhat = r[i] * corr1;
        const double vhat = v[i] * corr2;
        theta[i] -= eta * rhat / (std::sqrt(vhat) + eps);
    }
}

GPLM_AVX2 void rmsprop_step_avx2(double* theta, double* v, const double* g,
                                 double beta, double eta, double eps,
                                 std::size_t n) {
    const __m256d vb = _mm256_set1_pd(beta);
    const __m256d vbc = _mm256_set1_pd(1.0 - beta);
    const __m256d veta = _mm256_set1_pd(eta);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        vi = _mm256_fmadd_pd(vb, vi, _mm256_mul_pd(vbc, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(v + i, vi);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vi), veps);
        __m256d th = _mm256_loadu_pd(theta + i);
        th = _mm256_sub_pd(th, _mm256_div_pd(_mm256_mul_pd(veta, gi), denom));
        _mm256_storeu_pd(theta + i, th);
    }
    for (; i < n; ++i) {
        v[i] = beta * v[i] + (1.0 - beta) * g[i] * g[i];
        theta[i] -= eta * g[i] / (std::sqrt(v[i]) + eps);
    }
}

GPLM_AVX2 void sgd_step_avx2(double* theta, const double* g, double eta,
                             std::size_t n) {
    const __m256d veta = _mm256_set1_pd(-eta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d th = _mm256_loadu_pd(theta + i);
        th = _mm256_fmadd_pd(veta, _mm256_loadu_pd(g + i), th);
        _mm256_storeu_pd(theta + i, th);
    }
    for (; i < n; ++i) theta[i] -= eta * g[i];
}

}  // namespace

bool avx2_available() {
    static const bool ok =
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok;
}

const Ops& avx2_ops() {
    static const Ops ops{affine_avx2,
                         matvec_t_avx2,
                         rank1_update_avx2,
                         axpy_avx2,
                         dot_avx2,
                         sqdist_avx2,
                         relu_avx2,
                         scale_avx2,
                         pb_convolve_step_avx2,
                         amsgrad_step_avx2,
                         adam_step_avx2,
                         rmsprop_step_avx2,
                         sgd_step_avx2,
                         "avx2"};
    return ops;
}

#else  // !GPLM_X86

bool avx2_available() { return false; }
const Ops& avx2_ops() { return scalar_ops(); }

#endif

}  // namespace gplm::kern
