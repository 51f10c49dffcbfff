#include "gplm/kernels/kernels.hpp"

#include <cmath>

namespace gplm::kern {
namespace {

void affine_scalar(const double* w, const double* x, const double* b,
                   double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = b ? b[r] : 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

void matvec_t_scalar(const double* w, const double* d, double* out,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        const double dr = d[r];
        for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * dr;
    }
}

void rank1_update_scalar(double* g, const double* d, const double* a,
                         std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* gr = g + r * cols;
        const double dr = d[r];
        for (std::size_t c = 0; c < cols; ++c) gr[c] += dr * a[c];
    }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sqdist_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = x[i] - y[i];
        acc += diff * diff;
    }
    return acc;
}

void relu_scalar(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (v[i] < 0.0) v[i] = 0.0;
}

void scale_scalar(double* v, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] *= s;
}

void pb_convolve_step_scalar(double* pmf, std::size_t count, double p) {
    const double q = 1.0 - p;
    for (std::size_t k = count; k >= 1; --k) pmf[k] = pmf[k] * q + pmf[k - 1] * p;
    pmf[0] *= q;
}

void amsgrad_step_scalar(double* theta, double* r, double* v, double* vhat,
                         const double* g, double beta1, double beta2,
                         double eta, double eps, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = beta1 * r[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        if (v[i] > vhat[i]) vhat[i] = v[i];
        theta[i] -= eta * r[i] / (std::sqrt(vhat[i]) + eps);
    }
}

void adam_step_scalar(double* theta, double* r, double* v, const double* g,
                      double beta1, double beta2, double corr1, double corr2,
                      double eta, double eps, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = beta1 * r[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double rhat = r[i] * corr1;
        const double vhat = v[i] * corr2;
        theta[i] -= eta * rhat / (std::sqrt(vhat) + eps);
    }
}

void rmsprop_step_scalar(double* theta, double* v, const double* g,
                         double beta, double eta, double eps, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = beta * v[i] + (1.0 - beta) * g[i] * g[i];
        theta[i] -= eta * g[i] / (std::sqrt(v[i]) + eps);
    }
}

void sgd_step_scalar(double* theta, const double* g, double eta, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) theta[i] -= eta * g[i];
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{affine_scalar,
                         matvec_t_scalar,
                         rank1_update_scalar,
                         axpy_scalar,
                         dot_scalar,
                         sqdist_scalar,
                         relu_scalar,
                         scale_scalar,
                         pb_convolve_step_scalar,
                         amsgrad_step_scalar,
                         adam_step_scalar,
                         rmsprop_step_scalar,
                         sgd_step_scalar,
                         "scalar"};
    return ops;
}

}  // namespace gplm::kern
