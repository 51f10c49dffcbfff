#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "gplm/kernels/kernels.hpp"
#include "gplm/util/rng.hpp"

using namespace gplm;

namespace {

std::vector<double> random_vec(util::Rng& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool close(double a, double b, double scale) {
    return std::fabs(a - b) <= 1e-12 * std::max(1.0, scale);
}

}  // namespace

TEST_CASE("simd kernels match the scalar reference") {
    if (!kern::avx2_available()) {
        MESSAGE("AVX2 not available; dispatch falls back to scalar");
        return;
    }
    const auto& s = kern::scalar_ops();
    const auto& v = kern::avx2_ops();
    util::Rng rng(20240117);

    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.below(40);
        const std::size_t cols = 1 + rng.below(40);
        const auto w = random_vec(rng, rows * cols);
        const auto x = random_vec(rng, cols);
        const auto b = random_vec(rng, rows);
        const auto d = random_vec(rng, rows);

        std::vector<double> out_s(rows), out_v(rows);
        s.affine(w.data(), x.data(), b.data(), out_s.data(), rows, cols);
        v.affine(w.data(), x.data(), b.data(), out_v.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            CHECK(close(out_s[r], out_v[r], double(cols)));

        std::vector<double> t_s(cols), t_v(cols);
        s.matvec_t(w.data(), d.data(), t_s.data(), rows, cols);
        v.matvec_t(w.data(), d.data(), t_v.data(), rows, cols);
        for (std::size_t c = 0; c < cols; ++c) CHECK(close(t_s[c], t_v[c], double(rows)));

        auto g_s = random_vec(rng, rows * cols);
        auto g_v = g_s;
        const auto a = random_vec(rng, cols);
        s.rank1_update(g_s.data(), d.data(), a.data(), rows, cols);
        v.rank1_update(g_v.data(), d.data(), a.data(), rows, cols);
        for (std::size_t k = 0; k < rows * cols; ++k) CHECK(close(g_s[k], g_v[k], 4.0));

        CHECK(close(s.dot(w.data(), w.data(), rows * cols),
                    v.dot(w.data(), w.data(), rows * cols), double(rows * cols) * 4.0));
        CHECK(close(s.sqdist(x.data(), a.data(), cols), v.sqdist(x.data(), a.data(), cols),
                    double(cols) * 16.0));
    }
}

TEST_CASE("relu, scale and axpy agree across implementations") {
    if (!kern::avx2_available()) return;
    const auto& s = kern::scalar_ops();
    const auto& v = kern::avx2_ops();
    util::Rng rng(7);
    for (std::size_t n : {1, 3, 4, 7, 16, 33}) {
        auto a = random_vec(rng, n);
        auto b = a;
        s.relu(a.data(), n);
        v.relu(b.data(), n);
        CHECK(a == b);  // max is exact

        auto x = random_vec(rng, n);
        auto y1 = random_vec(rng, n);
        auto y2 = y1;
        s.axpy(0.37, x.data(), y1.data(), n);
        v.axpy(0.37, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i], 4.0));

        auto c = a;
        auto d2 = a;
        s.scale(c.data(), -1.7, n);
        v.scale(d2.data(), -1.7, n);
        CHECK(c == d2);  // single multiply is exact
    }
}

TEST_CASE("poisson-binomial convolution step matches across implementations") {
    if (!kern::avx2_available()) return;
    const auto& s = kern::scalar_ops();
    const auto& v = kern::avx2_ops();
    util::Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(50);
        auto pmf_s = random_vec(rng, n + 1, 0.0, 1.0);
        pmf_s[n] = 0.0;
        auto pmf_v = pmf_s;
        const double p = rng.uniform(0.01, 0.99);
        s.pb_convolve_step(pmf_s.data(), n, p);
        v.pb_convolve_step(pmf_v.data(), n, p);
        for (std::size_t k = 0; k <= n; ++k) CHECK(close(pmf_s[k], pmf_v[k], 2.0));
    }
}

TEST_CASE("fused optimizer steps match across implementations") {
    if (!kern::avx2_available()) return;
    const auto& s = kern::scalar_ops();
    const auto& v = kern::avx2_ops();
    util::Rng rng(5150);
    for (std::size_t n : {std::size_t(1), std::size_t(5), std::size_t(8), std::size_t(130)}) {
        const auto g = random_vec(rng, n);
        auto th_s = random_vec(rng, n), th_v = th_s;
        auto r_s = random_vec(rng, n, 0.0, 0.1), r_v = r_s;
        auto v_s = random_vec(rng, n, 0.0, 0.1), v_v = v_s;
        auto vh_s = v_s, vh_v = v_s;

        s.amsgrad_step(th_s.data(), r_s.data(), v_s.data(), vh_s.data(), g.data(), 0.9,
                       0.999, 1e-3, 1e-8, n);
        v.amsgrad_step(th_v.data(), r_v.data(), v_v.data(), vh_v.data(), g.data(), 0.9,
                       0.999, 1e-3, 1e-8, n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(close(th_s[i], th_v[i], 2.0));
            CHECK(close(vh_s[i], vh_v[i], 2.0));
        }

        auto ta = th_s, tb = th_s;
        auto ra = r_s, rb = r_s, va = v_s, vb = v_s;
        s.adam_step(ta.data(), ra.data(), va.data(), g.data(), 0.9, 0.999, 10.0, 1000.0,
                    1e-3, 1e-8, n);
        v.adam_step(tb.data(), rb.data(), vb.data(), g.data(), 0.9, 0.999, 10.0, 1000.0,
                    1e-3, 1e-8, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(ta[i], tb[i], 2.0));

        auto ua = th_s, ub = th_s, wa = v_s, wb = v_s;
        s.rmsprop_step(ua.data(), wa.data(), g.data(), 0.9, 1e-3, 1e-8, n);
        v.rmsprop_step(ub.data(), wb.data(), g.data(), 0.9, 1e-3, 1e-8, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(ua[i], ub[i], 2.0));

        auto pa = th_s, pb = th_s;
        s.sgd_step(pa.data(), g.data(), 0.05, n);
        v.sgd_step(pb.data(), g.data(), 0.05, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(pa[i], pb[i], 2.0));
    }
}

TEST_CASE("active kernel set resolves to a valid implementation") {
    const auto& ops = kern::active();
    CHECK(ops.affine != nullptr);
    const std::string name = ops.name;
    CHECK((name == "scalar" || name == "avx2"));
}
