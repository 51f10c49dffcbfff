#include "gplm/exact/poisson_binomial.hpp"

#include <stdexcept>

#include "gplm/kernels/kernels.hpp"

namespace gplm::exact {

std::vector<double> poisson_binomial_pmf(std::span<const double> probs) {
    const auto& kern = kern::active();
    std::vector<double> pmf(probs.size() + 1, 0.0);
    pmf[0] = 1.0;
    std::size_t added = 0;
    for (double p : probs) {
        if (!(p > 0.0 && p < 1.0))
            throw std::domain_error("poisson_binomial: probabilities must lie in (0,1)");
        // pmf occupies 0..added before the step, 0..added+1 after
        kern.pb_convolve_step(pmf.data(), added + 1, p);
        ++added;
    }
    return pmf;
}

double poisson_binomial_cdf(std::span<const double> probs, long o) {
    if (o < 0 || o > long(probs.size()))
        throw std::domain_error("poisson_binomial_cdf: o outside support");
    const auto pmf = poisson_binomial_pmf(probs);
    double acc = 0.0;
    for (long k = 0; k <= o; ++k) acc += pmf[k];
    return acc;
}

}  // namespace gplm::exact
