#pragma once

#include <span>
#include <vector>

namespace gplm::exact {

// pmf of a sum of independent Bernoulli(p_j) variables, computed by the
// add-one-variable convolution recurrence: O(n^2) time, O(n) space.
// Requires every p_j in (0,1).
std::vector<double> poisson_binomial_pmf(std::span<const double> probs);

// P(O <= o); also O(n^2) through the pmf
double poisson_binomial_cdf(std::span<const double> probs, long o);

}  // namespace gplm::exact
