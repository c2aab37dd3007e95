#pragma once

#include <functional>
#include <span>
#include <vector>

namespace trer {

// Central-difference gradient check. Evaluates f at x0 +/- h*e_i for every
// coordinate and compares against analytic_grad. Returns the maximum over
// coordinates of |a - n| / max(1e-8, |a| + |n|).
//
// Throws NumericError when an evaluation of f is non-finite.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> x0,
                  std::span<const double> analytic_grad, double h);

} // namespace trer
