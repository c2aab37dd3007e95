#include "trer/gradcheck.hpp"

#include <cmath>
#include <string>

#include "trer/errors.hpp"

namespace trer {

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> x0,
                  std::span<const double> analytic_grad, double h) {
    if (analytic_grad.size() != x0.size()) {
        throw ShapeError("grad_check: gradient length " +
                         std::to_string(analytic_grad.size()) + " vs " +
                         std::to_string(x0.size()) + " parameters");
    }
    std::vector<double> x(x0.begin(), x0.end());
    double max_rel = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("grad_check: non-finite f at coordinate " +
                               std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic_grad[i];
        const double rel =
            std::fabs(a - numeric) /
            std::max(1e-8, std::fabs(a) + std::fabs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace trer
