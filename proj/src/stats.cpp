#include "mechdet/stats.hpp"

#include <algorithm>
#include <cmath>

#include "mechdet/error.hpp"

namespace mechdet {

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

bool is_constant(std::span<const double> x, double tol) {
    return population_std(x) <= tol * (1.0 + std::abs(mean(x)));
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InputError("LENGTH_MISMATCH", "pearson series differ in length");
    }
    if (x.size() < 2) {
        throw InputError("TOO_SHORT", "pearson needs at least two observations");
    }
    if (is_constant(x) || is_constant(y)) {
        return {0.0, true};
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // the (n-1) factors of the sample covariance and variances cancel
    return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

}  // namespace mechdet
