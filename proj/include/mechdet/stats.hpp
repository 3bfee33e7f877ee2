#pragma once

#include <span>

namespace mechdet {

struct PearsonResult {
    double r = 0.0;
    bool degenerate = false;  // one series was constant; r reported as 0
};

// Sample Pearson correlation. Throws InputError on length mismatch or n < 2.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
// Population (1/n) standard deviation.
double population_std(std::span<const double> x);

// A series counts as constant when its population std is within this
// relative tolerance of zero, which absorbs the rounding in the mean.
bool is_constant(std::span<const double> x, double tol = 1e-12);

}  // namespace mechdet
