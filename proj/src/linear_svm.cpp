#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mechdet/classify.hpp"
#include "mechdet/error.hpp"
#include "mechdet/rng.hpp"

namespace mechdet {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double sign_of(int label) { return label == 1 ? 1.0 : -1.0; }
double weight_of(std::span<const double> sw, std::size_t i) { return sw.empty() ? 1.0 : sw[i]; }

}  // namespace

double svm_objective(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double lambda,
                     std::span<const double> sw) {
    if (X.rows() != y.size() || X.cols() != w.size() || X.rows() == 0) {
        throw InputError("SHAPE_MISMATCH", "svm inputs disagree in shape");
    }
    double hinge = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        hinge += weight_of(sw, i) * std::max(0.0, 1.0 - sign_of(y[i]) * (dot(X.row(i), w) + b));
    }
    return 0.5 * lambda * dot(w, w) + hinge / static_cast<double>(X.rows());
}

void svm_subgradient(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double lambda,
                     std::span<double> grad_w, double& grad_b, std::span<const double> sw) {
    if (X.rows() != y.size() || X.cols() != w.size() || grad_w.size() != w.size()) {
        throw InputError("SHAPE_MISMATCH", "svm inputs disagree in shape");
    }
    const double n = static_cast<double>(X.rows());
    for (std::size_t k = 0; k < w.size(); ++k) grad_w[k] = lambda * w[k];
    grad_b = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto x = X.row(i);
        const double s = sign_of(y[i]);
        if (s * (dot(x, w) + b) < 1.0) {
            const double g = weight_of(sw, i) * s / n;
            for (std::size_t k = 0; k < x.size(); ++k) grad_w[k] -= g * x[k];
            grad_b -= g;
        }
    }
}

LinearSvmModel train_linear_svm(const Matrix& X, std::span<const int> y, const LinearSvmConfig& cfg) {
    const std::size_t n = X.rows();
    const std::size_t C = X.cols();
    if (n != y.size() || n == 0) {
        throw InputError("SHAPE_MISMATCH", "svm training data and labels disagree");
    }
    if (!(cfg.lambda > 0.0) || cfg.epochs < 1) {
        throw InputError("BAD_CONFIG", "linear svm needs lambda > 0 and at least one epoch");
    }
    const std::vector<double> sw = cfg.class_weighting ? balanced_sample_weights(y) : std::vector<double>{};

    double row_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) row_norm2 += dot(X.row(i), X.row(i));
    row_norm2 /= static_cast<double>(n);
    const double bias_scale = row_norm2 > 0.0 ? row_norm2 : 1.0;
    const double radius = 1.0 / std::sqrt(cfg.lambda);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> w(C, 0.0), avg_w(C);
    double b = 0.0;
    LinearSvmModel best;
    double best_obj = std::numeric_limits<double>::infinity();
    std::uint64_t t = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        std::fill(avg_w.begin(), avg_w.end(), 0.0);
        double avg_b = 0.0;
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
            const auto x = X.row(i);
            const double s = sign_of(y[i]);
            const double margin = s * (dot(x, w) + b);
            const double shrink = 1.0 - eta * cfg.lambda;
            for (auto& v : w) v *= shrink;
            if (margin < 1.0) {
                const double g = eta * weight_of(sw, i) * s;
                for (std::size_t k = 0; k < C; ++k) w[k] += g * x[k];
                b += g * bias_scale;
            }
            const double norm = std::sqrt(dot(w, w));
            if (norm > radius) {
                for (auto& v : w) v *= radius / norm;
            }
            for (std::size_t k = 0; k < C; ++k) avg_w[k] += w[k];
            avg_b += b;
        }
        for (auto& v : avg_w) v /= static_cast<double>(n);
        avg_b /= static_cast<double>(n);

        const double obj = svm_objective(X, y, avg_w, avg_b, cfg.lambda, sw);
        if (!std::isfinite(obj)) {
            throw InputError("NONFINITE_LOSS", "svm objective is not finite; check feature scaling");
        }
        if (obj <= best_obj) {
            best_obj = obj;
            best.weights = avg_w;
            best.bias = avg_b;
        }
        best.epoch_objective.push_back(best_obj);
    }
    return best;
}

double linear_svm_margin(const LinearSvmModel& m, std::span<const double> x) { return dot(x, m.weights) + m.bias; }

}  // namespace mechdet
