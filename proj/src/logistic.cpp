#include <algorithm>
#include <cmath>

#include "mechdet/classify.hpp"
#include "mechdet/error.hpp"

namespace mechdet {

namespace {

// log(1 + exp(t)) without overflow
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double weight_of(std::span<const double> sw, std::size_t i) { return sw.empty() ? 1.0 : sw[i]; }

void check_inputs(const Matrix& X, std::span<const int> y, std::span<const double> w) {
    if (X.rows() != y.size() || X.cols() != w.size() || X.rows() == 0) {
        throw InputError("SHAPE_MISMATCH", "logistic inputs disagree in shape");
    }
}

}  // namespace

double logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double l2,
                     std::span<const double> sw) {
    check_inputs(X, y, w);
    double loss = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const double s = y[i] == 1 ? 1.0 : -1.0;
        loss += weight_of(sw, i) * softplus(-s * (dot(X.row(i), w) + b));
    }
    return loss / static_cast<double>(X.rows()) + 0.5 * l2 * dot(w, w);
}

void logistic_gradient(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double l2,
                       std::span<double> grad_w, double& grad_b, std::span<const double> sw) {
    check_inputs(X, y, w);
    const double n = static_cast<double>(X.rows());
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    grad_b = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto x = X.row(i);
        // d/dz softplus(-s z) = -s * sigmoid(-s z) = sigmoid(z) - [y = 1]
        const double g = weight_of(sw, i) * (sigmoid(dot(x, w) + b) - (y[i] == 1 ? 1.0 : 0.0)) / n;
        for (std::size_t k = 0; k < x.size(); ++k) grad_w[k] += g * x[k];
        grad_b += g;
    }
    for (std::size_t k = 0; k < w.size(); ++k) grad_w[k] += l2 * w[k];
}

LogisticModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticConfig& cfg) {
    const auto C = X.cols();
    LogisticModel m;
    m.weights.assign(C, 0.0);
    if (X.rows() != y.size() || X.rows() == 0) {
        throw InputError("SHAPE_MISMATCH", "logistic training data and labels disagree");
    }
    const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (positives == 0 || positives == y.size()) {
        if (!cfg.allow_degenerate) {
            throw InputError("SINGLE_CLASS", "logistic regression needs both classes");
        }
        m.bias = positives == 0 ? -30.0 : 30.0;
        m.converged = true;
        return m;
    }
    const std::vector<double> sw = cfg.class_weighting ? balanced_sample_weights(y) : std::vector<double>{};

    std::vector<double> g(C), w_new(C), w_prev(C), g_prev(C);
    double gb = 0.0, b_prev = 0.0, gb_prev = 0.0;
    double f = logistic_loss(X, y, m.weights, m.bias, cfg.l2, sw);
    logistic_gradient(X, y, m.weights, m.bias, cfg.l2, g, gb, sw);
    double step = 1.0;

    auto inf_norm = [](std::span<const double> v, double extra) {
        double mx = std::abs(extra);
        for (double x : v) mx = std::max(mx, std::abs(x));
        return mx;
    };

    for (int it = 0; it < cfg.max_iter; ++it) {
        if (!std::isfinite(f)) {
            throw InputError("NONFINITE_LOSS", "logistic loss is not finite; check feature scaling");
        }
        if (inf_norm(g, gb) < cfg.tol) {
            m.converged = true;
            break;
        }
        // Barzilai-Borwein trial step, then Armijo backtracking
        if (it > 0) {
            double sy = 0.0, yy = 0.0;
            for (std::size_t k = 0; k < C; ++k) {
                const double s = m.weights[k] - w_prev[k];
                const double d = g[k] - g_prev[k];
                sy += s * d;
                yy += d * d;
            }
            sy += (m.bias - b_prev) * (gb - gb_prev);
            yy += (gb - gb_prev) * (gb - gb_prev);
            if (sy > 0 && yy > 0) step = sy / yy;
        }
        const double gg = [&] {
            double s = gb * gb;
            for (double v : g) s += v * v;
            return s;
        }();
        double f_new = 0.0;
        double b_new = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t k = 0; k < C; ++k) w_new[k] = m.weights[k] - step * g[k];
            b_new = m.bias - step * gb;
            f_new = logistic_loss(X, y, w_new, b_new, cfg.l2, sw);
            if (std::isfinite(f_new) && f_new <= f - 1e-4 * step * gg) break;
            step *= 0.5;
        }
        w_prev = m.weights;
        g_prev = g;
        b_prev = m.bias;
        gb_prev = gb;
        m.weights.swap(w_new);
        m.bias = b_new;
        f = f_new;
        logistic_gradient(X, y, m.weights, m.bias, cfg.l2, g, gb, sw);
        m.iterations = it + 1;
    }
    if (!m.converged && inf_norm(g, gb) < cfg.tol) m.converged = true;
    return m;
}

double logistic_probability(const LogisticModel& m, std::span<const double> x) {
    return sigmoid(dot(x, m.weights) + m.bias);
}

}  // namespace mechdet
