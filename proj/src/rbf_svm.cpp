#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "mechdet/classify.hpp"
#include "mechdet/error.hpp"

namespace mechdet {

namespace {

constexpr double kTau = 1e-12;

// LRU cache of kernel rows; a row is computed on first touch and evicted once
// the byte budget is exhausted.
class KernelCache {
public:
    KernelCache(const Matrix& X, double gamma, std::size_t budget_bytes)
        : X_(X), gamma_(gamma), diag_(X.rows(), 1.0) {
        const std::size_t row_bytes = X.rows() * sizeof(double) + 64;
        capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(row_bytes, 1));
    }

    std::span<const double> row(std::size_t i) {
        auto it = index_.find(i);
        if (it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second;
        }
        if (index_.size() >= capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
        std::vector<double> values(X_.rows());
        const auto xi = X_.row(i);
        for (std::size_t t = 0; t < X_.rows(); ++t) values[t] = rbf_kernel(xi, X_.row(t), gamma_);
        lru_.emplace_front(i, std::move(values));
        index_[i] = lru_.begin();
        return lru_.front().second;
    }

    double diag(std::size_t i) const { return diag_[i]; }

private:
    const Matrix& X_;
    double gamma_;
    std::vector<double> diag_;  // K(x, x) = 1 for the RBF kernel
    std::size_t capacity_;
    std::list<std::pair<std::size_t, std::vector<double>>> lru_;
    std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

double rbf_gamma_scale(const Matrix& X) {
    const std::size_t n = X.rows() * X.cols();
    if (n == 0) return 1.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += X.data()[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = X.data()[k] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    if (!(var > 0.0)) return 1.0;
    return 1.0 / (static_cast<double>(X.cols()) * var);
}

RbfSvmModel train_rbf_svm(const Matrix& X, std::span<const int> labels, const RbfSvmConfig& cfg, SmoReport* report) {
    const std::size_t n = X.rows();
    if (n != labels.size() || n == 0) {
        throw InputError("SHAPE_MISMATCH", "svm training data and labels disagree");
    }
    if (!(cfg.C > 0.0) || !(cfg.tol > 0.0)) {
        throw InputError("BAD_CONFIG", "rbf svm needs C > 0 and tol > 0");
    }
    bool has_pos = false, has_neg = false;
    for (int v : labels) (v == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
        throw InputError("SINGLE_CLASS", "rbf svm needs both classes in the training labels");
    }

    const double gamma = cfg.gamma > 0.0 ? cfg.gamma : rbf_gamma_scale(X);
    std::vector<double> y(n), upper(n, cfg.C);
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;
    if (cfg.class_weighting) {
        const auto w = balanced_sample_weights(labels);
        for (std::size_t i = 0; i < n; ++i) upper[i] = cfg.C * w[i];
    }
    const std::size_t max_iter = cfg.max_iter > 0 ? cfg.max_iter : std::max<std::size_t>(10'000'000, 100 * n);

    KernelCache cache(X, gamma, cfg.cache_mb * 1024 * 1024);
    std::vector<double> alpha(n, 0.0), G(n, -1.0);
    auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < upper[t] : alpha[t] > 0.0; };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < upper[t]; };

    std::size_t iter = 0;
    double violation = std::numeric_limits<double>::infinity();
    bool converged = false;
    while (true) {
        // second-order working set selection
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (in_up(t) && -y[t] * G[t] > gmax) {
                gmax = -y[t] * G[t];
                i = t;
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::size_t j = n;
        double best = std::numeric_limits<double>::infinity();
        std::span<const double> Ki;
        if (i < n) Ki = cache.row(i);
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            gmax2 = std::max(gmax2, y[t] * G[t]);
            if (i == n) continue;
            const double b = gmax + y[t] * G[t];
            if (b > 0.0) {
                double a = cache.diag(i) + cache.diag(t) - 2.0 * Ki[t];
                if (a <= 0.0) a = kTau;
                const double score = -(b * b) / a;
                if (score < best) {
                    best = score;
                    j = t;
                }
            }
        }
        violation = gmax + gmax2;
        if (!(violation >= cfg.tol) || j == n) {
            converged = true;
            break;
        }
        if (iter >= max_iter) break;
        ++iter;

        const auto Kj = cache.row(j);
        Ki = cache.row(i);  // the row fetch above may have evicted i
        const double Ci = upper[i], Cj = upper[j];
        const double old_i = alpha[i], old_j = alpha[j];
        double ai = old_i, aj = old_j;
        if (y[i] != y[j]) {
            double quad = cache.diag(i) + cache.diag(j) - 2.0 * Ki[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) { aj = 0.0; ai = diff; }
            } else {
                if (ai < 0.0) { ai = 0.0; aj = -diff; }
            }
            if (diff > Ci - Cj) {
                if (ai > Ci) { ai = Ci; aj = Ci - diff; }
            } else {
                if (aj > Cj) { aj = Cj; ai = Cj + diff; }
            }
        } else {
            double quad = cache.diag(i) + cache.diag(j) - 2.0 * Ki[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > Ci) {
                if (ai > Ci) { ai = Ci; aj = sum - Ci; }
            } else {
                if (aj < 0.0) { aj = 0.0; ai = sum; }
            }
            if (sum > Cj) {
                if (aj > Cj) { aj = Cj; ai = sum - Cj; }
            } else {
                if (ai < 0.0) { ai = 0.0; aj = sum; }
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        const double di = ai - old_i, dj = aj - old_j;
        // Q_ti = y_t y_i K_ti
        for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (y[i] * Ki[t] * di + y[j] * Kj[t] * dj);
    }

    // bias from free vectors, or the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (alpha[t] >= upper[t]) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            free_sum += yg;
            ++n_free;
        }
    }
    const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : 0.5 * (ub + lb);

    RbfSvmModel m;
    m.gamma = gamma;
    m.bias = -rho;
    m.converged = converged;
    std::vector<std::size_t> sv;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) sv.push_back(t);
    }
    m.support_vectors = X.select_rows(sv);
    for (std::size_t t : sv) m.dual_coef.push_back(alpha[t] * y[t]);

    if (report) {
        report->alpha = alpha;
        report->upper = upper;
        report->iterations = iter;
        report->max_violation = violation;
        report->converged = converged;
    }
    return m;
}

double rbf_svm_decision(const RbfSvmModel& m, std::span<const double> x) {
    double f = 0.0;
    for (std::size_t s = 0; s < m.dual_coef.size(); ++s) {
        f += m.dual_coef[s] * rbf_kernel(m.support_vectors.row(s), x, m.gamma);
    }
    return f + m.bias;
}

}  // namespace mechdet
