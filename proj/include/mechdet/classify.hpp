#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "mechdet/forest.hpp"
#include "mechdet/matrix.hpp"

namespace mechdet {

// Labels throughout are 0 (truthful) / 1 (hallucinated); the SVM trainers map
// them to -1 / +1 internally.

struct SplitIndices {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> val;    // ascending
};

// Per-class shuffles; the train count per class is floor(fraction * n_c),
// with the remainder of round(fraction * n) handed out by largest fractional
// part (ties to class 0).
SplitIndices stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

// n / (2 n_c) per row, so both classes carry equal total weight.
std::vector<double> balanced_sample_weights(std::span<const int> y);

// ---- logistic regression ---------------------------------------------------

struct LogisticConfig {
    double l2 = 1e-3;
    double tol = 1e-4;  // stop when ||grad||_inf < tol
    int max_iter = 20000;
    bool allow_degenerate = false;  // single-class data -> constant model instead of an error
    bool class_weighting = false;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    int iterations = 0;
    bool converged = false;

    friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

// Mean weighted log-loss + (l2 / 2) ||w||^2; the bias is not regularized.
double logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double l2,
                     std::span<const double> sample_weight = {});
void logistic_gradient(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double l2,
                       std::span<double> grad_w, double& grad_b, std::span<const double> sample_weight = {});

LogisticModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticConfig& cfg = {});
double logistic_probability(const LogisticModel& m, std::span<const double> x);

// ---- linear SVM (Pegasos) ----------------------------------------------------

struct LinearSvmConfig {
    double lambda = 1e-3;
    int epochs = 60;
    std::uint64_t seed = 0;
    bool class_weighting = false;
};

struct LinearSvmModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> epoch_objective;  // objective of the model after each epoch

    friend bool operator==(const LinearSvmModel&, const LinearSvmModel&) = default;
};

// (lambda / 2) ||w||^2 + mean weighted hinge loss.
double svm_objective(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double lambda,
                     std::span<const double> sample_weight = {});
void svm_subgradient(const Matrix& X, std::span<const int> y, std::span<const double> w, double b, double lambda,
                     std::span<double> grad_w, double& grad_b, std::span<const double> sample_weight = {});

// Pegasos steps eta_t = 1 / (lambda t) over a seeded shuffle each epoch, with
// projection onto the ||w|| <= 1/sqrt(lambda) ball. The bias step is scaled by
// the mean squared row norm so that scaling X by s together with lambda by
// s^2 rescales w by 1/s and leaves predictions unchanged. Each epoch's
// averaged iterate is a candidate; the returned model is the one with the
// lowest objective so far, which makes `epoch_objective` non-increasing.
LinearSvmModel train_linear_svm(const Matrix& X, std::span<const int> y, const LinearSvmConfig& cfg = {});
double linear_svm_margin(const LinearSvmModel& m, std::span<const double> x);

// ---- RBF-kernel SVM (SMO) ----------------------------------------------------

struct RbfSvmConfig {
    double C = 1.0;
    double gamma = 0.0;   // <= 0 selects 1 / (n_features * Var(X))
    double tol = 1e-3;    // KKT violation bound
    std::size_t max_iter = 0;  // 0 selects max(10^7, 100 n)
    std::size_t cache_mb = 256;
    bool class_weighting = false;
};

struct RbfSvmModel {
    Matrix support_vectors;
    std::vector<double> dual_coef;  // alpha_i * y_i for each support vector
    double gamma = 1.0;
    double bias = 0.0;
    bool converged = false;

    friend bool operator==(const RbfSvmModel&, const RbfSvmModel&) = default;
};

struct SmoReport {
    std::vector<double> alpha;  // one per training row
    std::vector<double> upper;  // per-row box bound (C, or class-weighted C)
    std::size_t iterations = 0;
    double max_violation = 0.0;
    bool converged = false;
};

double rbf_gamma_scale(const Matrix& X);
RbfSvmModel train_rbf_svm(const Matrix& X, std::span<const int> y, const RbfSvmConfig& cfg = {},
                          SmoReport* report = nullptr);
// f(x) = sum_i alpha_i y_i K(x_i, x) + b
double rbf_svm_decision(const RbfSvmModel& m, std::span<const double> x);
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// ---- common surface ------------------------------------------------------------

enum class ClassifierKind { logistic, linear_svm, rbf_svm, random_forest };

std::string_view to_string(ClassifierKind k);
// Accepts "logistic", "linear_svm", "rbf_svm", "forest" / "random_forest".
ClassifierKind parse_classifier_kind(std::string_view s);

struct ClassifierConfig {
    ClassifierKind kind = ClassifierKind::rbf_svm;
    std::uint64_t seed = 0;
    LogisticConfig logistic;
    LinearSvmConfig linear_svm;
    RbfSvmConfig rbf_svm;
    ForestConfig forest;
};

struct ClassifierModel {
    std::size_t n_features = 0;
    std::variant<LogisticModel, LinearSvmModel, RbfSvmModel, ForestModel> params;

    ClassifierKind kind() const;
    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

ClassifierModel train_classifier(const Matrix& X, std::span<const int> y, const ClassifierConfig& cfg);

struct Predictions {
    std::vector<int> labels;
    // logistic: probability; SVMs: margin; forest: fraction of trees voting 1
    std::vector<double> scores;
};

// Threshold 0.5 for probabilities / vote fractions, 0 for margins; a score
// exactly on the threshold is labeled 0.
Predictions predict(const ClassifierModel& model, const Matrix& X);

struct EvalResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

EvalResult evaluate(std::span<const int> pred, std::span<const int> gold);

}  // namespace mechdet
