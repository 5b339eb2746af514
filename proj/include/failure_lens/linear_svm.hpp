#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace flens {

/// A binary problem over preprocessed (unit-row) embeddings. Labels are
/// +1 for examples the base model got right, -1 for its mistakes.
struct SvmProblem {
    Eigen::MatrixXd X;        // one example per row
    Eigen::VectorXi z;        // +-1 correctness labels
    Eigen::VectorXd weights;  // per-example weights, > 0

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }
    void validate() const;
};

struct SvmModel {
    Eigen::VectorXd w;
    double b = 0.0;
    double C = 1.0;
    double dual_objective = 0.0;  // sum(alpha) - 0.5*||(w,b)||^2, maximized
    int epochs_run = 0;
};

struct SvmConfig {
    std::vector<double> c_grid = {0.001, 0.01, 0.1, 1.0, 10.0, 100.0};
    int folds = 2;
    double tol = 1e-4;
    int max_epochs = 1000;
    int min_per_class = 2;  // per fold, per correctness class
};

struct CvReport {
    std::vector<std::pair<double, double>> grid;  // (C, mean balanced accuracy)
    double chosen_C = 0.0;
    double cv_score = 0.0;
};

/// Weight n/(2*n_c) for an example of correctness class c, so the total
/// weight of the correct and incorrect classes is n/2 each.
Eigen::VectorXd balanced_weights(const Eigen::VectorXi& z);

/// Minimizes 0.5*||w||^2 + C * sum_i s_i * max(0, 1 - z_i*(w.x_i + b)) by
/// dual coordinate descent with box constraints 0 <= alpha_i <= C*s_i.
/// The bias is an augmented constant feature of value 1 (so b is lightly
/// regularized). Coordinates are visited cyclically after one seeded
/// shuffle; the result is deterministic given the seed. Stops when the
/// largest projected-gradient violation in an epoch drops below tol.
/// When dual_trace is given it receives the dual objective after every
/// epoch (nondecreasing by construction of the exact coordinate updates).
SvmModel fit_svm(const SvmProblem& problem, double C, double tol, int max_epochs,
                 std::uint64_t seed, std::vector<double>* dual_trace = nullptr);

/// w.x + b.
double decision_value(const SvmModel& model, const Eigen::VectorXd& x);

/// Primal objective of the augmented formulation:
/// 0.5*(||w||^2 + b^2) + C * sum_i s_i * hinge_i.
double primal_objective(const SvmProblem& problem, const SvmModel& model, double C);

/// Mean of the per-class recalls. z_true must contain both classes.
double balanced_accuracy(const Eigen::VectorXi& z_true, const Eigen::VectorXi& z_pred);

/// Stratified k-fold selection of C by held-out balanced accuracy. Class
/// weights are recomputed on each training fold. Ties break toward the
/// smaller (more regularizing) C.
CvReport cv_select(const SvmProblem& problem, const SvmConfig& config, std::uint64_t seed);

}  // namespace flens
