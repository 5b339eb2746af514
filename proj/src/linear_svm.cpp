#include "failure_lens/linear_svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "failure_lens/errors.hpp"
#include "failure_lens/util.hpp"

namespace flens {

namespace {

void require_both_classes(const Eigen::VectorXi& z) {
    bool has_pos = false, has_neg = false;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z[i] == 1) has_pos = true;
        else if (z[i] == -1) has_neg = true;
        else fail(Errc::invalid_argument, "labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) fail(Errc::single_class, "both correctness classes required");
}

}  // namespace

void SvmProblem::validate() const {
    if (X.rows() < 2) fail(Errc::not_enough_data, "need at least 2 examples");
    if (z.size() != X.rows() || weights.size() != X.rows())
        fail(Errc::alignment, "labels/weights do not match example count");
    if (!X.allFinite()) fail(Errc::non_finite, "problem matrix has non-finite entries");
    if (!weights.allFinite() || (weights.array() <= 0.0).any())
        fail(Errc::invalid_argument, "sample weights must be positive and finite");
    require_both_classes(z);
}

Eigen::VectorXd balanced_weights(const Eigen::VectorXi& z) {
    require_both_classes(z);
    const double n = static_cast<double>(z.size());
    const double n_pos = static_cast<double>((z.array() == 1).count());
    const double n_neg = n - n_pos;
    Eigen::VectorXd weights(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        weights[i] = z[i] == 1 ? n / (2.0 * n_pos) : n / (2.0 * n_neg);
    return weights;
}

SvmModel fit_svm(const SvmProblem& problem, double C, double tol, int max_epochs,
                 std::uint64_t seed, std::vector<double>* dual_trace) {
    problem.validate();
    if (!(C > 0.0)) fail(Errc::invalid_argument, "C must be positive");

    const Eigen::Index n = problem.n();
    const Eigen::Index d = problem.dim();

    // Augmented weight vector: w_aug = (w, b). Per-coordinate curvature of
    // the dual is ||x_i||^2 + 1 for the constant bias feature.
    Eigen::VectorXd w_aug = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd qd(n);
    Eigen::VectorXd upper(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        qd[i] = problem.X.row(i).squaredNorm() + 1.0;
        upper[i] = C * problem.weights[i];
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SvmModel model;
    int epoch = 0;
    for (; epoch < max_epochs; ++epoch) {
        double max_violation = 0.0;
        for (const Eigen::Index i : order) {
            const double zi = static_cast<double>(problem.z[i]);
            const double margin = problem.X.row(i).dot(w_aug.head(d)) + w_aug[d];
            const double g = zi * margin - 1.0;

            double pg = g;
            if (alpha[i] <= 0.0) {
                pg = std::min(g, 0.0);
            } else if (alpha[i] >= upper[i]) {
                pg = std::max(g, 0.0);
            }
            max_violation = std::max(max_violation, std::abs(pg));

            if (std::abs(pg) > 1e-12) {
                const double alpha_old = alpha[i];
                alpha[i] = std::clamp(alpha_old - g / qd[i], 0.0, upper[i]);
                const double delta = (alpha[i] - alpha_old) * zi;
                w_aug.head(d) += delta * problem.X.row(i).transpose();
                w_aug[d] += delta;
            }
        }
        if (dual_trace != nullptr)
            dual_trace->push_back(alpha.sum() - 0.5 * w_aug.squaredNorm());
        if (max_violation < tol) {
            ++epoch;
            break;
        }
    }

    model.w = w_aug.head(d);
    model.b = w_aug[d];
    model.C = C;
    model.epochs_run = epoch;
    model.dual_objective = alpha.sum() - 0.5 * w_aug.squaredNorm();
    return model;
}

double decision_value(const SvmModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.w.size())
        fail(Errc::dim_mismatch, "decision input has length " + std::to_string(x.size()) +
                                     ", model expects " + std::to_string(model.w.size()));
    return model.w.dot(x) + model.b;
}

double primal_objective(const SvmProblem& problem, const SvmModel& model, double C) {
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < problem.n(); ++i) {
        const double margin =
            static_cast<double>(problem.z[i]) * (problem.X.row(i).dot(model.w) + model.b);
        hinge += problem.weights[i] * std::max(0.0, 1.0 - margin);
    }
    return 0.5 * (model.w.squaredNorm() + model.b * model.b) + C * hinge;
}

double balanced_accuracy(const Eigen::VectorXi& z_true, const Eigen::VectorXi& z_pred) {
    if (z_true.size() != z_pred.size())
        fail(Errc::alignment, "label vectors have different lengths");
    require_both_classes(z_true);
    Eigen::Index pos_total = 0, pos_hit = 0, neg_total = 0, neg_hit = 0;
    for (Eigen::Index i = 0; i < z_true.size(); ++i) {
        if (z_true[i] == 1) {
            ++pos_total;
            if (z_pred[i] == 1) ++pos_hit;
        } else {
            ++neg_total;
            if (z_pred[i] == -1) ++neg_hit;
        }
    }
    const double recall_pos = static_cast<double>(pos_hit) / static_cast<double>(pos_total);
    const double recall_neg = static_cast<double>(neg_hit) / static_cast<double>(neg_total);
    return 0.5 * (recall_pos + recall_neg);
}

CvReport cv_select(const SvmProblem& problem, const SvmConfig& config, std::uint64_t seed) {
    problem.validate();
    if (config.c_grid.empty()) fail(Errc::invalid_argument, "empty C grid");
    if (config.folds < 2) fail(Errc::invalid_argument, "need at least 2 folds");

    const Eigen::Index n = problem.n();

    // Stratify by correctness, shuffle each stratum once, deal round-robin.
    std::vector<Eigen::Index> pos, neg;
    for (Eigen::Index i = 0; i < n; ++i) (problem.z[i] == 1 ? pos : neg).push_back(i);
    std::mt19937_64 rng(mix_seed(seed, 0x666f6c64));  // fold split stream
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);

    std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(config.folds));
    for (std::size_t i = 0; i < pos.size(); ++i) folds[i % folds.size()].push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i) folds[i % folds.size()].push_back(neg[i]);

    for (const auto& fold : folds) {
        Eigen::Index fold_pos = 0, fold_neg = 0;
        for (const Eigen::Index i : fold) (problem.z[i] == 1 ? fold_pos : fold_neg)++;
        if (fold_pos < config.min_per_class || fold_neg < config.min_per_class)
            fail(Errc::not_enough_data,
                 "a fold would hold fewer than " + std::to_string(config.min_per_class) +
                     " examples of one correctness class");
    }

    CvReport report;
    report.grid.reserve(config.c_grid.size());
    for (const double c_value : config.c_grid) {
        double accuracy_sum = 0.0;
        for (std::size_t held_out = 0; held_out < folds.size(); ++held_out) {
            std::vector<Eigen::Index> train_idx;
            for (std::size_t f = 0; f < folds.size(); ++f)
                if (f != held_out)
                    train_idx.insert(train_idx.end(), folds[f].begin(), folds[f].end());
            std::sort(train_idx.begin(), train_idx.end());

            SvmProblem sub;
            sub.X.resize(static_cast<Eigen::Index>(train_idx.size()), problem.dim());
            sub.z.resize(static_cast<Eigen::Index>(train_idx.size()));
            for (std::size_t r = 0; r < train_idx.size(); ++r) {
                sub.X.row(static_cast<Eigen::Index>(r)) = problem.X.row(train_idx[r]);
                sub.z[static_cast<Eigen::Index>(r)] = problem.z[train_idx[r]];
            }
            sub.weights = balanced_weights(sub.z);

            const SvmModel model =
                fit_svm(sub, c_value, config.tol, config.max_epochs, mix_seed(seed, held_out));

            const auto& eval = folds[held_out];
            Eigen::VectorXi z_true(static_cast<Eigen::Index>(eval.size()));
            Eigen::VectorXi z_pred(static_cast<Eigen::Index>(eval.size()));
            for (std::size_t r = 0; r < eval.size(); ++r) {
                const Eigen::Index i = eval[r];
                z_true[static_cast<Eigen::Index>(r)] = problem.z[i];
                const double value = problem.X.row(i).dot(model.w) + model.b;
                z_pred[static_cast<Eigen::Index>(r)] = value < 0.0 ? -1 : 1;
            }
            accuracy_sum += balanced_accuracy(z_true, z_pred);
        }
        report.grid.emplace_back(c_value, accuracy_sum / static_cast<double>(folds.size()));
    }

    report.chosen_C = report.grid.front().first;
    report.cv_score = report.grid.front().second;
    for (const auto& [c_value, score] : report.grid) {
        if (score > report.cv_score ||
            (score == report.cv_score && c_value < report.chosen_C)) {
            report.cv_score = score;
            report.chosen_C = c_value;
        }
    }
    return report;
}

}  // namespace flens
