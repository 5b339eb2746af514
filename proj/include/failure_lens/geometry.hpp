#pragma once

#include <filesystem>
#include <optional>

#include <Eigen/Core>

#include "failure_lens/core_data.hpp"

namespace flens {

/// Per-feature mean/std of a reference embedding split. Stds are clamped
/// below by epsilon so constant features stay usable.
struct WhiteningStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    double epsilon = 1e-8;

    void validate() const;
};

struct PreprocessProfile {
    ProfileKind kind = ProfileKind::norm_only;
    std::optional<WhiteningStats> stats;

    void validate() const;
};

/// Column means and population (divide-by-n) standard deviations.
WhiteningStats fit_whitening(const EmbeddingTable& table, double epsilon = 1e-8);

/// (x - mean) / std, element-wise. No normalization.
Eigen::VectorXd whiten(const Eigen::VectorXd& x, const WhiteningStats& stats);

/// whiten_norm: standardize then l2-normalize; norm_only: x / ||x||.
/// Errors if the pre-normalization norm falls below 1e-12.
Eigen::VectorXd apply_profile(const Eigen::VectorXd& x, const PreprocessProfile& profile);

/// apply_profile over every row; rows of the result are unit vectors.
Eigen::MatrixXd apply_profile_rows(const EmbeddingTable& table, const PreprocessProfile& profile);

/// a.b / (||a|| ||b||), clamped to [-1, 1]. Zero-norm inputs are an error.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Constant-speed interpolation along the great circle from r to w.
/// Inputs must be unit vectors (within 1e-9); alpha in [0, 1]. Returns r at
/// alpha=0 and w at alpha=1 exactly. Nearly-parallel inputs fall back to
/// normalized linear interpolation; antipodal inputs with alpha strictly
/// inside (0, 1) are an error.
Eigen::VectorXd slerp(const Eigen::VectorXd& r, const Eigen::VectorXd& w, double alpha);

WhiteningStats whitening_from_json_file(const std::filesystem::path& path);
void whitening_to_json_file(const WhiteningStats& stats, const std::filesystem::path& path);

PreprocessProfile profile_from_json_file(const std::filesystem::path& path);
void profile_to_json_file(const PreprocessProfile& profile, const std::filesystem::path& path);

}  // namespace flens
