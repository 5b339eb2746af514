#include "failure_lens/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "failure_lens/errors.hpp"

namespace flens {

namespace {

constexpr double kUnitTol = 1e-9;
constexpr double kMinNorm = 1e-12;
constexpr double kParallelSinTol = 1e-7;

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
    const auto values = arr.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

void WhiteningStats::validate() const {
    if (mean.size() != std.size())
        fail(Errc::dim_mismatch, "whitening mean/std lengths disagree");
    if (mean.size() == 0) fail(Errc::invalid_argument, "whitening stats are empty");
    if (!(epsilon > 0.0)) fail(Errc::invalid_argument, "whitening epsilon must be positive");
    if ((std.array() < epsilon).any())
        fail(Errc::invalid_argument, "whitening std entries below epsilon");
    if (!mean.allFinite() || !std.allFinite())
        fail(Errc::non_finite, "whitening stats contain non-finite values");
}

void PreprocessProfile::validate() const {
    if (kind == ProfileKind::whiten_norm) {
        if (!stats) fail(Errc::invalid_argument, "whiten_norm profile requires whitening stats");
        stats->validate();
    }
}

WhiteningStats fit_whitening(const EmbeddingTable& table, double epsilon) {
    table.validate();
    if (table.rows() < 2)
        fail(Errc::not_enough_data, "whitening needs at least 2 rows, have " +
                                        std::to_string(table.rows()));
    const Eigen::MatrixXd wide = table.data.cast<double>();
    WhiteningStats stats;
    stats.epsilon = epsilon;
    stats.mean = wide.colwise().mean();
    const Eigen::MatrixXd centered = wide.rowwise() - stats.mean.transpose();
    stats.std = (centered.array().square().colwise().sum() / static_cast<double>(wide.rows()))
                    .sqrt()
                    .matrix()
                    .transpose();
    stats.std = stats.std.cwiseMax(epsilon);
    stats.validate();
    return stats;
}

Eigen::VectorXd whiten(const Eigen::VectorXd& x, const WhiteningStats& stats) {
    if (x.size() != stats.mean.size())
        fail(Errc::dim_mismatch, "vector length " + std::to_string(x.size()) +
                                     " does not match whitening dim " +
                                     std::to_string(stats.mean.size()));
    return (x - stats.mean).cwiseQuotient(stats.std);
}

Eigen::VectorXd apply_profile(const Eigen::VectorXd& x, const PreprocessProfile& profile) {
    profile.validate();
    if (!x.allFinite()) fail(Errc::non_finite, "input vector has non-finite entries");
    Eigen::VectorXd v = profile.kind == ProfileKind::whiten_norm ? whiten(x, *profile.stats) : x;
    const double norm = v.norm();
    if (norm < kMinNorm)
        fail(Errc::zero_norm, "vector norm " + std::to_string(norm) + " too small to normalize");
    return v / norm;
}

Eigen::MatrixXd apply_profile_rows(const EmbeddingTable& table, const PreprocessProfile& profile) {
    profile.validate();
    Eigen::MatrixXd out(table.rows(), table.dim());
    for (Eigen::Index i = 0; i < table.rows(); ++i)
        out.row(i) = apply_profile(table.row(i), profile).transpose();
    return out;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) fail(Errc::dim_mismatch, "cosine of vectors with different lengths");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) fail(Errc::zero_norm, "cosine of zero-norm vector");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Eigen::VectorXd slerp(const Eigen::VectorXd& r, const Eigen::VectorXd& w, double alpha) {
    if (r.size() != w.size()) fail(Errc::dim_mismatch, "slerp endpoints have different lengths");
    if (std::abs(r.norm() - 1.0) > kUnitTol || std::abs(w.norm() - 1.0) > kUnitTol)
        fail(Errc::invalid_argument, "slerp endpoints must be unit vectors");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        fail(Errc::invalid_argument, "slerp alpha must lie in [0,1]");
    if (alpha == 0.0) return r;
    if (alpha == 1.0) return w;

    const double dot = std::clamp(r.dot(w), -1.0, 1.0);
    const double omega = std::acos(dot);
    const double sin_omega = std::sin(omega);
    if (sin_omega < kParallelSinTol) {
        if (dot < 0.0)
            fail(Errc::antipodal, "slerp between antipodal vectors is undefined");
        Eigen::VectorXd v = (1.0 - alpha) * r + alpha * w;
        const double norm = v.norm();
        if (norm < kMinNorm) fail(Errc::zero_norm, "degenerate slerp fallback");
        return v / norm;
    }
    return (std::sin((1.0 - alpha) * omega) / sin_omega) * r +
           (std::sin(alpha * omega) / sin_omega) * w;
}

WhiteningStats whitening_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, path.string() + ": " + e.what());
    }
    WhiteningStats stats;
    stats.mean = vector_from_json(doc.at("mean"));
    stats.std = vector_from_json(doc.at("std"));
    stats.epsilon = doc.at("epsilon").get<double>();
    stats.validate();
    return stats;
}

void whitening_to_json_file(const WhiteningStats& stats, const std::filesystem::path& path) {
    stats.validate();
    nlohmann::json doc;
    doc["mean"] = vector_to_json(stats.mean);
    doc["std"] = vector_to_json(stats.std);
    doc["epsilon"] = stats.epsilon;
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for write: " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

PreprocessProfile profile_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, path.string() + ": " + e.what());
    }
    PreprocessProfile profile;
    profile.kind = profile_kind_from_name(doc.at("kind").get<std::string>());
    if (doc.contains("stats") && !doc["stats"].is_null()) {
        WhiteningStats stats;
        stats.mean = vector_from_json(doc["stats"].at("mean"));
        stats.std = vector_from_json(doc["stats"].at("std"));
        stats.epsilon = doc["stats"].at("epsilon").get<double>();
        profile.stats = std::move(stats);
    }
    profile.validate();
    return profile;
}

void profile_to_json_file(const PreprocessProfile& profile, const std::filesystem::path& path) {
    profile.validate();
    nlohmann::json doc;
    doc["kind"] = profile_kind_name(profile.kind);
    if (profile.stats) {
        nlohmann::json stats;
        stats["mean"] = vector_to_json(profile.stats->mean);
        stats["std"] = vector_to_json(profile.stats->std);
        stats["epsilon"] = profile.stats->epsilon;
        doc["stats"] = std::move(stats);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for write: " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

}  // namespace flens
