#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "failure_lens/errors.hpp"
#include "failure_lens/geometry.hpp"
#include "test_support.hpp"

using namespace flens;

TEST_CASE("fit_whitening on a 2x2 example") {
    EmbeddingTable t;
    t.data.resize(2, 2);
    t.data << 1, 2, 3, 4;
    const WhiteningStats stats = fit_whitening(t);
    CHECK(stats.mean(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(stats.mean(1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(stats.std(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats.std(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_whitening clamps zero variance to epsilon") {
    EmbeddingTable t;
    t.data.resize(2, 1);
    t.data << 5, 5;
    const WhiteningStats stats = fit_whitening(t);
    CHECK(stats.mean(0) == 5.0);
    CHECK(stats.std(0) == 1e-8);
}

TEST_CASE("fit_whitening requires two rows") {
    EmbeddingTable t;
    t.data.resize(1, 2);
    t.data << 1, 2;
    CHECK_THROWS_AS(fit_whitening(t), Error);
}

TEST_CASE("refitting whitening on whitened data gives mean 0, std 1") {
    std::mt19937_64 rng(5);
    const EmbeddingTable raw = testsup::random_table(rng, 64, 6);
    const WhiteningStats stats = fit_whitening(raw);
    EmbeddingTable whitened;
    whitened.data.resize(raw.rows(), raw.dim());
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
        whitened.data.row(i) = whiten(raw.row(i), stats).cast<float>();
    const WhiteningStats refit = fit_whitening(whitened);
    for (Eigen::Index j = 0; j < refit.mean.size(); ++j) {
        CHECK(std::abs(refit.mean(j)) < 1e-6);  // float storage limits precision
        CHECK(std::abs(refit.std(j) - 1.0) < 1e-6);
    }
    // In double precision the identity holds much tighter.
    Eigen::MatrixXd dbl(raw.rows(), raw.dim());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) dbl.row(i) = whiten(raw.row(i), stats);
    const Eigen::VectorXd mean = dbl.colwise().mean();
    const Eigen::MatrixXd centered = dbl.rowwise() - mean.transpose();
    const Eigen::VectorXd var =
        centered.array().square().colwise().sum().transpose() / static_cast<double>(dbl.rows());
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        CHECK(std::abs(mean(j)) < 1e-9);
        CHECK(std::abs(std::sqrt(var(j)) - 1.0) < 1e-9);
    }
}

TEST_CASE("fit_whitening is exact on exactly standardized data") {
    EmbeddingTable t;
    t.data.resize(2, 2);
    t.data << 1, -1, -1, 1;
    const WhiteningStats stats = fit_whitening(t);
    for (Eigen::Index j = 0; j < 2; ++j) {
        CHECK(std::abs(stats.mean(j)) <= 1e-12);
        CHECK(std::abs(stats.std(j) - 1.0) <= 1e-12);
    }
}

TEST_CASE("apply_profile norm_only") {
    PreprocessProfile profile{ProfileKind::norm_only, std::nullopt};
    const Eigen::VectorXd out = apply_profile(Eigen::Vector2d(3, 4), profile);
    CHECK(out(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(out(1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("apply_profile whiten_norm") {
    WhiteningStats stats;
    stats.mean = Eigen::Vector2d(2, 3);
    stats.std = Eigen::Vector2d(1, 1);
    PreprocessProfile profile{ProfileKind::whiten_norm, stats};
    const Eigen::VectorXd out = apply_profile(Eigen::Vector2d(3, 4), profile);
    CHECK(out(0) == doctest::Approx(0.70710678118654746).epsilon(1e-12));
    CHECK(out(1) == doctest::Approx(0.70710678118654746).epsilon(1e-12));
}

TEST_CASE("apply_profile rejects the zero vector") {
    PreprocessProfile profile{ProfileKind::norm_only, std::nullopt};
    CHECK_THROWS_AS(apply_profile(Eigen::Vector2d(0, 0), profile), Error);

    WhiteningStats stats;
    stats.mean = Eigen::Vector2d(1, 2);
    stats.std = Eigen::Vector2d(1, 1);
    PreprocessProfile wn{ProfileKind::whiten_norm, stats};
    CHECK_THROWS_AS(apply_profile(Eigen::Vector2d(1, 2), wn), Error);  // x == mean exactly
}

TEST_CASE("whiten_norm profile without stats is invalid") {
    PreprocessProfile profile{ProfileKind::whiten_norm, std::nullopt};
    CHECK_THROWS_AS(profile.validate(), Error);
}

TEST_CASE("apply_profile output is always unit norm") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 3.0);
    const EmbeddingTable table = testsup::random_table(rng, 32, 8);
    const WhiteningStats stats = fit_whitening(table);
    const PreprocessProfile profiles[2] = {{ProfileKind::norm_only, std::nullopt},
                                           {ProfileKind::whiten_norm, stats}};
    for (const auto& profile : profiles) {
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd x(8);
            for (int j = 0; j < 8; ++j) x[j] = gauss(rng);
            CHECK(std::abs(apply_profile(x, profile).norm() - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("cosine basics") {
    CHECK(cosine(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0)) == 1.0);
    CHECK(cosine(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 0.0);
    CHECK(cosine(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)) == -1.0);
    CHECK_THROWS_AS(cosine(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)), Error);
}

TEST_CASE("cosine is symmetric and scale invariant") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd a(5), b(5);
        for (int j = 0; j < 5; ++j) {
            a[j] = gauss(rng);
            b[j] = gauss(rng);
        }
        if (a.norm() < 1e-9 || b.norm() < 1e-9) continue;
        const double base = cosine(a, b);
        CHECK(std::abs(cosine(b, a) - base) <= 1e-12);
        CHECK(std::abs(cosine(scale(rng) * a, scale(rng) * b) - base) <= 1e-12);
        CHECK(base >= -1.0);
        CHECK(base <= 1.0);
    }
}

TEST_CASE("slerp endpoints are exact") {
    std::mt19937_64 rng(2);
    const Eigen::VectorXd r = testsup::random_unit_vec(rng, 6);
    const Eigen::VectorXd w = testsup::random_unit_vec(rng, 6);
    CHECK(slerp(r, w, 0.0) == r);
    CHECK(slerp(r, w, 1.0) == w);
}

TEST_CASE("slerp orthogonal midpoint") {
    const Eigen::VectorXd r = Eigen::Vector2d(1, 0);
    const Eigen::VectorXd w = Eigen::Vector2d(0, 1);
    const Eigen::VectorXd mid = slerp(r, w, 0.5);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(mid(0) - inv_sqrt2) <= 1e-12);
    CHECK(std::abs(mid(1) - inv_sqrt2) <= 1e-12);
}

TEST_CASE("slerp stays unit norm and inside span{r, w}") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd r = testsup::random_unit_vec(rng, 5);
        const Eigen::VectorXd w = testsup::random_unit_vec(rng, 5);
        for (int k = 0; k < 20; ++k) {
            const double alpha = unif(rng);
            const Eigen::VectorXd out = slerp(r, w, alpha);
            CHECK(std::abs(out.norm() - 1.0) <= 1e-9);
            // Residual after projecting onto span{r, w}.
            Eigen::MatrixXd basis(5, 2);
            basis.col(0) = r;
            basis.col(1) = w;
            const Eigen::VectorXd coeffs = basis.colPivHouseholderQr().solve(out);
            CHECK((out - basis * coeffs).norm() <= 1e-9);
        }
    }
}

TEST_CASE("slerp input validation") {
    const Eigen::VectorXd r = Eigen::Vector2d(1, 0);
    const Eigen::VectorXd w = Eigen::Vector2d(0, 1);
    CHECK_THROWS_AS(slerp(2.0 * r, w, 0.5), Error);
    CHECK_THROWS_AS(slerp(r, w, 1.5), Error);
    CHECK_THROWS_AS(slerp(r, (-r).eval(), 0.5), Error);  // antipodal
    CHECK(slerp(r, (-r).eval(), 0.0) == r);
    CHECK(slerp(r, (-r).eval(), 1.0) == -r);
}

TEST_CASE("slerp nearly-parallel fallback") {
    Eigen::VectorXd r = Eigen::Vector3d(1, 0, 0);
    Eigen::VectorXd w = Eigen::Vector3d(1, 1e-9, 0).normalized();
    const Eigen::VectorXd out = slerp(r, w, 0.5);
    CHECK(std::abs(out.norm() - 1.0) <= 1e-9);
    CHECK(out(0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("whitening stats json round trip") {
    testsup::TempDir tmp("wh");
    WhiteningStats stats;
    stats.mean = Eigen::Vector3d(0.5, -1.25, 3.0);
    stats.std = Eigen::Vector3d(1.0, 2.0, 0.25);
    stats.epsilon = 1e-8;
    whitening_to_json_file(stats, tmp.path() / "w.json");
    const WhiteningStats back = whitening_from_json_file(tmp.path() / "w.json");
    CHECK(back.mean == stats.mean);
    CHECK(back.std == stats.std);
    CHECK(back.epsilon == stats.epsilon);

    PreprocessProfile profile{ProfileKind::whiten_norm, stats};
    profile_to_json_file(profile, tmp.path() / "p.json");
    const PreprocessProfile pback = profile_from_json_file(tmp.path() / "p.json");
    CHECK(pback.kind == ProfileKind::whiten_norm);
    REQUIRE(pback.stats.has_value());
    CHECK(pback.stats->mean == stats.mean);
}
