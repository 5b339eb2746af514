#include "failure_lens/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "failure_lens/captioner.hpp"
#include "failure_lens/errors.hpp"
#include "failure_lens/util.hpp"

namespace flens {

const char* ordering_name(Ordering ordering) {
    switch (ordering) {
        case Ordering::svm: return "svm";
        case Ordering::confidence: return "confidence";
        case Ordering::random: return "random";
    }
    return "?";
}

namespace {

void check_ks(std::span<const std::size_t> ks, std::size_t n) {
    if (ks.empty()) fail(Errc::invalid_argument, "empty k list");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == 0 || ks[i] > n)
            fail(Errc::k_out_of_range, "k=" + std::to_string(ks[i]) + " outside [1, " +
                                           std::to_string(n) + "]");
        if (i > 0 && ks[i] <= ks[i - 1])
            fail(Errc::invalid_argument, "k values must be strictly increasing");
    }
}

}  // namespace

TopKCurve fraction_top_k(std::span<const ScoredExample> scored, const std::string& minority_group,
                         std::span<const std::size_t> ks, Ordering ordering, std::uint64_t seed) {
    check_ks(ks, scored.size());
    for (const auto& s : scored)
        if (!s.group)
            fail(Errc::missing_annotation, "example '" + s.id + "' has no group annotation");

    std::vector<std::string> ranked;
    if (ordering == Ordering::random) {
        std::vector<std::size_t> idx(scored.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        ranked.reserve(scored.size());
        for (const std::size_t i : idx) ranked.push_back(scored[i].id);
    } else {
        ranked = rank_top_k(scored, scored.size(),
                            ordering == Ordering::svm ? RankOrder::most_negative_decision
                                                      : RankOrder::lowest_confidence);
    }

    std::map<std::string, bool> is_minority;
    for (const auto& s : scored) is_minority[s.id] = (*s.group == minority_group);

    TopKCurve curve;
    curve.ordering = ordering;
    curve.ks.assign(ks.begin(), ks.end());
    curve.fractions.reserve(ks.size());
    std::size_t hits = 0, consumed = 0;
    for (const std::size_t k : ks) {
        while (consumed < k) {
            if (is_minority.at(ranked[consumed])) ++hits;
            ++consumed;
        }
        curve.fractions.push_back(static_cast<double>(hits) / static_cast<double>(k));
    }
    return curve;
}

std::optional<double> flagged_membership(std::span<const ScoredExample> scored,
                                         const std::string& minority_group) {
    std::size_t flagged = 0, minority = 0;
    for (const auto& s : scored) {
        if (s.decision >= 0.0) continue;
        if (!s.group)
            fail(Errc::missing_annotation, "example '" + s.id + "' has no group annotation");
        ++flagged;
        if (*s.group == minority_group) ++minority;
    }
    if (flagged == 0) return std::nullopt;
    return static_cast<double>(minority) / static_cast<double>(flagged);
}

CaptionAccuracyCurves caption_subgroup_accuracy(const Eigen::VectorXd& positive_caption,
                                                const Eigen::VectorXd& negative_caption,
                                                std::span<const ScoredExample> class_examples,
                                                const EmbeddingTable& class_embeddings,
                                                std::span<const int> correct,
                                                std::span<const std::size_t> ks) {
    if (correct.size() != class_examples.size())
        fail(Errc::alignment, "correctness labels do not match example count");
    check_ks(ks, class_examples.size());

    std::map<std::string, bool> correct_by_id;
    for (std::size_t i = 0; i < class_examples.size(); ++i)
        correct_by_id[class_examples[i].id] = correct[i] == 1;

    const auto accuracy_curve = [&](const Eigen::VectorXd& caption) {
        const std::vector<std::string> ranked =
            nearest_to_caption(caption, class_examples, class_embeddings, class_examples.size());
        std::vector<double> accs;
        accs.reserve(ks.size());
        std::size_t hits = 0, consumed = 0;
        for (const std::size_t k : ks) {
            while (consumed < k) {
                if (correct_by_id.at(ranked[consumed])) ++hits;
                ++consumed;
            }
            accs.push_back(static_cast<double>(hits) / static_cast<double>(k));
        }
        return accs;
    };

    CaptionAccuracyCurves curves;
    curves.ks.assign(ks.begin(), ks.end());
    curves.positive = accuracy_curve(positive_caption);
    curves.negative = accuracy_curve(negative_caption);
    return curves;
}

CorrelationReport pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) fail(Errc::alignment, "series have different lengths");
    if (xs.size() < 2) fail(Errc::not_enough_data, "pearson needs at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail(Errc::zero_variance, "a series is constant");
    CorrelationReport report;
    report.pearson = sxy / std::sqrt(sxx * syy);
    report.n = xs.size();
    return report;
}

}  // namespace flens
