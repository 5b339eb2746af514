#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "failure_lens/core_data.hpp"
#include "failure_lens/distiller.hpp"

namespace flens {

enum class Ordering { svm, confidence, random };

const char* ordering_name(Ordering ordering);

struct TopKCurve {
    std::vector<std::size_t> ks;  // strictly increasing
    std::vector<double> fractions;
    Ordering ordering = Ordering::svm;
};

/// Fraction of the top-k examples (under the given ordering) that carry the
/// minority group annotation, for each k. The random baseline shuffles with
/// the run seed. Every example must be annotated.
TopKCurve fraction_top_k(std::span<const ScoredExample> scored, const std::string& minority_group,
                         std::span<const std::size_t> ks, Ordering ordering,
                         std::uint64_t seed = 0);

/// Fraction of flagged (decision < 0) examples in the minority group;
/// nullopt when nothing is flagged.
std::optional<double> flagged_membership(std::span<const ScoredExample> scored,
                                         const std::string& minority_group);

struct CaptionAccuracyCurves {
    std::vector<std::size_t> ks;
    std::vector<double> positive;  // accuracy of the k examples nearest the top caption
    std::vector<double> negative;  // ... nearest the bottom caption
};

/// For the most positive and most negative caption embedding: the accuracy
/// (fraction with correctness +1) of the k class examples nearest by raw
/// cosine similarity, per k. `correct` is row-aligned with the embeddings.
CaptionAccuracyCurves caption_subgroup_accuracy(const Eigen::VectorXd& positive_caption,
                                                const Eigen::VectorXd& negative_caption,
                                                std::span<const ScoredExample> class_examples,
                                                const EmbeddingTable& class_embeddings,
                                                std::span<const int> correct,
                                                std::span<const std::size_t> ks);

struct CorrelationReport {
    double pearson = 0.0;
    std::size_t n = 0;
};

/// Sample Pearson correlation. Needs n >= 2 and nonzero variance on both
/// sides.
CorrelationReport pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace flens
