#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "failure_lens/core_data.hpp"
#include "failure_lens/geometry.hpp"
#include "failure_lens/linear_svm.hpp"

namespace flens {

struct DistillConfig {
    ProfileKind profile = ProfileKind::whiten_norm;
    SvmConfig svm;
    int min_count = 5;  // corrects AND incorrects required per class
    std::uint64_t seed = 0;
    int threads = 0;  // 0 => all cores; result independent of thread count
};

/// One failure direction per class that had enough corrects and incorrects
/// to fit; everything else lands in `skipped` with a reason.
struct DistillRun {
    std::map<int, ClassDirection> directions;
    std::vector<std::pair<int, std::string>> skipped;
    PreprocessProfile profile;
    std::uint64_t seed = 0;
};

struct ScoredExample {
    std::string id;
    int class_id = 0;
    double decision = 0.0;
    double confidence = 0.0;
    std::optional<std::string> group;
};

/// Fits one error-predicting SVM per class on the validation split
/// (examples restricted to true class == k), selecting C by stratified
/// cross-validation. Whitening stats, when the profile calls for them, are
/// fit once on `whitening_reference` (defaults to the validation table)
/// and reused for every later split.
DistillRun distill(const EmbeddingTable& val_embeddings, std::span<const ExampleMeta> val_meta,
                   const DistillConfig& config,
                   const EmbeddingTable* whitening_reference = nullptr);

/// Decision value of every example under its class direction. Examples of
/// classes without a direction are omitted (a warning is logged with the
/// count).
std::vector<ScoredExample> score_split(const DistillRun& run, const EmbeddingTable& embeddings,
                                       std::span<const ExampleMeta> meta);

enum class RankOrder { most_negative_decision, lowest_confidence };

/// Ids of the k examples with the smallest key (decision value or
/// confidence), ascending, ties broken by id.
std::vector<std::string> rank_top_k(std::span<const ScoredExample> scored, std::size_t k,
                                    RankOrder order);

/// Ids with decision value strictly below zero.
std::vector<std::string> flag_incorrect(std::span<const ScoredExample> scored);

}  // namespace flens
