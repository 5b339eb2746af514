#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "failure_lens/core_data.hpp"
#include "failure_lens/distiller.hpp"
#include "failure_lens/geometry.hpp"

namespace flens {

/// Template grammar for candidate captions. A nullopt slot entry means the
/// slot is omitted for that combination ("none" in grammar configs); the
/// resulting double spaces collapse to one. Empty adjective/preposition
/// lists are treated as [none]; an empty noun list is an error.
struct CaptionGrammar {
    std::string tmpl = "a photo of a {adjective} {noun} {preposition}";
    std::vector<std::optional<std::string>> adjectives;
    std::vector<std::string> nouns;
    std::vector<std::optional<std::string>> prepositions;
};

CaptionGrammar grammar_from_json_file(const std::filesystem::path& path);

/// Every adjective x noun x preposition combination, adjective-major,
/// deduplicated keeping first occurrence.
std::vector<std::string> expand_grammar(const CaptionGrammar& grammar);

/// The caption's information beyond the reference: (c - r) / ||c - r||.
/// c and r must differ (difference norm >= 1e-9).
Eigen::VectorXd caption_direction(const Eigen::VectorXd& c, const Eigen::VectorXd& r);

struct CaptionScore {
    std::string text;
    double score = 0.0;
    bool positive = false;  // sign of the decision value
};

/// Scores every candidate caption of the direction's class by the decision
/// value of its normalized difference embedding, sorted descending. Caption
/// embeddings are preprocessed with the profile before differencing so they
/// live in the same space as the SVM. Set include_bias=false to rank by
/// alignment w.c_hat alone (same ordering, shifted scores).
std::vector<CaptionScore> score_captions(const ClassDirection& direction,
                                         const CaptionSet& captions,
                                         const PreprocessProfile& profile,
                                         bool include_bias = true);

/// Ids of the k class examples whose raw embeddings have the highest cosine
/// similarity to the caption embedding; ties broken by id.
std::vector<std::string> nearest_to_caption(const Eigen::VectorXd& caption_embedding,
                                            std::span<const ScoredExample> class_examples,
                                            const EmbeddingTable& class_embeddings,
                                            std::size_t k);

}  // namespace flens
