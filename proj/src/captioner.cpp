#include "failure_lens/captioner.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "failure_lens/errors.hpp"

namespace flens {

namespace {

std::string substitute(const std::string& tmpl, const std::string& slot,
                       const std::string& value) {
    const std::string token = "{" + slot + "}";
    std::string out = tmpl;
    const auto pos = out.find(token);
    if (pos != std::string::npos) out.replace(pos, token.size(), value);
    return out;
}

std::string collapse_spaces(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool prev_space = false;
    for (const char c : text) {
        if (c == ' ') {
            if (!prev_space && !out.empty()) out.push_back(c);
            prev_space = true;
        } else {
            out.push_back(c);
            prev_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::optional<std::string>> slot_list_from_json(const nlohmann::json& arr) {
    std::vector<std::optional<std::string>> out;
    for (const auto& item : arr) {
        if (item.is_null()) out.push_back(std::nullopt);
        else out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

CaptionGrammar grammar_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, path.string() + ": " + e.what());
    }
    CaptionGrammar grammar;
    if (doc.contains("template")) grammar.tmpl = doc["template"].get<std::string>();
    if (doc.contains("adjectives")) grammar.adjectives = slot_list_from_json(doc["adjectives"]);
    if (doc.contains("prepositions"))
        grammar.prepositions = slot_list_from_json(doc["prepositions"]);
    if (doc.contains("nouns")) grammar.nouns = doc["nouns"].get<std::vector<std::string>>();
    return grammar;
}

std::vector<std::string> expand_grammar(const CaptionGrammar& grammar) {
    if (grammar.nouns.empty()) fail(Errc::invalid_argument, "grammar has no nouns");
    std::vector<std::optional<std::string>> adjectives = grammar.adjectives;
    std::vector<std::optional<std::string>> prepositions = grammar.prepositions;
    if (adjectives.empty()) adjectives.push_back(std::nullopt);
    if (prepositions.empty()) prepositions.push_back(std::nullopt);

    std::vector<std::string> captions;
    std::set<std::string> seen;
    for (const auto& adjective : adjectives) {
        for (const auto& noun : grammar.nouns) {
            for (const auto& preposition : prepositions) {
                std::string text = substitute(grammar.tmpl, "adjective", adjective.value_or(""));
                text = substitute(text, "noun", noun);
                text = substitute(text, "preposition", preposition.value_or(""));
                text = collapse_spaces(text);
                if (text.empty()) fail(Errc::invalid_argument, "grammar produced empty caption");
                if (seen.insert(text).second) captions.push_back(std::move(text));
            }
        }
    }
    return captions;
}

Eigen::VectorXd caption_direction(const Eigen::VectorXd& c, const Eigen::VectorXd& r) {
    if (c.size() != r.size())
        fail(Errc::dim_mismatch, "caption and reference embeddings have different lengths");
    const Eigen::VectorXd diff = c - r;
    const double norm = diff.norm();
    if (norm < 1e-9)
        fail(Errc::degenerate_caption, "caption embedding coincides with the reference");
    return diff / norm;
}

std::vector<CaptionScore> score_captions(const ClassDirection& direction,
                                         const CaptionSet& captions,
                                         const PreprocessProfile& profile, bool include_bias) {
    captions.validate();
    if (profile.kind != direction.profile)
        fail(Errc::invalid_argument, "profile kind does not match the direction's profile");
    const Eigen::Index ref_row = captions.reference_row(direction.class_id);
    const Eigen::VectorXd r = apply_profile(captions.embeddings.row(ref_row), profile);

    std::vector<CaptionScore> scores;
    for (const Eigen::Index row : captions.candidate_rows(direction.class_id)) {
        const Eigen::VectorXd c = apply_profile(captions.embeddings.row(row), profile);
        const Eigen::VectorXd c_hat = caption_direction(c, r);
        if (c_hat.size() != direction.w.size())
            fail(Errc::dim_mismatch, "caption embedding dim does not match direction dim");
        CaptionScore score;
        score.text = captions.records[static_cast<std::size_t>(row)].text;
        score.score = direction.w.dot(c_hat) + (include_bias ? direction.b : 0.0);
        score.positive = score.score >= 0.0;
        scores.push_back(std::move(score));
    }
    std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.text < b.text;
    });
    return scores;
}

std::vector<std::string> nearest_to_caption(const Eigen::VectorXd& caption_embedding,
                                            std::span<const ScoredExample> class_examples,
                                            const EmbeddingTable& class_embeddings,
                                            std::size_t k) {
    if (static_cast<Eigen::Index>(class_examples.size()) != class_embeddings.rows())
        fail(Errc::alignment, "scored examples and embeddings disagree on row count");
    if (k > class_examples.size())
        fail(Errc::k_out_of_range, "k=" + std::to_string(k) + " exceeds class size " +
                                       std::to_string(class_examples.size()));
    std::vector<std::pair<double, std::string>> keyed;  // (-cosine, id) ascending
    keyed.reserve(class_examples.size());
    for (std::size_t i = 0; i < class_examples.size(); ++i) {
        const double sim =
            cosine(class_embeddings.row(static_cast<Eigen::Index>(i)), caption_embedding);
        keyed.emplace_back(-sim, class_examples[i].id);
    }
    std::stable_sort(keyed.begin(), keyed.end());
    std::vector<std::string> ids;
    ids.reserve(k);
    for (std::size_t i = 0; i < k; ++i) ids.push_back(keyed[i].second);
    return ids;
}

}  // namespace flens
