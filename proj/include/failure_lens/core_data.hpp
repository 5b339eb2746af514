#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace flens {

using Matrix32 = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense table of example embeddings. Values are kept as the 32-bit floats
/// stored on disk; arithmetic widens rows to 64-bit on access.
struct EmbeddingTable {
    Matrix32 data;

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index dim() const { return data.cols(); }

    Eigen::VectorXd row(Eigen::Index i) const { return data.row(i).cast<double>(); }

    // n_rows >= 1, dim >= 1, all entries finite.
    void validate() const;
};

/// One metadata record per embedding row. `group` is an evaluation-only
/// annotation (e.g. minority/majority, corrupted/clean) and never feeds
/// the fitting path.
struct ExampleMeta {
    std::string id;
    int class_id = 0;
    int pred = 0;
    double confidence = 0.0;
    std::optional<std::string> group;
};

/// +1 if the base model predicted this example correctly, -1 otherwise.
inline int correctness_label(const ExampleMeta& meta) {
    return meta.pred == meta.class_id ? +1 : -1;
}

enum class ProfileKind { whiten_norm, norm_only };

const char* profile_kind_name(ProfileKind kind);
ProfileKind profile_kind_from_name(const std::string& name);

/// Fitted result for one class: the separating hyperplane (w, b) in the
/// preprocessed embedding space, its unit-norm direction, and the
/// cross-validation score that measures the failure mode's strength.
struct ClassDirection {
    int class_id = 0;
    Eigen::VectorXd w;
    double b = 0.0;
    Eigen::VectorXd w_hat;  // w / ||w||
    double cv_score = 0.0;
    double C = 1.0;
    std::int64_t n_correct = 0;
    std::int64_t n_incorrect = 0;
    ProfileKind profile = ProfileKind::whiten_norm;

    void validate() const;
};

enum class CaptionKind { reference, candidate };

struct CaptionRecord {
    std::string text;
    int class_id = 0;
    CaptionKind kind = CaptionKind::candidate;
};

/// Caption records row-aligned with an embedding table. Exactly one
/// reference caption per class that appears in the set.
struct CaptionSet {
    std::vector<CaptionRecord> records;
    EmbeddingTable embeddings;

    void validate() const;
    Eigen::Index reference_row(int class_id) const;
    std::vector<Eigen::Index> candidate_rows(int class_id) const;
    std::vector<int> classes() const;
};

// ---- EMB1 binary format -------------------------------------------------
// bytes 0-3   magic "FDEM"
// bytes 4-7   u32 little-endian version = 1
// bytes 8-15  u64 little-endian n_rows
// bytes 16-19 u32 little-endian dim
// then n_rows*dim f32 little-endian, row-major.

EmbeddingTable read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

// ---- JSON-lines metadata ------------------------------------------------
// One record per embedding row: {"id","class","pred","confidence","group"?}.

std::vector<ExampleMeta> read_metadata(const std::filesystem::path& path,
                                       std::int64_t expected_rows);
void write_metadata(std::span<const ExampleMeta> meta, const std::filesystem::path& path);

// ---- JSON-lines captions ------------------------------------------------
// {"text","class","kind"} row-aligned with a caption EMB1 file.

std::vector<CaptionRecord> read_captions(const std::filesystem::path& path);
void write_captions(std::span<const CaptionRecord> records, const std::filesystem::path& path);
CaptionSet read_caption_set(const std::filesystem::path& captions_jsonl,
                            const std::filesystem::path& embeddings_emb1);

// ---- Direction files ----------------------------------------------------
// One JSON document per class.

ClassDirection read_direction(const std::filesystem::path& path);
void write_direction(const ClassDirection& direction, const std::filesystem::path& path);

}  // namespace flens
