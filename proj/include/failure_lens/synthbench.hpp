#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "failure_lens/core_data.hpp"
#include "failure_lens/linear_svm.hpp"

namespace flens {

/// subpopulation: each class carries its own planted group offset
/// (majority/minority). corruption: one offset shared by every class
/// (clean/corrupted), mirroring a common-corruption shift.
enum class SynthScenario { subpopulation, corruption };

/// Planted-shift generator parameters. The spuriousness knob rho drives
/// both the group imbalance pi(rho) = 0.5 + 0.45*rho (majority fraction)
/// and the group error gap delta(rho) = 0.6*rho. At rho=0 groups are
/// balanced and err at the same rate; detection is at chance.
struct SynthConfig {
    int n_classes = 2;
    int n_per_class = 200;  // per split (train/val/test/pool)
    int dim = 64;
    double rho = 0.5;
    double noise_sigma = 0.2;
    double p_correct_major = 0.95;
    double beta = 0.5;  // group offset strength
    int n_caption_decoys = 3;
    SynthScenario scenario = SynthScenario::subpopulation;
    std::uint64_t seed = 0;

    double majority_fraction() const { return 0.5 + 0.45 * rho; }
    double error_gap() const { return 0.6 * rho; }
    int minority_count() const;  // round-half-even((1 - pi) * n_per_class)
    void validate() const;
};

struct SynthSplit {
    EmbeddingTable embeddings;
    std::vector<ExampleMeta> meta;
};

struct SynthDataset {
    SynthSplit train, val, test, pool;
    CaptionSet captions;
    // Generator internals, handy for verification.
    std::vector<Eigen::VectorXd> class_centers;
    std::vector<Eigen::VectorXd> group_offsets;
    std::string minority_group;  // "minority" or "corrupted"
};

/// Deterministic given the config (seed included). Embeddings are
/// normalize(mu_k +- beta*g_k + sigma*noise), +beta for the majority
/// group. Simulated correctness is Bernoulli per group; confidences are
/// drawn from overlapping bands ([0.7,1.0] correct, [0.3,0.9] incorrect)
/// so confidence stays a noisy baseline. Train/test/pool carry the
/// pi(rho) group imbalance; the validation split is group balanced, as in
/// the planted-shift protocol this reenacts (the error predictor trains
/// on a balanced held-out set while the shift lives in the other splits).
/// The caption set holds one reference per class (at mu_k), the
/// majority/minority style candidates (at mu_k +- g_k) and
/// n_caption_decoys random candidates.
SynthDataset generate(const SynthConfig& config);

/// Writes {train,val,test,pool}.emb1/.jsonl plus captions.jsonl/.emb1.
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

struct SweepRow {
    double rho = 0.0;
    std::uint64_t seed = 0;
    int class_id = 0;
    std::optional<double> cv_score;
    std::optional<double> frac_top_k_svm;
    std::optional<double> frac_top_k_conf;
    std::optional<int> caption_hit;  // 1-based rank of the minority caption, most-negative first
    std::optional<double> flagged_minority_frac;
    std::string skip_reason;  // empty for fitted classes
};

struct SweepReport {
    std::vector<SweepRow> rows;  // one row per (rho, seed, class)
};

/// For every (rho, seed) cell: generate, distill on the validation split,
/// then evaluate on the test split. Cells run in parallel; each is
/// deterministic in isolation.
SweepReport sweep(const SynthConfig& base, std::span<const double> rho_grid,
                  std::span<const std::uint64_t> seeds, const SvmConfig& svm,
                  ProfileKind profile, int threads = 0);

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path);

}  // namespace flens
