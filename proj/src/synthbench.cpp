#include "failure_lens/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "failure_lens/captioner.hpp"
#include "failure_lens/distiller.hpp"
#include "failure_lens/errors.hpp"
#include "failure_lens/evaluate.hpp"
#include "failure_lens/geometry.hpp"
#include "failure_lens/util.hpp"

namespace flens {

namespace {

double round_half_even(double x) {
    const double floor_x = std::floor(x);
    const double frac = x - floor_x;
    if (frac > 0.5) return floor_x + 1.0;
    if (frac < 0.5) return floor_x;
    return std::fmod(floor_x, 2.0) == 0.0 ? floor_x : floor_x + 1.0;
}

Eigen::VectorXd random_unit(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
    const double norm = v.norm();
    if (norm < 1e-9) fail(Errc::zero_norm, "degenerate random draw");
    return v / norm;
}

// Random unit vector orthogonalized against a direction.
Eigen::VectorXd random_unit_orthogonal(std::mt19937_64& rng, const Eigen::VectorXd& against) {
    for (int attempt = 0; attempt < 16; ++attempt) {
        Eigen::VectorXd v = random_unit(rng, static_cast<int>(against.size()));
        v -= v.dot(against) * against;
        const double norm = v.norm();
        if (norm > 1e-6) return v / norm;
    }
    fail(Errc::zero_norm, "could not draw an orthogonal direction");
}

}  // namespace

int SynthConfig::minority_count() const {
    return static_cast<int>(round_half_even((1.0 - majority_fraction()) * n_per_class));
}

void SynthConfig::validate() const {
    if (n_classes < 2) fail(Errc::invalid_argument, "need at least 2 classes");
    if (n_per_class < 4) fail(Errc::invalid_argument, "need at least 4 examples per class");
    if (dim < 4) fail(Errc::invalid_argument, "dim must be at least 4");
    if (!(rho >= 0.0 && rho <= 1.0)) fail(Errc::invalid_argument, "rho must lie in [0,1]");
    if (!(noise_sigma >= 0.0)) fail(Errc::invalid_argument, "noise_sigma must be nonnegative");
    if (!(p_correct_major >= 0.0 && p_correct_major <= 1.0))
        fail(Errc::invalid_argument, "p_correct_major must lie in [0,1]");
    const double p_minor = p_correct_major - error_gap();
    if (!(p_minor >= 0.0 && p_minor <= 1.0))
        fail(Errc::invalid_argument, "p_correct_major - 0.6*rho leaves [0,1]");
    if (!(beta > 0.0)) fail(Errc::invalid_argument, "beta must be positive");
    if (n_caption_decoys < 0) fail(Errc::invalid_argument, "n_caption_decoys must be >= 0");
}

SynthDataset generate(const SynthConfig& config) {
    config.validate();

    SynthDataset dataset;
    dataset.minority_group =
        config.scenario == SynthScenario::subpopulation ? "minority" : "corrupted";
    const std::string majority_group =
        config.scenario == SynthScenario::subpopulation ? "majority" : "clean";

    std::mt19937_64 center_rng(mix_seed(config.seed, 0xce47e5));
    Eigen::VectorXd shared_offset;
    if (config.scenario == SynthScenario::corruption)
        shared_offset = random_unit(center_rng, config.dim);
    for (int cls = 0; cls < config.n_classes; ++cls) {
        Eigen::VectorXd center = random_unit(center_rng, config.dim);
        Eigen::VectorXd offset = config.scenario == SynthScenario::corruption
                                     ? shared_offset
                                     : random_unit_orthogonal(center_rng, center);
        dataset.class_centers.push_back(std::move(center));
        dataset.group_offsets.push_back(std::move(offset));
    }

    // The validation split (where the error predictor trains) is group
    // balanced, mirroring the planted-shift protocol it reenacts; the
    // pi(rho) imbalance applies to the shifted splits.
    const int n_minor_shifted = config.minority_count();
    const int n_minor_balanced = static_cast<int>(round_half_even(0.5 * config.n_per_class));
    const double p_correct_minor = config.p_correct_major - config.error_gap();

    const char* split_names[4] = {"train", "val", "test", "pool"};
    SynthSplit* splits[4] = {&dataset.train, &dataset.val, &dataset.test, &dataset.pool};
    for (int si = 0; si < 4; ++si) {
        SynthSplit& split = *splits[si];
        const int n_minor = si == 1 ? n_minor_balanced : n_minor_shifted;
        const int total = config.n_classes * config.n_per_class;
        split.embeddings.data.resize(total, config.dim);
        split.meta.reserve(static_cast<std::size_t>(total));
        std::mt19937_64 rng(
            mix_seed(config.seed, 0x5b1d0000ULL + static_cast<std::uint64_t>(si)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_real_distribution<double> conf_correct(0.7, 1.0);
        std::uniform_real_distribution<double> conf_incorrect(0.3, 0.9);
        std::uniform_int_distribution<int> wrong_label(0, config.n_classes - 2);

        Eigen::Index row = 0;
        for (int cls = 0; cls < config.n_classes; ++cls) {
            const Eigen::VectorXd& mu = dataset.class_centers[static_cast<std::size_t>(cls)];
            const Eigen::VectorXd& g = dataset.group_offsets[static_cast<std::size_t>(cls)];
            for (int j = 0; j < config.n_per_class; ++j, ++row) {
                const bool minority = j < n_minor;
                Eigen::VectorXd x = mu + (minority ? -config.beta : config.beta) * g;
                for (int f = 0; f < config.dim; ++f) x[f] += config.noise_sigma * gauss(rng);
                const double norm = x.norm();
                if (norm < 1e-9) fail(Errc::zero_norm, "degenerate synthetic embedding");
                split.embeddings.data.row(row) = (x / norm).cast<float>();

                const double p_correct = minority ? p_correct_minor : config.p_correct_major;
                const bool correct = unit(rng) < p_correct;
                ExampleMeta meta;
                meta.id = std::string(split_names[si]) + "-" + std::to_string(cls) + "-" +
                          std::to_string(j);
                meta.class_id = cls;
                if (correct) {
                    meta.pred = cls;
                    meta.confidence = conf_correct(rng);
                } else {
                    int wrong = wrong_label(rng);
                    if (wrong >= cls) ++wrong;
                    meta.pred = wrong;
                    meta.confidence = conf_incorrect(rng);
                }
                meta.group = minority ? dataset.minority_group : majority_group;
                split.meta.push_back(std::move(meta));
            }
        }
    }

    // Caption set: reference at the class center, style candidates at the
    // group offsets, plus random decoys.
    std::mt19937_64 caption_rng(mix_seed(config.seed, 0xcaf7e0));
    const int per_class = 3 + config.n_caption_decoys;
    dataset.captions.embeddings.data.resize(config.n_classes * per_class, config.dim);
    Eigen::Index crow = 0;
    const auto push_caption = [&](const std::string& text, int cls, CaptionKind kind,
                                  const Eigen::VectorXd& embedding) {
        const double norm = embedding.norm();
        if (norm < 1e-9) fail(Errc::zero_norm, "degenerate caption embedding");
        dataset.captions.embeddings.data.row(crow) = (embedding / norm).cast<float>();
        dataset.captions.records.push_back({text, cls, kind});
        ++crow;
    };
    for (int cls = 0; cls < config.n_classes; ++cls) {
        const Eigen::VectorXd& mu = dataset.class_centers[static_cast<std::size_t>(cls)];
        const Eigen::VectorXd& g = dataset.group_offsets[static_cast<std::size_t>(cls)];
        const std::string suffix = " (class " + std::to_string(cls) + ")";
        push_caption("a photo of the class" + suffix, cls, CaptionKind::reference, mu);
        push_caption("majority-style" + suffix, cls, CaptionKind::candidate, mu + g);
        push_caption("minority-style" + suffix, cls, CaptionKind::candidate, mu - g);
        for (int d = 0; d < config.n_caption_decoys; ++d) {
            const Eigen::VectorXd u = random_unit_orthogonal(caption_rng, mu);
            push_caption("decoy-" + std::to_string(d) + suffix, cls, CaptionKind::candidate,
                         mu + u);
        }
    }
    dataset.captions.validate();
    return dataset;
}

void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::pair<const char*, const SynthSplit*> splits[4] = {
        {"train", &dataset.train}, {"val", &dataset.val}, {"test", &dataset.test},
        {"pool", &dataset.pool}};
    for (const auto& [name, split] : splits) {
        write_embeddings(split->embeddings, dir / (std::string(name) + ".emb1"));
        write_metadata(split->meta, dir / (std::string(name) + ".jsonl"));
    }
    write_captions(dataset.captions.records, dir / "captions.jsonl");
    write_embeddings(dataset.captions.embeddings, dir / "captions.emb1");
}

namespace {

struct CellResult {
    std::vector<SweepRow> rows;
};

CellResult run_cell(const SynthConfig& base, double rho, std::uint64_t seed, const SvmConfig& svm,
                    ProfileKind profile) {
    SynthConfig config = base;
    config.rho = rho;
    config.seed = seed;
    const SynthDataset dataset = generate(config);

    DistillConfig distill_config;
    distill_config.profile = profile;
    distill_config.svm = svm;
    distill_config.seed = seed;
    distill_config.threads = 1;  // the sweep parallelizes across cells
    const DistillRun run = distill(dataset.val.embeddings, dataset.val.meta, distill_config);

    const std::vector<ScoredExample> test_scored =
        score_split(run, dataset.test.embeddings, dataset.test.meta);

    CellResult result;
    for (int cls = 0; cls < config.n_classes; ++cls) {
        SweepRow row;
        row.rho = rho;
        row.seed = seed;
        row.class_id = cls;

        const auto dir_it = run.directions.find(cls);
        if (dir_it == run.directions.end()) {
            row.skip_reason = "NotEnoughData";
            for (const auto& [skip_cls, reason] : run.skipped)
                if (skip_cls == cls) row.skip_reason = reason;
            result.rows.push_back(std::move(row));
            continue;
        }
        row.cv_score = dir_it->second.cv_score;

        std::vector<ScoredExample> class_scored;
        for (const auto& s : test_scored)
            if (s.class_id == cls) class_scored.push_back(s);

        std::size_t minority_size = 0;
        for (const auto& s : class_scored)
            if (s.group && *s.group == dataset.minority_group) ++minority_size;
        if (minority_size >= 1 && !class_scored.empty()) {
            const std::size_t ks[1] = {minority_size};
            row.frac_top_k_svm =
                fraction_top_k(class_scored, dataset.minority_group, ks, Ordering::svm).fractions[0];
            row.frac_top_k_conf =
                fraction_top_k(class_scored, dataset.minority_group, ks, Ordering::confidence)
                    .fractions[0];
        }
        row.flagged_minority_frac = flagged_membership(class_scored, dataset.minority_group);

        const std::vector<CaptionScore> scores =
            score_captions(dir_it->second, dataset.captions, run.profile);
        for (std::size_t rank = 0; rank < scores.size(); ++rank) {
            // Most negative first.
            const auto& score = scores[scores.size() - 1 - rank];
            if (score.text.rfind("minority-style", 0) == 0) {
                row.caption_hit = static_cast<int>(rank + 1);
                break;
            }
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace

SweepReport sweep(const SynthConfig& base, std::span<const double> rho_grid,
                  std::span<const std::uint64_t> seeds, const SvmConfig& svm,
                  ProfileKind profile, int threads) {
    if (rho_grid.empty()) fail(Errc::invalid_argument, "empty rho grid");
    if (seeds.empty()) fail(Errc::invalid_argument, "empty seed list");

    struct Cell {
        double rho;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const double rho : rho_grid)
        for (const std::uint64_t seed : seeds) cells.push_back({rho, seed});

    std::vector<CellResult> results(cells.size());
    parallel_for(cells.size(), threads, [&](std::size_t i) {
        results[i] = run_cell(base, cells[i].rho, cells[i].seed, svm, profile);
    });

    SweepReport report;
    for (auto& cell : results)
        for (auto& row : cell.rows) report.rows.push_back(std::move(row));
    return report;
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for write: " + path.string());
    out << "rho,seed,class,cv_score,frac_top_k_svm,frac_top_k_conf,caption_hit,"
           "flagged_minority_frac\n";
    const auto opt = [](const std::optional<double>& v) {
        return v ? format_number(*v) : std::string();
    };
    for (const auto& row : report.rows) {
        out << format_number(row.rho) << "," << row.seed << "," << row.class_id << ","
            << opt(row.cv_score) << "," << opt(row.frac_top_k_svm) << ","
            << opt(row.frac_top_k_conf) << ","
            << (row.caption_hit ? std::to_string(*row.caption_hit) : std::string()) << ","
            << opt(row.flagged_minority_frac) << "\n";
    }
    out.flush();
    if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

}  // namespace flens
