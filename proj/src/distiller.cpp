#include "failure_lens/distiller.hpp"

#include <algorithm>
#include <set>

#include "failure_lens/errors.hpp"
#include "failure_lens/util.hpp"

namespace flens {

namespace {

void require_aligned(const EmbeddingTable& embeddings, std::span<const ExampleMeta> meta) {
    embeddings.validate();
    if (static_cast<Eigen::Index>(meta.size()) != embeddings.rows())
        fail(Errc::alignment, "metadata has " + std::to_string(meta.size()) +
                                  " records for " + std::to_string(embeddings.rows()) +
                                  " embedding rows");
}

struct ClassOutcome {
    bool fitted = false;
    ClassDirection direction;
    std::string skip_reason;
};

}  // namespace

DistillRun distill(const EmbeddingTable& val_embeddings, std::span<const ExampleMeta> val_meta,
                   const DistillConfig& config, const EmbeddingTable* whitening_reference) {
    require_aligned(val_embeddings, val_meta);
    if (val_meta.empty()) fail(Errc::not_enough_data, "empty validation split");

    DistillRun run;
    run.seed = config.seed;
    run.profile.kind = config.profile;
    if (config.profile == ProfileKind::whiten_norm) {
        const EmbeddingTable& reference =
            whitening_reference != nullptr ? *whitening_reference : val_embeddings;
        if (reference.dim() != val_embeddings.dim())
            fail(Errc::dim_mismatch, "whitening reference dim does not match validation dim");
        run.profile.stats = fit_whitening(reference);
    }

    std::map<int, std::vector<Eigen::Index>> by_class;
    for (std::size_t i = 0; i < val_meta.size(); ++i)
        by_class[val_meta[i].class_id].push_back(static_cast<Eigen::Index>(i));

    std::vector<int> classes;
    classes.reserve(by_class.size());
    for (const auto& [cls, _] : by_class) classes.push_back(cls);

    std::vector<ClassOutcome> outcomes(classes.size());
    parallel_for(classes.size(), config.threads, [&](std::size_t ci) {
        const int cls = classes[ci];
        const auto& rows = by_class.at(cls);
        Eigen::Index n_correct = 0, n_incorrect = 0;
        for (const Eigen::Index r : rows)
            (correctness_label(val_meta[static_cast<std::size_t>(r)]) == 1 ? n_correct
                                                                           : n_incorrect)++;
        ClassOutcome& out = outcomes[ci];
        if (n_correct < config.min_count || n_incorrect < config.min_count) {
            out.skip_reason = "NotEnoughData";
            return;
        }

        SvmProblem problem;
        problem.X.resize(static_cast<Eigen::Index>(rows.size()), val_embeddings.dim());
        problem.z.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            problem.X.row(static_cast<Eigen::Index>(r)) =
                apply_profile(val_embeddings.row(rows[r]), run.profile).transpose();
            problem.z[static_cast<Eigen::Index>(r)] =
                correctness_label(val_meta[static_cast<std::size_t>(rows[r])]);
        }
        problem.weights = balanced_weights(problem.z);

        const std::uint64_t class_seed = mix_seed(config.seed, static_cast<std::uint64_t>(cls));
        CvReport report;
        SvmModel model;
        try {
            report = cv_select(problem, config.svm, class_seed);
            model = fit_svm(problem, report.chosen_C, config.svm.tol, config.svm.max_epochs,
                            mix_seed(class_seed, 0xf17));
        } catch (const Error& e) {
            if (e.code() == Errc::not_enough_data || e.code() == Errc::single_class) {
                out.skip_reason = "NotEnoughData";
                return;
            }
            throw;
        }

        ClassDirection dir;
        dir.class_id = cls;
        dir.w = model.w;
        dir.b = model.b;
        const double norm = model.w.norm();
        if (norm <= 0.0) {
            out.skip_reason = "DegenerateDirection";
            return;
        }
        dir.w_hat = model.w / norm;
        dir.cv_score = report.cv_score;
        dir.C = report.chosen_C;
        dir.n_correct = n_correct;
        dir.n_incorrect = n_incorrect;
        dir.profile = config.profile;
        out.direction = std::move(dir);
        out.fitted = true;
    });

    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        if (outcomes[ci].fitted)
            run.directions.emplace(classes[ci], std::move(outcomes[ci].direction));
        else
            run.skipped.emplace_back(classes[ci], outcomes[ci].skip_reason);
    }
    if (log_enabled(LogLevel::info))
        log_line(LogLevel::info, "distilled " + std::to_string(run.directions.size()) +
                                     " classes, skipped " + std::to_string(run.skipped.size()));
    return run;
}

std::vector<ScoredExample> score_split(const DistillRun& run, const EmbeddingTable& embeddings,
                                       std::span<const ExampleMeta> meta) {
    if (meta.empty()) return {};
    require_aligned(embeddings, meta);
    std::vector<ScoredExample> scored;
    scored.reserve(meta.size());
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        const auto it = run.directions.find(meta[i].class_id);
        if (it == run.directions.end()) {
            ++skipped;
            continue;
        }
        const ClassDirection& dir = it->second;
        const Eigen::VectorXd x =
            apply_profile(embeddings.row(static_cast<Eigen::Index>(i)), run.profile);
        if (x.size() != dir.w.size())
            fail(Errc::dim_mismatch, "embedding dim does not match direction dim");
        ScoredExample s;
        s.id = meta[i].id;
        s.class_id = meta[i].class_id;
        s.decision = dir.w.dot(x) + dir.b;
        s.confidence = meta[i].confidence;
        s.group = meta[i].group;
        scored.push_back(std::move(s));
    }
    if (skipped > 0)
        log_line(LogLevel::warn,
                 std::to_string(skipped) + " examples skipped (class has no direction)");
    return scored;
}

std::vector<std::string> rank_top_k(std::span<const ScoredExample> scored, std::size_t k,
                                    RankOrder order) {
    if (k > scored.size())
        fail(Errc::k_out_of_range,
             "k=" + std::to_string(k) + " exceeds " + std::to_string(scored.size()) + " examples");
    std::vector<std::pair<double, std::string>> keyed;
    keyed.reserve(scored.size());
    for (const auto& s : scored)
        keyed.emplace_back(order == RankOrder::most_negative_decision ? s.decision : s.confidence,
                           s.id);
    std::stable_sort(keyed.begin(), keyed.end());
    std::vector<std::string> ids;
    ids.reserve(k);
    for (std::size_t i = 0; i < k; ++i) ids.push_back(keyed[i].second);
    return ids;
}

std::vector<std::string> flag_incorrect(std::span<const ScoredExample> scored) {
    std::vector<std::string> ids;
    for (const auto& s : scored)
        if (s.decision < 0.0) ids.push_back(s.id);
    return ids;
}

}  // namespace flens
