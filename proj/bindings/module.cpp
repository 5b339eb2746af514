#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "failure_lens/captioner.hpp"
#include "failure_lens/core_data.hpp"
#include "failure_lens/distiller.hpp"
#include "failure_lens/errors.hpp"
#include "failure_lens/evaluate.hpp"
#include "failure_lens/geometry.hpp"
#include "failure_lens/intervene.hpp"
#include "failure_lens/linear_svm.hpp"
#include "failure_lens/synthbench.hpp"

namespace py = pybind11;
using namespace flens;

namespace {

std::vector<ScoredExample> scored_from_list(const std::vector<ScoredExample>& v) { return v; }

}  // namespace

PYBIND11_MODULE(_failure_lens, m) {
    m.doc() = "Distill model failure modes as directions in embedding space";

    py::register_exception<Error>(m, "FailureLensError");

    py::class_<EmbeddingTable>(m, "EmbeddingTable")
        .def(py::init([](const Matrix32& data) {
                 EmbeddingTable t;
                 t.data = data;
                 t.validate();
                 return t;
             }),
             py::arg("data"))
        .def_property_readonly("data", [](const EmbeddingTable& t) { return t.data; })
        .def_property_readonly("n_rows", &EmbeddingTable::rows)
        .def_property_readonly("dim", &EmbeddingTable::dim)
        .def("row", &EmbeddingTable::row, py::arg("i"));

    py::class_<ExampleMeta>(m, "ExampleMeta")
        .def(py::init([](std::string id, int class_id, int pred, double confidence,
                         std::optional<std::string> group) {
                 return ExampleMeta{std::move(id), class_id, pred, confidence, std::move(group)};
             }),
             py::arg("id"), py::arg("class_id"), py::arg("pred"), py::arg("confidence"),
             py::arg("group") = std::nullopt)
        .def_readwrite("id", &ExampleMeta::id)
        .def_readwrite("class_id", &ExampleMeta::class_id)
        .def_readwrite("pred", &ExampleMeta::pred)
        .def_readwrite("confidence", &ExampleMeta::confidence)
        .def_readwrite("group", &ExampleMeta::group);

    m.def("correctness_label", &correctness_label, py::arg("meta"));

    py::enum_<ProfileKind>(m, "ProfileKind")
        .value("whiten_norm", ProfileKind::whiten_norm)
        .value("norm_only", ProfileKind::norm_only);

    py::class_<ClassDirection>(m, "ClassDirection")
        .def_readonly("class_id", &ClassDirection::class_id)
        .def_readonly("w", &ClassDirection::w)
        .def_readonly("b", &ClassDirection::b)
        .def_readonly("w_hat", &ClassDirection::w_hat)
        .def_readonly("cv_score", &ClassDirection::cv_score)
        .def_readonly("C", &ClassDirection::C)
        .def_readonly("n_correct", &ClassDirection::n_correct)
        .def_readonly("n_incorrect", &ClassDirection::n_incorrect)
        .def_readonly("profile", &ClassDirection::profile);

    m.def("read_embeddings", &read_embeddings, py::arg("path"));
    m.def("write_embeddings", &write_embeddings, py::arg("table"), py::arg("path"));
    m.def("read_metadata", &read_metadata, py::arg("path"), py::arg("expected_rows"));
    m.def(
        "write_metadata",
        [](const std::vector<ExampleMeta>& meta, const std::filesystem::path& path) {
            write_metadata(meta, path);
        },
        py::arg("meta"), py::arg("path"));
    m.def("read_direction", &read_direction, py::arg("path"));
    m.def("write_direction", &write_direction, py::arg("direction"), py::arg("path"));
    m.def("read_caption_set", &read_caption_set, py::arg("captions_jsonl"),
          py::arg("embeddings_emb1"));
    m.def(
        "write_captions",
        [](const std::vector<CaptionRecord>& records, const std::filesystem::path& path) {
            write_captions(records, path);
        },
        py::arg("records"), py::arg("path"));

    py::class_<WhiteningStats>(m, "WhiteningStats")
        .def_readonly("mean", &WhiteningStats::mean)
        .def_readonly("std", &WhiteningStats::std)
        .def_readonly("epsilon", &WhiteningStats::epsilon);

    py::class_<PreprocessProfile>(m, "PreprocessProfile")
        .def(py::init([](ProfileKind kind, std::optional<WhiteningStats> stats) {
                 PreprocessProfile p{kind, std::move(stats)};
                 p.validate();
                 return p;
             }),
             py::arg("kind"), py::arg("stats") = std::nullopt)
        .def_readonly("kind", &PreprocessProfile::kind)
        .def_readonly("stats", &PreprocessProfile::stats);

    m.def("fit_whitening", &fit_whitening, py::arg("table"), py::arg("epsilon") = 1e-8);
    m.def("whiten", &whiten, py::arg("x"), py::arg("stats"));
    m.def("apply_profile", &apply_profile, py::arg("x"), py::arg("profile"));
    m.def("cosine", &cosine, py::arg("a"), py::arg("b"));
    m.def("slerp", &slerp, py::arg("r"), py::arg("w"), py::arg("alpha"));

    py::class_<SvmProblem>(m, "SvmProblem")
        .def(py::init([](Eigen::MatrixXd X, Eigen::VectorXi z, Eigen::VectorXd weights) {
                 SvmProblem p{std::move(X), std::move(z), std::move(weights)};
                 p.validate();
                 return p;
             }),
             py::arg("X"), py::arg("z"), py::arg("weights"));

    py::class_<SvmModel>(m, "SvmModel")
        .def_readonly("w", &SvmModel::w)
        .def_readonly("b", &SvmModel::b)
        .def_readonly("C", &SvmModel::C)
        .def_readonly("dual_objective", &SvmModel::dual_objective)
        .def_readonly("epochs_run", &SvmModel::epochs_run);

    py::class_<SvmConfig>(m, "SvmConfig")
        .def(py::init<>())
        .def_readwrite("c_grid", &SvmConfig::c_grid)
        .def_readwrite("folds", &SvmConfig::folds)
        .def_readwrite("tol", &SvmConfig::tol)
        .def_readwrite("max_epochs", &SvmConfig::max_epochs)
        .def_readwrite("min_per_class", &SvmConfig::min_per_class);

    py::class_<CvReport>(m, "CvReport")
        .def_readonly("grid", &CvReport::grid)
        .def_readonly("chosen_C", &CvReport::chosen_C)
        .def_readonly("cv_score", &CvReport::cv_score);

    m.def("balanced_weights", &balanced_weights, py::arg("z"));
    m.def(
        "fit_svm",
        [](const SvmProblem& p, double C, double tol, int max_epochs, std::uint64_t seed) {
            return fit_svm(p, C, tol, max_epochs, seed);
        },
        py::arg("problem"), py::arg("C"), py::arg("tol") = 1e-4, py::arg("max_epochs") = 1000,
        py::arg("seed") = 0);
    m.def("decision_value", &decision_value, py::arg("model"), py::arg("x"));
    m.def("primal_objective", &primal_objective, py::arg("problem"), py::arg("model"),
          py::arg("C"));
    m.def("balanced_accuracy", &balanced_accuracy, py::arg("z_true"), py::arg("z_pred"));
    m.def("cv_select", &cv_select, py::arg("problem"), py::arg("config"), py::arg("seed") = 0);

    py::class_<DistillConfig>(m, "DistillConfig")
        .def(py::init<>())
        .def_readwrite("profile", &DistillConfig::profile)
        .def_readwrite("svm", &DistillConfig::svm)
        .def_readwrite("min_count", &DistillConfig::min_count)
        .def_readwrite("seed", &DistillConfig::seed)
        .def_readwrite("threads", &DistillConfig::threads);

    py::class_<DistillRun>(m, "DistillRun")
        .def_readonly("directions", &DistillRun::directions)
        .def_readonly("skipped", &DistillRun::skipped)
        .def_readonly("profile", &DistillRun::profile)
        .def_readonly("seed", &DistillRun::seed);

    py::class_<ScoredExample>(m, "ScoredExample")
        .def_readonly("id", &ScoredExample::id)
        .def_readonly("class_id", &ScoredExample::class_id)
        .def_readonly("decision", &ScoredExample::decision)
        .def_readonly("confidence", &ScoredExample::confidence)
        .def_readonly("group", &ScoredExample::group);

    m.def(
        "distill",
        [](const EmbeddingTable& val, const std::vector<ExampleMeta>& meta,
           const DistillConfig& cfg, const EmbeddingTable* reference) {
            return distill(val, meta, cfg, reference);
        },
        py::arg("val_embeddings"), py::arg("val_meta"), py::arg("config"),
        py::arg("whitening_reference") = nullptr);
    m.def(
        "score_split",
        [](const DistillRun& run, const EmbeddingTable& emb,
           const std::vector<ExampleMeta>& meta) { return score_split(run, emb, meta); },
        py::arg("run"), py::arg("embeddings"), py::arg("meta"));

    py::enum_<RankOrder>(m, "RankOrder")
        .value("most_negative_decision", RankOrder::most_negative_decision)
        .value("lowest_confidence", RankOrder::lowest_confidence);

    m.def(
        "rank_top_k",
        [](const std::vector<ScoredExample>& scored, std::size_t k, RankOrder order) {
            return rank_top_k(scored_from_list(scored), k, order);
        },
        py::arg("scored"), py::arg("k"), py::arg("order"));
    m.def(
        "flag_incorrect",
        [](const std::vector<ScoredExample>& scored) { return flag_incorrect(scored); },
        py::arg("scored"));

    py::class_<CaptionGrammar>(m, "CaptionGrammar")
        .def(py::init<>())
        .def_readwrite("template_", &CaptionGrammar::tmpl)
        .def_readwrite("adjectives", &CaptionGrammar::adjectives)
        .def_readwrite("nouns", &CaptionGrammar::nouns)
        .def_readwrite("prepositions", &CaptionGrammar::prepositions);

    m.def("expand_grammar", &expand_grammar, py::arg("grammar"));
    m.def("caption_direction", &caption_direction, py::arg("c"), py::arg("r"));

    py::enum_<CaptionKind>(m, "CaptionKind")
        .value("reference", CaptionKind::reference)
        .value("candidate", CaptionKind::candidate);

    py::class_<CaptionRecord>(m, "CaptionRecord")
        .def(py::init([](std::string text, int class_id, CaptionKind kind) {
                 return CaptionRecord{std::move(text), class_id, kind};
             }),
             py::arg("text"), py::arg("class_id"), py::arg("kind"))
        .def_readwrite("text", &CaptionRecord::text)
        .def_readwrite("class_id", &CaptionRecord::class_id)
        .def_readwrite("kind", &CaptionRecord::kind);

    py::class_<CaptionSet>(m, "CaptionSet")
        .def(py::init([](std::vector<CaptionRecord> records, EmbeddingTable embeddings) {
                 CaptionSet set{std::move(records), std::move(embeddings)};
                 set.validate();
                 return set;
             }),
             py::arg("records"), py::arg("embeddings"))
        .def_readonly("records", &CaptionSet::records)
        .def_readonly("embeddings", &CaptionSet::embeddings);

    py::class_<CaptionScore>(m, "CaptionScore")
        .def_readonly("text", &CaptionScore::text)
        .def_readonly("score", &CaptionScore::score)
        .def_readonly("positive", &CaptionScore::positive);

    m.def("score_captions", &score_captions, py::arg("direction"), py::arg("captions"),
          py::arg("profile"), py::arg("include_bias") = true);
    m.def(
        "nearest_to_caption",
        [](const Eigen::VectorXd& caption, const std::vector<ScoredExample>& examples,
           const EmbeddingTable& embs, std::size_t k) {
            return nearest_to_caption(caption, examples, embs, k);
        },
        py::arg("caption_embedding"), py::arg("class_examples"), py::arg("class_embeddings"),
        py::arg("k"));

    py::class_<WeightAssignment>(m, "WeightAssignment")
        .def_readonly("id", &WeightAssignment::id)
        .def_readonly("weight", &WeightAssignment::weight);

    py::class_<FilterSelection>(m, "FilterSelection")
        .def_readonly("class_id", &FilterSelection::class_id)
        .def_readonly("ids", &FilterSelection::ids)
        .def_readonly("k", &FilterSelection::k);

    m.def(
        "filter_pool",
        [](const DistillRun& run, const EmbeddingTable& pool,
           const std::vector<ExampleMeta>& meta, std::size_t k) {
            return filter_pool(run, pool, meta, k);
        },
        py::arg("run"), py::arg("pool_embeddings"), py::arg("pool_meta"), py::arg("k_per_class"));
    m.def(
        "emit_upweights",
        [](const DistillRun& run, const EmbeddingTable& train,
           const std::vector<ExampleMeta>& meta, double factor) {
            return emit_upweights(run, train, meta, factor);
        },
        py::arg("run"), py::arg("train_embeddings"), py::arg("train_meta"),
        py::arg("factor") = 2.0);

    py::enum_<SynthScenario>(m, "SynthScenario")
        .value("subpopulation", SynthScenario::subpopulation)
        .value("corruption", SynthScenario::corruption);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("n_classes", &SynthConfig::n_classes)
        .def_readwrite("n_per_class", &SynthConfig::n_per_class)
        .def_readwrite("dim", &SynthConfig::dim)
        .def_readwrite("rho", &SynthConfig::rho)
        .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
        .def_readwrite("p_correct_major", &SynthConfig::p_correct_major)
        .def_readwrite("beta", &SynthConfig::beta)
        .def_readwrite("n_caption_decoys", &SynthConfig::n_caption_decoys)
        .def_readwrite("scenario", &SynthConfig::scenario)
        .def_readwrite("seed", &SynthConfig::seed)
        .def("majority_fraction", &SynthConfig::majority_fraction)
        .def("error_gap", &SynthConfig::error_gap)
        .def("minority_count", &SynthConfig::minority_count);

    py::class_<SynthSplit>(m, "SynthSplit")
        .def_readonly("embeddings", &SynthSplit::embeddings)
        .def_readonly("meta", &SynthSplit::meta);

    py::class_<SynthDataset>(m, "SynthDataset")
        .def_readonly("train", &SynthDataset::train)
        .def_readonly("val", &SynthDataset::val)
        .def_readonly("test", &SynthDataset::test)
        .def_readonly("pool", &SynthDataset::pool)
        .def_readonly("captions", &SynthDataset::captions)
        .def_readonly("minority_group", &SynthDataset::minority_group);

    m.def("generate", &generate, py::arg("config"));
    m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("dir"));

    py::enum_<Ordering>(m, "Ordering")
        .value("svm", Ordering::svm)
        .value("confidence", Ordering::confidence)
        .value("random", Ordering::random);

    py::class_<TopKCurve>(m, "TopKCurve")
        .def_readonly("ks", &TopKCurve::ks)
        .def_readonly("fractions", &TopKCurve::fractions)
        .def_readonly("ordering", &TopKCurve::ordering);

    m.def(
        "fraction_top_k",
        [](const std::vector<ScoredExample>& scored, const std::string& minority,
           const std::vector<std::size_t>& ks, Ordering ordering, std::uint64_t seed) {
            return fraction_top_k(scored, minority, ks, ordering, seed);
        },
        py::arg("scored"), py::arg("minority_group"), py::arg("ks"), py::arg("ordering"),
        py::arg("seed") = 0);
    m.def(
        "flagged_membership",
        [](const std::vector<ScoredExample>& scored, const std::string& minority) {
            return flagged_membership(scored, minority);
        },
        py::arg("scored"), py::arg("minority_group"));

    py::class_<CorrelationReport>(m, "CorrelationReport")
        .def_readonly("pearson", &CorrelationReport::pearson)
        .def_readonly("n", &CorrelationReport::n);

    m.def(
        "pearson",
        [](const std::vector<double>& xs, const std::vector<double>& ys) {
            return pearson(xs, ys);
        },
        py::arg("xs"), py::arg("ys"));
}
