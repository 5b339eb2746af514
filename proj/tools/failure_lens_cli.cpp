// failure_lens: distill a classifier's failure modes as directions in an
// embedding space, rank and caption them, and drive data interventions.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "failure_lens/captioner.hpp"
#include "failure_lens/core_data.hpp"
#include "failure_lens/distiller.hpp"
#include "failure_lens/errors.hpp"
#include "failure_lens/evaluate.hpp"
#include "failure_lens/geometry.hpp"
#include "failure_lens/intervene.hpp"
#include "failure_lens/linear_svm.hpp"
#include "failure_lens/synthbench.hpp"
#include "failure_lens/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNotEnoughData = 3;

struct RunConfig {
    fs::path config_dir;  // resolves relative paths in the config file

    std::optional<fs::path> embeddings, metadata;
    std::optional<fs::path> reference_embeddings;
    std::optional<fs::path> train_embeddings, train_metadata;
    std::optional<fs::path> pool_embeddings, pool_metadata;
    std::optional<fs::path> captions, caption_embeddings;
    std::optional<fs::path> grammar;
    fs::path output_dir = "out";
    std::optional<fs::path> directions_dir;  // defaults to <output_dir>/directions

    flens::ProfileKind profile = flens::ProfileKind::whiten_norm;
    flens::SvmConfig svm;
    int min_count = 5;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    std::vector<std::size_t> k_values;
    std::size_t k_per_class = 10;
    double upweight_factor = 2.0;
    double alpha = 0.1;
    std::string minority_group = "minority";
    bool caption_bias = true;

    flens::SynthConfig synth;
};

fs::path resolve(const RunConfig& cfg, const fs::path& p) {
    return p.is_absolute() ? p : cfg.config_dir / p;
}

void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p))
        flens::fail(flens::Errc::io_failure,
                    std::string(what) + " file does not exist: " + p.string());
}

RunConfig load_config(const fs::path& path) {
    require_exists(path, "config");
    std::ifstream in(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        flens::fail(flens::Errc::invalid_argument, path.string() + ": " + e.what());
    }

    RunConfig cfg;
    cfg.config_dir = path.parent_path();
    const auto get_path = [&](const char* key) -> std::optional<fs::path> {
        if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
        return fs::path(doc[key].get<std::string>());
    };
    cfg.embeddings = get_path("embeddings");
    cfg.metadata = get_path("metadata");
    cfg.reference_embeddings = get_path("reference_embeddings");
    cfg.train_embeddings = get_path("train_embeddings");
    cfg.train_metadata = get_path("train_metadata");
    cfg.pool_embeddings = get_path("pool_embeddings");
    cfg.pool_metadata = get_path("pool_metadata");
    cfg.captions = get_path("captions");
    cfg.caption_embeddings = get_path("caption_embeddings");
    cfg.grammar = get_path("grammar");
    cfg.directions_dir = get_path("directions_dir");
    if (const auto out = get_path("output_dir")) cfg.output_dir = *out;

    if (doc.contains("profile")) cfg.profile = flens::profile_kind_from_name(doc["profile"]);
    if (doc.contains("svm")) {
        const json& svm = doc["svm"];
        if (svm.contains("grid")) cfg.svm.c_grid = svm["grid"].get<std::vector<double>>();
        if (svm.contains("folds")) cfg.svm.folds = svm["folds"].get<int>();
        if (svm.contains("tol")) cfg.svm.tol = svm["tol"].get<double>();
        if (svm.contains("max_epochs")) cfg.svm.max_epochs = svm["max_epochs"].get<int>();
    }
    if (doc.contains("min_count")) cfg.min_count = doc["min_count"].get<int>();
    if (doc.contains("seed")) {
        cfg.seed = doc["seed"].get<std::uint64_t>();
        cfg.seed_set = true;
    }
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
    if (doc.contains("k_values")) cfg.k_values = doc["k_values"].get<std::vector<std::size_t>>();
    if (doc.contains("k_per_class")) cfg.k_per_class = doc["k_per_class"].get<std::size_t>();
    if (doc.contains("upweight_factor")) cfg.upweight_factor = doc["upweight_factor"].get<double>();
    if (doc.contains("alpha")) cfg.alpha = doc["alpha"].get<double>();
    if (doc.contains("minority_group")) cfg.minority_group = doc["minority_group"].get<std::string>();
    if (doc.contains("caption_bias")) cfg.caption_bias = doc["caption_bias"].get<bool>();

    if (doc.contains("synth")) {
        const json& synth = doc["synth"];
        if (synth.contains("n_classes")) cfg.synth.n_classes = synth["n_classes"].get<int>();
        if (synth.contains("n_per_class")) cfg.synth.n_per_class = synth["n_per_class"].get<int>();
        if (synth.contains("dim")) cfg.synth.dim = synth["dim"].get<int>();
        if (synth.contains("rho")) cfg.synth.rho = synth["rho"].get<double>();
        if (synth.contains("noise_sigma")) cfg.synth.noise_sigma = synth["noise_sigma"].get<double>();
        if (synth.contains("p_correct_major"))
            cfg.synth.p_correct_major = synth["p_correct_major"].get<double>();
        if (synth.contains("beta")) cfg.synth.beta = synth["beta"].get<double>();
        if (synth.contains("n_caption_decoys"))
            cfg.synth.n_caption_decoys = synth["n_caption_decoys"].get<int>();
        if (synth.contains("scenario")) {
            const std::string s = synth["scenario"].get<std::string>();
            if (s == "subpopulation") cfg.synth.scenario = flens::SynthScenario::subpopulation;
            else if (s == "corruption") cfg.synth.scenario = flens::SynthScenario::corruption;
            else flens::fail(flens::Errc::invalid_argument, "unknown scenario '" + s + "'");
        }
    }

    if (!cfg.seed_set)
        flens::fail(flens::Errc::invalid_argument, "config must set a seed");
    cfg.synth.seed = cfg.seed;
    return cfg;
}

// ---- manifest -------------------------------------------------------------

class Manifest {
public:
    Manifest(fs::path output_dir, std::string subcommand, std::uint64_t seed)
        : output_dir_(std::move(output_dir)), subcommand_(std::move(subcommand)), seed_(seed) {}

    void add(const fs::path& file) { files_.push_back(file); }

    void write() const {
        json doc;
        doc["subcommand"] = subcommand_;
        doc["seed"] = seed_;
        doc["hash"] = "fnv1a64";
        std::vector<fs::path> sorted = files_;
        std::sort(sorted.begin(), sorted.end());
        json artifacts = json::array();
        for (const auto& file : sorted) {
            json entry;
            entry["path"] = fs::relative(file, output_dir_).generic_string();
            entry["bytes"] = static_cast<std::uint64_t>(fs::file_size(file));
            entry["fnv1a64"] = flens::fnv1a64_file_hex(file);
            artifacts.push_back(std::move(entry));
        }
        doc["artifacts"] = std::move(artifacts);
        std::ofstream out(output_dir_ / "manifest.json", std::ios::trunc);
        out << doc.dump(2) << "\n";
    }

private:
    fs::path output_dir_;
    std::string subcommand_;
    std::uint64_t seed_;
    std::vector<fs::path> files_;
};

// ---- shared loading helpers ------------------------------------------------

struct LoadedSplit {
    flens::EmbeddingTable embeddings;
    std::vector<flens::ExampleMeta> meta;
};

LoadedSplit load_split(const RunConfig& cfg, const std::optional<fs::path>& emb,
                       const std::optional<fs::path>& meta, const char* what) {
    if (!emb)
        flens::fail(flens::Errc::invalid_argument,
                    std::string("config is missing ") + what + " embeddings path");
    if (!meta)
        flens::fail(flens::Errc::invalid_argument,
                    std::string("config is missing ") + what + " metadata path");
    const fs::path emb_path = resolve(cfg, *emb);
    const fs::path meta_path = resolve(cfg, *meta);
    require_exists(emb_path, what);
    require_exists(meta_path, what);
    LoadedSplit split;
    split.embeddings = flens::read_embeddings(emb_path);
    split.meta = flens::read_metadata(meta_path, split.embeddings.rows());
    return split;
}

fs::path directions_dir(const RunConfig& cfg) {
    return cfg.directions_dir ? resolve(cfg, *cfg.directions_dir) : cfg.output_dir / "directions";
}

flens::DistillRun load_run(const RunConfig& cfg) {
    const fs::path dir = directions_dir(cfg);
    require_exists(dir, "directions");
    flens::DistillRun run;
    run.seed = cfg.seed;
    run.profile = flens::profile_from_json_file(dir / "profile.json");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("class_", 0) == 0 && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        flens::ClassDirection dir_doc = flens::read_direction(file);
        if (dir_doc.profile != run.profile.kind)
            flens::fail(flens::Errc::invalid_argument,
                        file.string() + " was fitted under a different profile");
        run.directions.emplace(dir_doc.class_id, std::move(dir_doc));
    }
    if (run.directions.empty())
        flens::fail(flens::Errc::not_enough_data, "no direction files in " + dir.string());
    return run;
}

void write_scored_csv(std::span<const flens::ScoredExample> scored, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) flens::fail(flens::Errc::io_failure, "cannot open for write: " + path.string());
    out << "id,class,decision_value,confidence,group\n";
    for (const auto& s : scored)
        out << s.id << "," << s.class_id << "," << flens::format_number(s.decision) << ","
            << flens::format_number(s.confidence) << "," << s.group.value_or("") << "\n";
}

std::map<int, std::vector<std::size_t>> indices_by_class(
    std::span<const flens::ExampleMeta> meta) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < meta.size(); ++i) by_class[meta[i].class_id].push_back(i);
    return by_class;
}

// ---- subcommands -----------------------------------------------------------

int cmd_fit(const RunConfig& cfg) {
    const LoadedSplit val = load_split(cfg, cfg.embeddings, cfg.metadata, "validation");

    std::optional<flens::EmbeddingTable> reference;
    if (cfg.reference_embeddings) {
        const fs::path ref_path = resolve(cfg, *cfg.reference_embeddings);
        require_exists(ref_path, "reference");
        reference = flens::read_embeddings(ref_path);
    }

    flens::DistillConfig distill_cfg;
    distill_cfg.profile = cfg.profile;
    distill_cfg.svm = cfg.svm;
    distill_cfg.min_count = cfg.min_count;
    distill_cfg.seed = cfg.seed;
    distill_cfg.threads = cfg.threads;

    const flens::DistillRun run = flens::distill(val.embeddings, val.meta, distill_cfg,
                                                 reference ? &*reference : nullptr);

    const fs::path dir = cfg.output_dir / "directions";
    fs::create_directories(dir);
    Manifest manifest(cfg.output_dir, "fit", cfg.seed);
    for (const auto& [cls, direction] : run.directions) {
        const fs::path file = dir / ("class_" + std::to_string(cls) + ".json");
        flens::write_direction(direction, file);
        manifest.add(file);
    }
    flens::profile_to_json_file(run.profile, dir / "profile.json");
    manifest.add(dir / "profile.json");

    json skipped = json::array();
    for (const auto& [cls, reason] : run.skipped)
        skipped.push_back({{"class", cls}, {"reason", reason}});
    {
        std::ofstream out(cfg.output_dir / "skipped.json", std::ios::trunc);
        out << skipped.dump(2) << "\n";
    }
    manifest.add(cfg.output_dir / "skipped.json");
    manifest.write();

    std::cout << "fitted " << run.directions.size() << " classes, skipped " << run.skipped.size()
              << "\n";
    return run.directions.empty() ? kExitNotEnoughData : kExitOk;
}

int cmd_score(const RunConfig& cfg) {
    const flens::DistillRun run = load_run(cfg);
    const LoadedSplit split = load_split(cfg, cfg.embeddings, cfg.metadata, "input");
    const auto scored = flens::score_split(run, split.embeddings, split.meta);
    fs::create_directories(cfg.output_dir);
    const fs::path file = cfg.output_dir / "scored.csv";
    write_scored_csv(scored, file);
    Manifest manifest(cfg.output_dir, "score", cfg.seed);
    manifest.add(file);
    manifest.write();
    std::cout << "scored " << scored.size() << " examples -> " << file.string() << "\n";
    return kExitOk;
}

int cmd_rank(const RunConfig& cfg, const std::string& order, std::size_t k) {
    const flens::DistillRun run = load_run(cfg);
    const LoadedSplit split = load_split(cfg, cfg.embeddings, cfg.metadata, "input");
    const auto scored = flens::score_split(run, split.embeddings, split.meta);
    const flens::RankOrder rank_order = order == "confidence"
                                            ? flens::RankOrder::lowest_confidence
                                            : flens::RankOrder::most_negative_decision;

    std::map<int, std::vector<flens::ScoredExample>> by_class;
    for (const auto& s : scored) by_class[s.class_id].push_back(s);

    fs::create_directories(cfg.output_dir);
    const fs::path file = cfg.output_dir / ("ranked_" + order + ".csv");
    std::ofstream out(file, std::ios::trunc);
    out << "class,rank,id\n";
    for (const auto& [cls, examples] : by_class) {
        const std::size_t take = std::min(k, examples.size());
        const auto ids = flens::rank_top_k(examples, take, rank_order);
        for (std::size_t i = 0; i < ids.size(); ++i)
            out << cls << "," << (i + 1) << "," << ids[i] << "\n";
    }
    out.close();
    Manifest manifest(cfg.output_dir, "rank", cfg.seed);
    manifest.add(file);
    manifest.write();
    std::cout << "ranked top " << k << " per class by " << order << " -> " << file.string()
              << "\n";
    return kExitOk;
}

int cmd_caption(const RunConfig& cfg) {
    const flens::DistillRun run = load_run(cfg);
    if (!cfg.captions || !cfg.caption_embeddings)
        flens::fail(flens::Errc::invalid_argument,
                    "config must set captions and caption_embeddings");
    const fs::path cap_path = resolve(cfg, *cfg.captions);
    const fs::path emb_path = resolve(cfg, *cfg.caption_embeddings);
    require_exists(cap_path, "captions");
    require_exists(emb_path, "caption embeddings");
    const flens::CaptionSet captions = flens::read_caption_set(cap_path, emb_path);

    fs::create_directories(cfg.output_dir);
    const fs::path file = cfg.output_dir / "caption_scores.csv";
    std::ofstream out(file, std::ios::trunc);
    out << "class,text,score\n";
    std::size_t failed_classes = 0;
    for (const auto& [cls, direction] : run.directions) {
        try {
            const auto scores =
                flens::score_captions(direction, captions, run.profile, cfg.caption_bias);
            for (const auto& score : scores)
                out << cls << ",\"" << score.text << "\"," << flens::format_number(score.score)
                    << "\n";
        } catch (const flens::Error& e) {
            ++failed_classes;
            flens::log_line(flens::LogLevel::warn,
                            "class " + std::to_string(cls) + ": " + e.what());
        }
    }
    if (failed_classes == run.directions.size())
        flens::fail(flens::Errc::invalid_argument, "no class could be captioned");
    out.close();
    Manifest manifest(cfg.output_dir, "caption", cfg.seed);
    manifest.add(file);
    manifest.write();
    std::cout << "caption scores -> " << file.string() << "\n";
    return kExitOk;
}

int cmd_slerp(const RunConfig& cfg, double alpha) {
    const flens::DistillRun run = load_run(cfg);
    if (!cfg.captions || !cfg.caption_embeddings)
        flens::fail(flens::Errc::invalid_argument,
                    "config must set captions and caption_embeddings");
    const flens::CaptionSet captions = flens::read_caption_set(
        resolve(cfg, *cfg.captions), resolve(cfg, *cfg.caption_embeddings));

    // One hard and one easy vector per fitted class:
    // hard rotates the reference toward +w_hat, easy toward -w_hat.
    flens::EmbeddingTable vectors;
    const Eigen::Index dim = run.directions.begin()->second.w_hat.size();
    vectors.data.resize(static_cast<Eigen::Index>(run.directions.size()) * 2, dim);
    std::vector<flens::CaptionRecord> rows;
    Eigen::Index row = 0;
    for (const auto& [cls, direction] : run.directions) {
        try {
            const Eigen::Index ref_row = captions.reference_row(cls);
            Eigen::VectorXd r = captions.embeddings.row(ref_row);
            const double norm = r.norm();
            if (norm < 1e-12)
                flens::fail(flens::Errc::zero_norm, "reference caption embedding has zero norm");
            r /= norm;
            const Eigen::VectorXd hard = flens::slerp(r, direction.w_hat, alpha);
            const Eigen::VectorXd easy = flens::slerp(r, (-direction.w_hat).eval(), alpha);
            vectors.data.row(row) = hard.cast<float>();
            rows.push_back({"hard", cls, flens::CaptionKind::candidate});
            ++row;
            vectors.data.row(row) = easy.cast<float>();
            rows.push_back({"easy", cls, flens::CaptionKind::candidate});
            ++row;
        } catch (const flens::Error& e) {
            flens::log_line(flens::LogLevel::warn,
                            "class " + std::to_string(cls) + ": " + e.what());
        }
    }
    if (row == 0) flens::fail(flens::Errc::invalid_argument, "no class could be decoded");
    vectors.data.conservativeResize(row, dim);

    fs::create_directories(cfg.output_dir);
    const fs::path emb_file = cfg.output_dir / "slerp_vectors.emb1";
    const fs::path idx_file = cfg.output_dir / "slerp_vectors.jsonl";
    flens::write_embeddings(vectors, emb_file);
    {
        std::ofstream out(idx_file, std::ios::trunc);
        Eigen::Index i = 0;
        for (const auto& rec : rows) {
            json doc;
            doc["row"] = i++;
            doc["class"] = rec.class_id;
            doc["kind"] = rec.text;
            doc["alpha"] = alpha;
            out << doc.dump() << "\n";
        }
    }
    Manifest manifest(cfg.output_dir, "slerp", cfg.seed);
    manifest.add(emb_file);
    manifest.add(idx_file);
    manifest.write();
    std::cout << "slerp vectors (alpha=" << flens::format_number(alpha) << ") -> "
              << emb_file.string() << "\n";
    return kExitOk;
}

int cmd_intervene(const RunConfig& cfg, std::size_t k, double factor) {
    const flens::DistillRun run = load_run(cfg);
    const bool have_pool = cfg.pool_embeddings && cfg.pool_metadata;
    const bool have_train = cfg.train_embeddings && cfg.train_metadata;
    if (!have_pool && !have_train)
        flens::fail(flens::Errc::invalid_argument,
                    "config must set pool_* (filtering) or train_* (upweighting) paths");

    fs::create_directories(cfg.output_dir);
    Manifest manifest(cfg.output_dir, "intervene", cfg.seed);

    if (have_pool) {
        const LoadedSplit pool = load_split(cfg, cfg.pool_embeddings, cfg.pool_metadata, "pool");
        const auto selections = flens::filter_pool(run, pool.embeddings, pool.meta, k);
        for (const auto& sel : selections) {
            json doc;
            doc["class"] = sel.class_id;
            doc["k"] = sel.k;
            doc["ids"] = sel.ids;
            const fs::path file =
                cfg.output_dir / ("selection_class_" + std::to_string(sel.class_id) + ".json");
            std::ofstream out(file, std::ios::trunc);
            out << doc.dump(2) << "\n";
            out.close();
            manifest.add(file);
        }
        std::cout << "filter selections for " << selections.size() << " classes\n";
    }
    if (have_train) {
        const LoadedSplit train =
            load_split(cfg, cfg.train_embeddings, cfg.train_metadata, "train");
        const auto weights = flens::emit_upweights(run, train.embeddings, train.meta, factor);
        const fs::path file = cfg.output_dir / "weights.csv";
        std::ofstream out(file, std::ios::trunc);
        out << "id,weight\n";
        for (const auto& w : weights)
            out << w.id << "," << flens::format_number(w.weight) << "\n";
        out.close();
        manifest.add(file);
        std::cout << "upweights for " << weights.size() << " training examples\n";
    }
    manifest.write();
    return kExitOk;
}

int cmd_bench(const RunConfig& cfg, const std::vector<double>& rho_grid, int n_seeds) {
    fs::create_directories(cfg.output_dir);
    Manifest manifest(cfg.output_dir, "bench", cfg.seed);
    if (rho_grid.empty()) {
        const flens::SynthDataset dataset = flens::generate(cfg.synth);
        const fs::path dir = cfg.output_dir / "dataset";
        flens::write_dataset(dataset, dir);
        for (const auto& entry : fs::directory_iterator(dir)) manifest.add(entry.path());
        manifest.write();
        std::cout << "synthetic dataset (rho=" << flens::format_number(cfg.synth.rho)
                  << ") -> " << dir.string() << "\n";
        return kExitOk;
    }

    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    const flens::SweepReport report =
        flens::sweep(cfg.synth, rho_grid, seeds, cfg.svm, cfg.profile, cfg.threads);
    const fs::path file = cfg.output_dir / "sweep.csv";
    flens::write_sweep_csv(report, file);
    manifest.add(file);
    manifest.write();
    std::cout << report.rows.size() << " sweep rows -> " << file.string() << "\n";
    return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
    const flens::DistillRun run = load_run(cfg);
    const LoadedSplit split = load_split(cfg, cfg.embeddings, cfg.metadata, "input");
    const auto scored = flens::score_split(run, split.embeddings, split.meta);

    fs::create_directories(cfg.output_dir);
    Manifest manifest(cfg.output_dir, "report", cfg.seed);

    std::map<int, std::vector<flens::ScoredExample>> by_class;
    std::map<int, std::vector<std::size_t>> rows_by_class;
    {
        std::map<std::string, std::size_t> row_of_id;
        for (std::size_t i = 0; i < split.meta.size(); ++i) row_of_id[split.meta[i].id] = i;
        for (const auto& s : scored) {
            by_class[s.class_id].push_back(s);
            rows_by_class[s.class_id].push_back(row_of_id.at(s.id));
        }
    }

    // Top-k minority fraction curves, per class plus the across-class mean.
    const fs::path topk_file = cfg.output_dir / "topk_minority.csv";
    {
        std::ofstream out(topk_file, std::ios::trunc);
        out << "class,ordering,k,fraction\n";
        const flens::Ordering orderings[3] = {flens::Ordering::svm, flens::Ordering::confidence,
                                              flens::Ordering::random};
        std::map<std::pair<std::string, std::size_t>, std::pair<double, int>> mean_acc;
        for (const auto& [cls, examples] : by_class) {
            std::vector<std::size_t> ks;
            for (const std::size_t k : cfg.k_values)
                if (k >= 1 && k <= examples.size()) ks.push_back(k);
            if (ks.empty()) continue;
            for (const auto ordering : orderings) {
                const auto curve = flens::fraction_top_k(examples, cfg.minority_group, ks,
                                                         ordering, cfg.seed);
                for (std::size_t i = 0; i < curve.ks.size(); ++i) {
                    out << cls << "," << flens::ordering_name(ordering) << "," << curve.ks[i]
                        << "," << flens::format_number(curve.fractions[i]) << "\n";
                    auto& acc = mean_acc[{flens::ordering_name(ordering), curve.ks[i]}];
                    acc.first += curve.fractions[i];
                    acc.second += 1;
                }
            }
        }
        for (const auto& [key, acc] : mean_acc)
            out << "mean," << key.first << "," << key.second << ","
                << flens::format_number(acc.first / acc.second) << "\n";
    }
    manifest.add(topk_file);

    // Flagged-set minority membership per class.
    const fs::path flagged_file = cfg.output_dir / "flagged_membership.csv";
    {
        std::ofstream out(flagged_file, std::ios::trunc);
        out << "class,n_flagged,minority_fraction\n";
        for (const auto& [cls, examples] : by_class) {
            const auto frac = flens::flagged_membership(examples, cfg.minority_group);
            const std::size_t n_flagged = flens::flag_incorrect(examples).size();
            out << cls << "," << n_flagged << ","
                << (frac ? flens::format_number(*frac) : std::string()) << "\n";
        }
    }
    manifest.add(flagged_file);

    // Caption-proximity subgroup accuracy, when a caption set is supplied.
    if (cfg.captions && cfg.caption_embeddings) {
        const flens::CaptionSet captions = flens::read_caption_set(
            resolve(cfg, *cfg.captions), resolve(cfg, *cfg.caption_embeddings));
        const fs::path cap_file = cfg.output_dir / "caption_accuracy.csv";
        std::ofstream out(cap_file, std::ios::trunc);
        out << "class,caption,k,accuracy\n";
        for (const auto& [cls, direction] : run.directions) {
            const auto it = by_class.find(cls);
            if (it == by_class.end()) continue;
            std::vector<flens::CaptionScore> scores;
            try {
                scores = flens::score_captions(direction, captions, run.profile, cfg.caption_bias);
            } catch (const flens::Error& e) {
                flens::log_line(flens::LogLevel::warn,
                                "class " + std::to_string(cls) + ": " + e.what());
                continue;
            }
            if (scores.size() < 2) continue;
            const auto caption_row = [&](const std::string& text) {
                for (const Eigen::Index row : captions.candidate_rows(cls))
                    if (captions.records[static_cast<std::size_t>(row)].text == text) return row;
                flens::fail(flens::Errc::missing_reference, "caption row for '" + text + "'");
            };
            const Eigen::VectorXd pos = captions.embeddings.row(caption_row(scores.front().text));
            const Eigen::VectorXd neg = captions.embeddings.row(caption_row(scores.back().text));

            flens::EmbeddingTable class_embs;
            class_embs.data.resize(static_cast<Eigen::Index>(it->second.size()),
                                   split.embeddings.dim());
            std::vector<int> correct;
            for (std::size_t i = 0; i < it->second.size(); ++i) {
                const std::size_t row = rows_by_class.at(cls)[i];
                class_embs.data.row(static_cast<Eigen::Index>(i)) =
                    split.embeddings.data.row(static_cast<Eigen::Index>(row));
                correct.push_back(flens::correctness_label(split.meta[row]));
            }
            std::vector<std::size_t> ks;
            for (const std::size_t k : cfg.k_values)
                if (k >= 1 && k <= it->second.size()) ks.push_back(k);
            if (ks.empty()) continue;
            const auto curves = flens::caption_subgroup_accuracy(pos, neg, it->second, class_embs,
                                                                 correct, ks);
            for (std::size_t i = 0; i < curves.ks.size(); ++i) {
                out << cls << ",positive," << curves.ks[i] << ","
                    << flens::format_number(curves.positive[i]) << "\n";
                out << cls << ",negative," << curves.ks[i] << ","
                    << flens::format_number(curves.negative[i]) << "\n";
            }
        }
        out.close();
        manifest.add(cap_file);
    }

    manifest.write();
    std::cout << "report CSVs -> " << cfg.output_dir.string() << "\n";
    return kExitOk;
}

std::vector<double> parse_rho_grid(const std::string& text) {
    // "0.1..0.9" (step 0.1) or a comma list "0.1,0.3,0.5".
    std::vector<double> grid;
    if (text.empty()) return grid;
    const auto range_pos = text.find("..");
    if (range_pos != std::string::npos) {
        const double lo = std::stod(text.substr(0, range_pos));
        const double hi = std::stod(text.substr(range_pos + 2));
        for (double rho = lo; rho <= hi + 1e-9; rho += 0.1)
            grid.push_back(std::round(rho * 10.0) / 10.0);
        return grid;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string token =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!token.empty()) grid.push_back(std::stod(token));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return grid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distill model failure modes as directions in embedding space"};
    app.require_subcommand(1);

    std::string config_path;
    std::string profile_override;
    int threads_override = -1;

    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--profile", profile_override, "whiten_norm|norm_only")
        ->check(CLI::IsMember({"whiten_norm", "norm_only"}));
    app.add_option("--threads", threads_override, "worker threads (0 = all cores)");

    auto* fit = app.add_subcommand("fit", "fit per-class failure directions");
    auto* score = app.add_subcommand("score", "decision values for a split");
    auto* rank = app.add_subcommand("rank", "top-k ids per class");
    std::string rank_order = "svm";
    std::size_t rank_k = 0;
    rank->add_option("--order", rank_order, "svm|confidence")
        ->check(CLI::IsMember({"svm", "confidence"}));
    rank->add_option("--k", rank_k, "how many ids per class");
    auto* caption = app.add_subcommand("caption", "score candidate captions");
    auto* slerp_cmd = app.add_subcommand("slerp", "decode directions as interpolated vectors");
    double alpha_override = -1.0;
    slerp_cmd->add_option("--alpha", alpha_override, "rotation fraction in [0,1]");
    auto* intervene = app.add_subcommand("intervene", "filter selections and upweights");
    std::size_t intervene_k = 0;
    double factor_override = -1.0;
    intervene->add_option("--k", intervene_k, "pool examples per class");
    intervene->add_option("--factor", factor_override, "upweight factor");
    auto* bench = app.add_subcommand("bench", "synthetic planted-shift benchmark");
    std::string rho_grid_text;
    int bench_seeds = 1;
    bench->add_option("--rho-grid", rho_grid_text, "e.g. 0.1..0.9 or 0.2,0.5,0.8");
    bench->add_option("--seeds", bench_seeds, "seeds per rho (seed, seed+1, ...)");
    auto* report = app.add_subcommand("report", "evaluation metric CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!profile_override.empty())
            cfg.profile = flens::profile_kind_from_name(profile_override);
        if (threads_override >= 0) cfg.threads = threads_override;
        if (cfg.k_values.empty()) cfg.k_values = {1, 2, 5, 10, 20, 50, 100};
        fs::create_directories(cfg.output_dir);

        if (fit->parsed()) return cmd_fit(cfg);
        if (score->parsed()) return cmd_score(cfg);
        if (rank->parsed()) return cmd_rank(cfg, rank_order, rank_k > 0 ? rank_k : cfg.k_per_class);
        if (caption->parsed()) return cmd_caption(cfg);
        if (slerp_cmd->parsed())
            return cmd_slerp(cfg, alpha_override >= 0.0 ? alpha_override : cfg.alpha);
        if (intervene->parsed())
            return cmd_intervene(cfg, intervene_k > 0 ? intervene_k : cfg.k_per_class,
                                 factor_override > 0.0 ? factor_override : cfg.upweight_factor);
        if (bench->parsed()) return cmd_bench(cfg, parse_rho_grid(rho_grid_text), bench_seeds);
        if (report->parsed()) return cmd_report(cfg);
        return kExitValidation;
    } catch (const flens::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == flens::Errc::not_enough_data ? kExitNotEnoughData : kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
