#include <doctest.h>

#include <set>

#include "failure_lens/errors.hpp"
#include "failure_lens/intervene.hpp"
#include "failure_lens/synthbench.hpp"
#include "test_support.hpp"

using namespace flens;

namespace {

// A run with one hand-built direction: decision = x[0] (norm_only space).
DistillRun axis_run() {
    DistillRun run;
    run.profile.kind = ProfileKind::norm_only;
    ClassDirection dir;
    dir.class_id = 0;
    dir.w = Eigen::Vector2d(1, 0);
    dir.w_hat = dir.w;
    dir.b = 0.0;
    dir.cv_score = 0.9;
    dir.C = 1.0;
    dir.n_correct = 10;
    dir.n_incorrect = 10;
    dir.profile = ProfileKind::norm_only;
    run.directions.emplace(0, std::move(dir));
    return run;
}

// Points on the unit circle with decision value sin-spread across +-1.
struct Pool {
    EmbeddingTable embeddings;
    std::vector<ExampleMeta> meta;
};

Pool circle_pool(const std::vector<std::pair<std::string, double>>& id_and_decision) {
    Pool pool;
    pool.embeddings.data.resize(static_cast<Eigen::Index>(id_and_decision.size()), 2);
    for (std::size_t i = 0; i < id_and_decision.size(); ++i) {
        const double x = id_and_decision[i].second;
        const double y = std::sqrt(std::max(0.0, 1.0 - x * x));
        pool.embeddings.data(static_cast<Eigen::Index>(i), 0) = static_cast<float>(x);
        pool.embeddings.data(static_cast<Eigen::Index>(i), 1) = static_cast<float>(y);
        ExampleMeta m;
        m.id = id_and_decision[i].first;
        m.class_id = 0;
        m.pred = 0;
        m.confidence = 0.5;
        pool.meta.push_back(std::move(m));
    }
    return pool;
}

}  // namespace

TEST_CASE("filter_pool picks the k most negative per class") {
    const DistillRun run = axis_run();
    const Pool pool = circle_pool(
        {{"p0", -0.9}, {"p1", -0.5}, {"p2", 0.0}, {"p3", 0.4}, {"p4", 0.8}});
    const auto selections = filter_pool(run, pool.embeddings, pool.meta, 2);
    REQUIRE(selections.size() == 1);
    CHECK(selections[0].class_id == 0);
    CHECK(selections[0].k == 2);
    CHECK(selections[0].ids == std::vector<std::string>{"p0", "p1"});
}

TEST_CASE("filter_pool short class returns the whole pool") {
    const DistillRun run = axis_run();
    const Pool pool = circle_pool({{"p0", -0.9}, {"p1", 0.4}});
    const auto selections = filter_pool(run, pool.embeddings, pool.meta, 10);
    REQUIRE(selections.size() == 1);
    CHECK(selections[0].ids.size() == 2);
    CHECK(selections[0].k == 10);
}

TEST_CASE("filter_pool selections are prefix-nested in k") {
    const DistillRun run = axis_run();
    const Pool pool = circle_pool({{"p0", -0.9},
                                   {"p1", -0.7},
                                   {"p2", -0.3},
                                   {"p3", -0.1},
                                   {"p4", 0.2},
                                   {"p5", 0.6}});
    std::vector<std::string> previous;
    for (std::size_t k = 1; k <= 6; ++k) {
        const auto sel = filter_pool(run, pool.embeddings, pool.meta, k);
        REQUIRE(sel.size() == 1);
        REQUIRE(sel[0].ids.size() == k);
        for (std::size_t i = 0; i < previous.size(); ++i) CHECK(sel[0].ids[i] == previous[i]);
        previous = sel[0].ids;
    }
}

TEST_CASE("filter_pool concentrates the planted minority") {
    SynthConfig synth;
    synth.rho = 0.8;
    synth.seed = 41;
    const SynthDataset data = generate(synth);
    DistillConfig cfg;
    cfg.seed = 41;
    cfg.threads = 1;
    const DistillRun run = distill(data.val.embeddings, data.val.meta, cfg);
    REQUIRE(!run.directions.empty());

    const int k = synth.minority_count();
    const auto selections =
        filter_pool(run, data.pool.embeddings, data.pool.meta, static_cast<std::size_t>(k));
    const double base_rate = static_cast<double>(synth.minority_count()) / synth.n_per_class;
    std::map<std::string, const ExampleMeta*> by_id;
    for (const auto& m : data.pool.meta) by_id[m.id] = &m;
    for (const auto& sel : selections) {
        int minority = 0;
        for (const auto& id : sel.ids)
            if (by_id.at(id)->group == data.minority_group) ++minority;
        const double frac = static_cast<double>(minority) / static_cast<double>(sel.ids.size());
        CHECK(frac >= 2.0 * base_rate);
    }
}

TEST_CASE("emit_upweights assigns factor to flagged examples only") {
    const DistillRun run = axis_run();
    const Pool train = circle_pool({{"a", -1.0}, {"b", 1.0}});
    const auto weights = emit_upweights(run, train.embeddings, train.meta, 2.0);
    REQUIRE(weights.size() == 2);
    CHECK(weights[0].id == "a");
    CHECK(weights[0].weight == 2.0);
    CHECK(weights[1].id == "b");
    CHECK(weights[1].weight == 1.0);
}

TEST_CASE("emit_upweights with factor 1 is a no-op") {
    const DistillRun run = axis_run();
    const Pool train = circle_pool({{"a", -1.0}, {"b", 0.5}, {"c", -0.2}});
    for (const auto& w : emit_upweights(run, train.embeddings, train.meta, 1.0))
        CHECK(w.weight == 1.0);
}

TEST_CASE("emit_upweights rejects nonpositive factors") {
    const DistillRun run = axis_run();
    const Pool train = circle_pool({{"a", -1.0}});
    CHECK_THROWS_AS(emit_upweights(run, train.embeddings, train.meta, 0.0), Error);
    CHECK_THROWS_AS(emit_upweights(run, train.embeddings, train.meta, -2.0), Error);
}

TEST_CASE("emit_upweights covers every id once with weights in {1, factor}") {
    SynthConfig synth;
    synth.rho = 0.7;
    synth.seed = 43;
    const SynthDataset data = generate(synth);
    DistillConfig cfg;
    cfg.seed = 43;
    cfg.threads = 1;
    const DistillRun run = distill(data.val.embeddings, data.val.meta, cfg);

    const double factor = 2.0;
    const auto weights = emit_upweights(run, data.train.embeddings, data.train.meta, factor);
    CHECK(weights.size() == data.train.meta.size());
    std::set<std::string> ids;
    std::size_t flagged_count = 0;
    for (const auto& w : weights) {
        CHECK(ids.insert(w.id).second);
        CHECK((w.weight == 1.0 || w.weight == factor));
        if (w.weight == factor) ++flagged_count;
    }
    const auto scored = score_split(run, data.train.embeddings, data.train.meta);
    CHECK(flagged_count == flag_incorrect(scored).size());
}
