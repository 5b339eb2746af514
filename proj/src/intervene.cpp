#include "failure_lens/intervene.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "failure_lens/errors.hpp"
#include "failure_lens/util.hpp"

namespace flens {

std::vector<FilterSelection> filter_pool(const DistillRun& run,
                                         const EmbeddingTable& pool_embeddings,
                                         std::span<const ExampleMeta> pool_meta,
                                         std::size_t k_per_class) {
    const std::vector<ScoredExample> scored = score_split(run, pool_embeddings, pool_meta);
    std::map<int, std::vector<ScoredExample>> by_class;
    for (const auto& s : scored) by_class[s.class_id].push_back(s);

    std::vector<FilterSelection> selections;
    for (const auto& [cls, examples] : by_class) {
        FilterSelection sel;
        sel.class_id = cls;
        sel.k = k_per_class;
        const std::size_t take = std::min(k_per_class, examples.size());
        if (take < k_per_class)
            log_line(LogLevel::warn, "class " + std::to_string(cls) + " pool has only " +
                                         std::to_string(examples.size()) + " examples for k=" +
                                         std::to_string(k_per_class));
        sel.ids = rank_top_k(examples, take, RankOrder::most_negative_decision);
        selections.push_back(std::move(sel));
    }
    return selections;
}

std::vector<WeightAssignment> emit_upweights(const DistillRun& run,
                                             const EmbeddingTable& train_embeddings,
                                             std::span<const ExampleMeta> train_meta,
                                             double factor) {
    if (!(factor > 0.0)) fail(Errc::invalid_argument, "upweight factor must be positive");
    const std::vector<ScoredExample> scored = score_split(run, train_embeddings, train_meta);
    std::set<std::string> flagged;
    for (const auto& id : flag_incorrect(scored)) flagged.insert(id);

    std::vector<WeightAssignment> weights;
    weights.reserve(train_meta.size());
    for (const auto& meta : train_meta)
        weights.push_back({meta.id, flagged.count(meta.id) > 0 ? factor : 1.0});
    return weights;
}

}  // namespace flens
