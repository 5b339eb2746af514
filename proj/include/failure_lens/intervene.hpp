#pragma once

#include <span>
#include <string>
#include <vector>

#include "failure_lens/core_data.hpp"
#include "failure_lens/distiller.hpp"

namespace flens {

struct WeightAssignment {
    std::string id;
    double weight = 1.0;
};

struct FilterSelection {
    int class_id = 0;
    std::vector<std::string> ids;
    std::size_t k = 0;  // requested budget; |ids| = min(k, available)
};

/// For each fitted class, the k pool examples with the most negative
/// decision values (ties by id). Classes with fewer than k pool examples
/// contribute what they have, with a warning.
std::vector<FilterSelection> filter_pool(const DistillRun& run,
                                         const EmbeddingTable& pool_embeddings,
                                         std::span<const ExampleMeta> pool_meta,
                                         std::size_t k_per_class);

/// One weight per training example: `factor` where the fitted direction
/// predicts a mistake (decision < 0), 1.0 everywhere else, including
/// examples of classes without a direction.
std::vector<WeightAssignment> emit_upweights(const DistillRun& run,
                                             const EmbeddingTable& train_embeddings,
                                             std::span<const ExampleMeta> train_meta,
                                             double factor = 2.0);

}  // namespace flens
