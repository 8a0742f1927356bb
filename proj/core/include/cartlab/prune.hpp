#pragma once

#include <vector>

#include "cartlab/dataset.hpp"
#include "cartlab/tree.hpp"

namespace cartlab {

/// Weakest-link pruning of the objective
///   train_mse(T) + (alpha * log(n*p) / n) * #leaves(T)
/// over all subtrees obtained by collapsing internal nodes. log is natural.
struct PruneConfig {
    double alpha = 0.0;
};

/// Exact minimizer by bottom-up dynamic programming over collapse
/// decisions. Ties in the objective collapse (smaller tree wins).
Tree prune(const Tree& tree, const Dataset& data, const PruneConfig& config);

struct PrunePathEntry {
    double alpha = 0.0;      // smallest alpha at which this subtree is optimal
    std::size_t leaves = 0;
    double train_mse = 0.0;
};

/// Solution path: breakpoints are nondecreasing in alpha and subtree sizes
/// nonincreasing. At any alpha, the entry in force matches prune().
std::vector<PrunePathEntry> prune_path(const Tree& tree, const Dataset& data);

}  // namespace cartlab
