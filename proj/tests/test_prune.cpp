#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cartlab/dataset.hpp"
#include "cartlab/prune.hpp"
#include "cartlab/rng.hpp"
#include "cartlab/tree.hpp"

using namespace cartlab;

namespace {

Dataset random_dataset(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> cols(p, std::vector<double>(n));
    for (auto& col : cols)
        for (double& v : col) v = rng.next_double();
    std::vector<double> y(n);
    for (double& v : y) v = rng.next_normal();
    return Dataset(std::move(cols), std::move(y));
}

// Per-node sum of squared residuals about the node's own mean, over the
// training rows routed through it.
std::vector<double> node_sse(const Tree& tree, const Dataset& data) {
    std::vector<double> sse(tree.nodes().size(), 0.0);
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        std::size_t id = 0;
        const double y = data.response(i);
        for (;;) {
            const TreeNode& node = tree.node(id);
            sse[id] += (y - node.mean) * (y - node.mean);
            if (node.is_leaf()) break;
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
    }
    return sse;
}

// All (sse, leaves) pairs achievable by collapsing internal nodes below `id`.
void enumerate(const Tree& tree, const std::vector<double>& sse, std::size_t id,
               std::vector<std::pair<double, std::size_t>>& out) {
    out.clear();
    const TreeNode& node = tree.node(id);
    out.push_back({sse[id], 1});  // collapse here (or already a leaf)
    if (node.is_leaf()) return;
    std::vector<std::pair<double, std::size_t>> left, right;
    enumerate(tree, sse, node.left, left);
    enumerate(tree, sse, node.right, right);
    for (const auto& l : left)
        for (const auto& r : right) out.push_back({l.first + r.first, l.second + r.second});
}

double brute_best_objective(const Tree& tree, const Dataset& data, double alpha,
                            std::size_t* best_leaves = nullptr) {
    const double n = static_cast<double>(data.n_rows());
    const double penalty = alpha * std::log(n * data.n_cols()) / n;
    std::vector<std::pair<double, std::size_t>> options;
    enumerate(tree, node_sse(tree, data), 0, options);
    double best = std::numeric_limits<double>::infinity();
    std::size_t leaves = 0;
    for (const auto& [s, l] : options) {
        const double obj = s / n + penalty * static_cast<double>(l);
        if (obj < best - 1e-15 || (std::abs(obj - best) <= 1e-15 && l < leaves)) {
            best = obj;
            leaves = l;
        }
    }
    if (best_leaves) *best_leaves = leaves;
    return best;
}

double objective(const Tree& tree, const Dataset& data, double alpha) {
    const double n = static_cast<double>(data.n_rows());
    const double penalty = alpha * std::log(n * data.n_cols()) / n;
    return training_error(tree, data) + penalty * static_cast<double>(tree.leaf_count());
}

}  // namespace

TEST_CASE("alpha = 0 keeps the training error") {
    Dataset data = random_dataset(80, 2, 21);
    FitConfig fc;
    fc.max_depth = 4;
    Tree tree = fit(data, fc);
    Tree pruned = prune(tree, data, {0.0});
    // zero-gain branches may collapse, but the fit cannot get worse
    CHECK(training_error(pruned, data) ==
          doctest::Approx(training_error(tree, data)).epsilon(1e-12));
    CHECK(pruned.leaf_count() <= tree.leaf_count());
}

TEST_CASE("huge alpha collapses to the root") {
    Dataset data = random_dataset(80, 2, 22);
    FitConfig fc;
    fc.max_depth = 4;
    Tree tree = fit(data, fc);
    Tree pruned = prune(tree, data, {1e9});
    CHECK(pruned.nodes().size() == 1);
    CHECK(pruned.leaf_count() == 1);
    std::vector<double> x = {0.5, 0.5};
    double mean = 0.0;
    for (std::size_t i = 0; i < 80; ++i) mean += data.response(i) / 80.0;
    CHECK(pruned.predict(x) == doctest::Approx(mean).epsilon(1e-13));
}

TEST_CASE("negative alpha is rejected") {
    Dataset data = random_dataset(10, 1, 1);
    FitConfig fc;
    fc.max_depth = 1;
    Tree tree = fit(data, fc);
    CHECK_THROWS(prune(tree, data, {-0.5}));
}

TEST_CASE("prune matches brute-force enumeration on small trees") {
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 12 && seed < 60; ++seed) {
        Dataset data = random_dataset(20 + seed % 30, 2, 500 + seed);
        FitConfig fc;
        fc.max_depth = 3;
        Tree tree = fit(data, fc);
        if (tree.internal_count() == 0 || tree.internal_count() > 12) continue;
        ++checked;
        Rng rng(seed);
        for (int rep = 0; rep < 8; ++rep) {
            const double alpha = rep == 0 ? 0.0 : 0.5 * rng.next_double();
            Tree pruned = prune(tree, data, {alpha});
            std::size_t brute_leaves = 0;
            const double brute = brute_best_objective(tree, data, alpha, &brute_leaves);
            CHECK(objective(pruned, data, alpha) == doctest::Approx(brute).epsilon(1e-10));
            CHECK(pruned.leaf_count() == brute_leaves);
        }
    }
    CHECK(checked >= 12);
}

TEST_CASE("prune path is monotone and consistent with prune()") {
    Dataset data = random_dataset(120, 3, 905);
    FitConfig fc;
    fc.max_depth = 5;
    Tree tree = fit(data, fc);
    auto path = prune_path(tree, data);
    REQUIRE(!path.empty());
    CHECK(path.front().alpha == 0.0);
    CHECK(path.back().leaves == 1);
    for (std::size_t k = 1; k < path.size(); ++k) {
        CHECK(path[k].alpha >= path[k - 1].alpha);
        CHECK(path[k].leaves < path[k - 1].leaves);
        CHECK(path[k].train_mse >= path[k - 1].train_mse - 1e-12);
    }
    // at random alphas the entry in force matches a direct prune
    Rng rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        const double alpha = 2.0 * path.back().alpha * rng.next_double();
        const PrunePathEntry* in_force = &path.front();
        for (const auto& entry : path)
            if (entry.alpha <= alpha) in_force = &entry;
        Tree pruned = prune(tree, data, {alpha});
        CHECK(pruned.leaf_count() == in_force->leaves);
        CHECK(training_error(pruned, data) ==
              doctest::Approx(in_force->train_mse).epsilon(1e-10));
    }
}

TEST_CASE("pruned trees survive a JSON round trip") {
    Dataset data = random_dataset(60, 2, 33);
    FitConfig fc;
    fc.max_depth = 4;
    Tree tree = fit(data, fc);
    Tree pruned = prune(tree, data, {0.05});
    Tree back = tree_from_json(tree_to_json(pruned));
    Rng rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> x = {rng.next_double(), rng.next_double()};
        CHECK(back.predict(x) == pruned.predict(x));
    }
}
