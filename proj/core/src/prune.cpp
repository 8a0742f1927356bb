#include "cartlab/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cartlab/error.hpp"

namespace cartlab {

namespace {

// Sum of squared residuals about each node's own mean, over the training
// rows that reach it. Both the DP and the solution path run on these.
std::vector<double> collapse_sse(const Tree& tree, const Dataset& data) {
    std::vector<double> sse(tree.nodes().size(), 0.0);
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        std::size_t id = 0;
        const double y = data.response(i);
        for (;;) {
            const TreeNode& node = tree.node(id);
            const double d = y - node.mean;
            sse[id] += d * d;
            if (node.is_leaf()) break;
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
    }
    return sse;
}

Tree materialize(const Tree& tree, const std::vector<char>& keep_split) {
    std::vector<TreeNode> nodes;
    struct Item {
        std::size_t old_id;
        std::size_t new_id;
    };
    std::vector<Item> queue;
    nodes.push_back(tree.node(0));
    queue.push_back({0, 0});
    while (!queue.empty()) {
        Item item = queue.back();
        queue.pop_back();
        const TreeNode& old_node = tree.node(item.old_id);
        if (old_node.is_leaf() || !keep_split[item.old_id]) {
            TreeNode& copy = nodes[item.new_id];
            copy.left = copy.right = -1;
            copy.feature = -1;
            copy.threshold = 0.0;
            copy.gain = 0.0;
            if (!old_node.is_leaf()) copy.stop = StopReason::none;  // collapsed
            continue;
        }
        const std::size_t left_id = nodes.size();
        nodes.push_back(tree.node(old_node.left));
        const std::size_t right_id = nodes.size();
        nodes.push_back(tree.node(old_node.right));
        nodes[item.new_id].left = static_cast<std::int32_t>(left_id);
        nodes[item.new_id].right = static_cast<std::int32_t>(right_id);
        queue.push_back({static_cast<std::size_t>(old_node.left), left_id});
        queue.push_back({static_cast<std::size_t>(old_node.right), right_id});
    }
    return Tree::from_parts(std::move(nodes), tree.train_rows(), tree.train_cols(),
                            tree.config());
}

}  // namespace

Tree prune(const Tree& tree, const Dataset& data, const PruneConfig& config) {
    if (config.alpha < 0.0) throw ConfigError("alpha must be >= 0");
    const double n = static_cast<double>(data.n_rows());
    const double penalty =
        config.alpha * std::log(n * static_cast<double>(data.n_cols())) / n;

    const std::vector<double> sse = collapse_sse(tree, data);
    const std::size_t count = tree.nodes().size();

    // Bottom-up over the arena (children have larger ids). Ties collapse.
    std::vector<double> best(count, 0.0);
    std::vector<char> keep_split(count, 0);
    for (std::size_t id = count; id-- > 0;) {
        const TreeNode& node = tree.node(id);
        const double collapsed = sse[id] / n + penalty;
        if (node.is_leaf()) {
            best[id] = collapsed;
            continue;
        }
        const double split = best[node.left] + best[node.right];
        if (split < collapsed) {
            best[id] = split;
            keep_split[id] = 1;
        } else {
            best[id] = collapsed;
        }
    }
    return materialize(tree, keep_split);
}

std::vector<PrunePathEntry> prune_path(const Tree& tree, const Dataset& data) {
    const double n = static_cast<double>(data.n_rows());
    const double log_np = std::log(n * static_cast<double>(data.n_cols()));
    const std::vector<double> sse = collapse_sse(tree, data);
    const std::size_t count = tree.nodes().size();

    std::vector<char> keep_split(count, 0);
    for (std::size_t id = 0; id < count; ++id)
        if (!tree.node(id).is_leaf()) keep_split[id] = 1;

    auto subtree_stats = [&](std::vector<double>& sub_sse, std::vector<std::size_t>& leaves,
                             std::vector<char>& alive) {
        sub_sse.assign(count, 0.0);
        leaves.assign(count, 0);
        alive.assign(count, 0);
        for (std::size_t id = count; id-- > 0;) {
            const TreeNode& node = tree.node(id);
            if (node.is_leaf() || !keep_split[id]) {
                sub_sse[id] = sse[id];
                leaves[id] = 1;
            } else {
                sub_sse[id] = sub_sse[node.left] + sub_sse[node.right];
                leaves[id] = leaves[node.left] + leaves[node.right];
            }
        }
        // mark reachability top-down
        alive[0] = 1;
        for (std::size_t id = 0; id < count; ++id) {
            if (!alive[id]) continue;
            const TreeNode& node = tree.node(id);
            if (!node.is_leaf() && keep_split[id]) {
                alive[node.left] = 1;
                alive[node.right] = 1;
            }
        }
    };

    std::vector<double> sub_sse;
    std::vector<std::size_t> leaves;
    std::vector<char> alive;
    std::vector<PrunePathEntry> path;

    subtree_stats(sub_sse, leaves, alive);
    path.push_back({0.0, leaves[0], sub_sse[0] / n});

    for (;;) {
        // weakest-link value per live internal node
        double gmin = std::numeric_limits<double>::infinity();
        for (std::size_t id = 0; id < count; ++id) {
            if (!alive[id] || !keep_split[id] || tree.node(id).is_leaf()) continue;
            const double g =
                (sse[id] - sub_sse[id]) / (log_np * static_cast<double>(leaves[id] - 1));
            gmin = std::min(gmin, g);
        }
        if (!std::isfinite(gmin)) break;  // root-only already
        for (std::size_t id = 0; id < count; ++id) {
            if (!alive[id] || !keep_split[id] || tree.node(id).is_leaf()) continue;
            const double g =
                (sse[id] - sub_sse[id]) / (log_np * static_cast<double>(leaves[id] - 1));
            if (g <= gmin) keep_split[id] = 0;
        }
        subtree_stats(sub_sse, leaves, alive);
        PrunePathEntry entry{gmin, leaves[0], sub_sse[0] / n};
        if (!path.empty() && path.back().alpha == entry.alpha)
            path.back() = entry;  // zero-gain collapses fold into alpha = 0
        else
            path.push_back(entry);
    }
    return path;
}

}  // namespace cartlab
