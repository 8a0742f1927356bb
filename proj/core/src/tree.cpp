#include "cartlab/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "cartlab/error.hpp"
#include "cartlab/rng.hpp"

namespace cartlab {

using nlohmann::json;

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::none: return "none";
        case StopReason::depth: return "depth";
        case StopReason::single_point: return "single_point";
        case StopReason::constant_response: return "constant_response";
        case StopReason::no_valid_split: return "no_valid_split";
    }
    return "none";
}

StopReason stop_reason_from_string(const std::string& text) {
    if (text == "depth") return StopReason::depth;
    if (text == "single_point") return StopReason::single_point;
    if (text == "constant_response") return StopReason::constant_response;
    if (text == "no_valid_split") return StopReason::no_valid_split;
    if (text == "none") return StopReason::none;
    throw ParseError(fmt::format("unknown stop reason '{}'", text));
}

namespace {

// Split scan over one feature inside a node. `order` holds the node's rows
// sorted ascending by the feature (stable in original row order), `values`
// and `centered` the matching feature values and mean-centered responses.
// Every boundary between consecutive distinct values is evaluated with the
// product form (N_L N_R / N^2)(mean_L - mean_R)^2; equal gains keep the
// first (smallest) threshold.
std::optional<SplitCandidate> scan_sorted(std::span<const double> values,
                                          std::span<const double> centered) {
    const std::size_t m = values.size();
    if (m < 2) return std::nullopt;
    double total = 0.0;
    for (double z : centered) total += z;
    double left_sum = 0.0;
    std::optional<SplitCandidate> best;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += centered[i];
        if (!(values[i] < values[i + 1])) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(m - i - 1);
        const double diff = left_sum / nl - (total - left_sum) / nr;
        const double gain = (nl * nr) / (static_cast<double>(m) * static_cast<double>(m)) *
                            diff * diff;
        if (!best || gain > best->gain) {
            best = SplitCandidate{values[i] + 0.5 * (values[i + 1] - values[i]), gain};
        }
    }
    return best;
}

struct NodeStats {
    double mean = 0.0;
    bool constant_response = true;
};

NodeStats node_stats(const Dataset& data, std::span<const std::uint32_t> rows) {
    NodeStats s;
    double sum = 0.0;
    const double first = data.response(rows[0]);
    for (std::uint32_t r : rows) {
        const double y = data.response(r);
        sum += y;
        if (y != first) s.constant_response = false;
    }
    s.mean = sum / static_cast<double>(rows.size());
    return s;
}

}  // namespace

double impurity(const Dataset& data, std::span<const std::uint32_t> rows) {
    if (rows.empty()) throw ConfigError("impurity of an empty row set");
    double mean = 0.0;
    for (std::uint32_t r : rows) mean += data.response(r);
    mean /= static_cast<double>(rows.size());
    double ss = 0.0;
    for (std::uint32_t r : rows) {
        const double d = data.response(r) - mean;
        ss += d * d;
    }
    return ss / static_cast<double>(rows.size());
}

std::optional<SplitCandidate> best_split(const Dataset& data,
                                         std::span<const std::uint32_t> rows,
                                         std::size_t feature) {
    if (rows.empty()) throw ConfigError("best_split on an empty row set");
    std::vector<std::uint32_t> order(rows.begin(), rows.end());
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return data.value(a, feature) < data.value(b, feature);
    });
    double mean = 0.0;
    for (std::uint32_t r : order) mean += data.response(r);
    mean /= static_cast<double>(order.size());
    std::vector<double> values(order.size()), centered(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        values[i] = data.value(order[i], feature);
        centered[i] = data.response(order[i]) - mean;
    }
    return scan_sorted(values, centered);
}

// Holds the per-feature presorted row buffers during a fit. Every node owns
// the same contiguous range [begin, end) in all p buffers; splitting a node
// stable-partitions each buffer range by the chosen predicate, preserving
// per-feature sorted order in both daughters.
class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const FitConfig& config)
        : data_(data), config_(config), rng_(config.seed) {
        const std::size_t p = data.n_cols();
        if (config.max_depth < 0) throw ConfigError("max depth must be >= 0");
        if (config.mtry < 0 || config.mtry > static_cast<int>(p))
            throw ConfigError(fmt::format("mtry must lie in [1, {}]", p));
        order_.resize(p);
        for (std::size_t j = 0; j < p; ++j)
            order_[j].assign(data.sort_index(j).begin(), data.sort_index(j).end());
        candidate_buf_.resize(p);
    }

    Tree build() {
        Tree tree;
        tree.n_ = data_.n_rows();
        tree.p_ = data_.n_cols();
        tree.config_ = config_;

        struct Pending {
            std::int32_t node;
            std::size_t begin, end;
            int depth;
        };
        std::vector<Pending> level, next;

        tree.nodes_.emplace_back();
        level.push_back({0, 0, data_.n_rows(), 0});

        while (!level.empty()) {
            next.clear();
            for (const Pending& item : level) {
                TreeNode& node = tree.nodes_[item.node];
                node.depth = item.depth;
                node.count = static_cast<std::uint32_t>(item.end - item.begin);
                auto rows = node_rows(item.begin, item.end);
                NodeStats stats = node_stats(data_, rows);
                node.mean = stats.mean;
                tree.depth_ = std::max(tree.depth_, item.depth);

                if (node.count == 1) {
                    node.stop = StopReason::single_point;
                    continue;
                }
                if (stats.constant_response) {
                    node.stop = StopReason::constant_response;
                    continue;
                }
                if (item.depth >= config_.max_depth) {
                    node.stop = StopReason::depth;
                    continue;
                }
                auto chosen = choose_split(item.begin, item.end, stats.mean);
                if (!chosen) {
                    node.stop = StopReason::no_valid_split;
                    continue;
                }
                auto [feature, split] = *chosen;
                const std::size_t nl = partition(item.begin, item.end, feature, split.threshold);
                // nonempty daughters are guaranteed by the boundary scan
                const std::int32_t left_id = static_cast<std::int32_t>(tree.nodes_.size());
                const std::int32_t right_id = left_id + 1;
                tree.nodes_.emplace_back();
                tree.nodes_.emplace_back();
                TreeNode& parent = tree.nodes_[item.node];
                parent.feature = static_cast<std::int32_t>(feature);
                parent.threshold = split.threshold;
                parent.gain = split.gain;
                parent.left = left_id;
                parent.right = right_id;
                next.push_back({left_id, item.begin, item.begin + nl, item.depth + 1});
                next.push_back({right_id, item.begin + nl, item.end, item.depth + 1});
            }
            level.swap(next);
        }
        return tree;
    }

private:
    std::span<const std::uint32_t> node_rows(std::size_t begin, std::size_t end) const {
        return std::span<const std::uint32_t>(order_[0]).subspan(begin, end - begin);
    }

    // Candidate features in ascending index order; all p when mtry is 0.
    std::span<const std::size_t> candidates() {
        const std::size_t p = data_.n_cols();
        if (config_.mtry == 0 || static_cast<std::size_t>(config_.mtry) == p) {
            candidate_buf_.resize(p);
            std::iota(candidate_buf_.begin(), candidate_buf_.end(), std::size_t{0});
            return candidate_buf_;
        }
        // Floyd's sampling: q distinct indices, then sorted for the tie rule.
        const std::size_t q = static_cast<std::size_t>(config_.mtry);
        candidate_buf_.clear();
        for (std::size_t k = p - q; k < p; ++k) {
            std::size_t r = static_cast<std::size_t>(rng_.next_below(k + 1));
            if (std::find(candidate_buf_.begin(), candidate_buf_.end(), r) !=
                candidate_buf_.end())
                candidate_buf_.push_back(k);
            else
                candidate_buf_.push_back(r);
        }
        std::sort(candidate_buf_.begin(), candidate_buf_.end());
        return candidate_buf_;
    }

    std::optional<std::pair<std::size_t, SplitCandidate>> choose_split(std::size_t begin,
                                                                       std::size_t end,
                                                                       double mean) {
        const std::size_t m = end - begin;
        values_.resize(m);
        centered_.resize(m);
        std::optional<std::pair<std::size_t, SplitCandidate>> best;
        for (std::size_t j : candidates()) {
            for (std::size_t i = 0; i < m; ++i) {
                const std::uint32_t r = order_[j][begin + i];
                values_[i] = data_.value(r, j);
                centered_[i] = data_.response(r) - mean;
            }
            auto cand = scan_sorted(values_, centered_);
            if (cand && (!best || cand->gain > best->second.gain))
                best = {j, *cand};
        }
        return best;
    }

    // Stable partition of every feature buffer; returns the left count.
    std::size_t partition(std::size_t begin, std::size_t end, std::size_t feature,
                          double threshold) {
        std::size_t nl = 0;
        for (std::size_t j = 0; j < order_.size(); ++j) {
            auto mid = std::stable_partition(
                order_[j].begin() + begin, order_[j].begin() + end,
                [&](std::uint32_t r) { return data_.value(r, feature) <= threshold; });
            nl = static_cast<std::size_t>(mid - (order_[j].begin() + begin));
        }
        return nl;
    }

    const Dataset& data_;
    FitConfig config_;
    Rng rng_;
    std::vector<std::vector<std::uint32_t>> order_;
    std::vector<std::size_t> candidate_buf_;
    std::vector<double> values_, centered_;
};

Tree fit(const Dataset& data, const FitConfig& config) {
    return TreeBuilder(data, config).build();
}

Tree Tree::from_parts(std::vector<TreeNode> nodes, std::size_t n, std::size_t p,
                      const FitConfig& config) {
    if (nodes.empty()) throw ConfigError("tree needs at least a root node");
    Tree tree;
    tree.nodes_ = std::move(nodes);
    tree.n_ = n;
    tree.p_ = p;
    tree.config_ = config;
    tree.nodes_[0].depth = 0;
    tree.depth_ = 0;
    for (std::size_t id = 0; id < tree.nodes_.size(); ++id) {
        TreeNode& node = tree.nodes_[id];
        tree.depth_ = std::max(tree.depth_, node.depth);
        if (node.is_leaf()) continue;
        if (node.left <= static_cast<std::int32_t>(id) ||
            node.right <= static_cast<std::int32_t>(id) ||
            node.left >= static_cast<std::int32_t>(tree.nodes_.size()) ||
            node.right >= static_cast<std::int32_t>(tree.nodes_.size()))
            throw ConfigError("tree links must point forward within the arena");
        tree.nodes_[node.left].depth = node.depth + 1;
        tree.nodes_[node.right].depth = node.depth + 1;
    }
    return tree;
}

double Tree::predict(std::span<const double> x) const {
    return nodes_[route(x)].mean;
}

std::size_t Tree::route(std::span<const double> x) const {
    if (x.size() != p_)
        throw ConfigError(fmt::format("point has dimension {}, tree expects {}", x.size(), p_));
    std::size_t id = 0;
    while (!nodes_[id].is_leaf()) {
        const TreeNode& node = nodes_[id];
        id = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return id;
}

std::vector<std::uint32_t> Tree::leaf_of_rows(const Dataset& data) const {
    if (data.n_cols() != p_) throw ConfigError("dataset does not match tree dimensions");
    std::vector<std::uint32_t> leaf(data.n_rows());
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        std::size_t id = 0;
        while (!nodes_[id].is_leaf()) {
            const TreeNode& node = nodes_[id];
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
        leaf[i] = static_cast<std::uint32_t>(id);
    }
    return leaf;
}

std::size_t Tree::leaf_count() const {
    std::size_t c = 0;
    for (const auto& n : nodes_)
        if (n.is_leaf()) ++c;
    return c;
}

std::size_t Tree::internal_count() const {
    return nodes_.size() - leaf_count();
}

double training_error(const Tree& tree, const Dataset& data) {
    double ss = 0.0;
    std::vector<double> x(data.n_cols());
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) x[j] = data.value(i, j);
        const double d = data.response(i) - tree.predict(x);
        ss += d * d;
    }
    return ss / static_cast<double>(data.n_rows());
}

std::vector<double> training_error_by_depth(const Tree& tree, const Dataset& data) {
    std::vector<double> ss(tree.depth() + 1, 0.0);
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        std::size_t id = 0;
        const double y = data.response(i);
        int k = 0;
        for (;; ++k) {
            const TreeNode& node = tree.node(id);
            const double d = y - node.mean;
            ss[k] += d * d;
            if (node.is_leaf()) break;
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
        // a row that stops early keeps its leaf residual at deeper levels
        const TreeNode& leaf = tree.node(id);
        const double d = y - leaf.mean;
        for (int rest = k + 1; rest <= tree.depth(); ++rest) ss[rest] += d * d;
    }
    for (double& v : ss) v /= static_cast<double>(data.n_rows());
    return ss;
}

GainIdentity gain_identity_check(const Dataset& data, std::span<const std::uint32_t> rows,
                                 std::size_t feature, double threshold) {
    std::vector<std::uint32_t> left, right;
    for (std::uint32_t r : rows)
        (data.value(r, feature) <= threshold ? left : right).push_back(r);
    if (left.empty() || right.empty())
        throw ConfigError("inadmissible split: one daughter is empty");

    const double n = static_cast<double>(rows.size());
    const double pl = static_cast<double>(left.size()) / n;
    const double pr = static_cast<double>(right.size()) / n;

    GainIdentity result;
    result.impurity_decrease =
        impurity(data, rows) - (pl * impurity(data, left) + pr * impurity(data, right));

    double mean = 0.0;
    for (std::uint32_t r : rows) mean += data.response(r);
    mean /= n;
    // <Y - mean_t, stump>_t with the standardized +-P contrast
    const double denom = std::sqrt(pl * pr);
    double inner = 0.0;
    for (std::uint32_t r : left) inner += (data.response(r) - mean) * (pr / denom);
    for (std::uint32_t r : right) inner -= (data.response(r) - mean) * (pl / denom);
    inner /= n;
    result.squared_inner = inner * inner;
    result.gap = std::abs(result.impurity_decrease - result.squared_inner);
    return result;
}

StumpExpansion stump_expansion(const Tree& tree, const Dataset& data) {
    const std::size_t n = data.n_rows();
    // Recover node membership by routing every training row.
    std::vector<std::vector<std::uint32_t>> members(tree.nodes().size());
    for (std::uint32_t i = 0; i < n; ++i) {
        std::size_t id = 0;
        for (;;) {
            members[id].push_back(i);
            const TreeNode& node = tree.node(id);
            if (node.is_leaf()) break;
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
    }

    StumpExpansion expansion;
    double total = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) total += data.response(i);
    expansion.root_mean_ = total / static_cast<double>(n);

    for (std::uint32_t id = 0; id < tree.nodes().size(); ++id) {
        const TreeNode& node = tree.node(id);
        if (node.is_leaf()) continue;
        const double nt = static_cast<double>(members[id].size());
        const double nl = static_cast<double>(members[node.left].size());
        const double pl = nl / nt;
        const double pr = 1.0 - pl;
        const double w = nt / static_cast<double>(n);
        const double scale = 1.0 / std::sqrt(w * pl * pr);
        // c_t = <Y, Y~_t>_n; the stump is +pr on the left daughter, -pl on
        // the right, scaled to unit empirical norm.
        double sum_left = 0.0, sum_right = 0.0;
        for (std::uint32_t r : members[node.left]) sum_left += data.response(r);
        for (std::uint32_t r : members[node.right]) sum_right += data.response(r);
        const double coeff = (sum_left * pr - sum_right * pl) * scale / static_cast<double>(n);
        expansion.terms_.push_back({id, coeff, pl, pr, w});
    }
    return expansion;
}

double StumpExpansion::stump_value(const Tree& tree, const Term& term,
                                   std::span<const double> x) const {
    // walk from the root; zero unless x reaches the term's node
    std::size_t id = 0;
    while (id != term.node) {
        const TreeNode& node = tree.node(id);
        if (node.is_leaf()) return 0.0;
        id = x[node.feature] <= node.threshold ? node.left : node.right;
        if (id > term.node) return 0.0;  // arena ids grow downward; overshoot means miss
    }
    const TreeNode& node = tree.node(term.node);
    const bool goes_left = x[node.feature] <= node.threshold;
    const double scale = 1.0 / std::sqrt(term.weight * term.p_left * term.p_right);
    return goes_left ? term.p_right * scale : -term.p_left * scale;
}

double StumpExpansion::evaluate(const Tree& tree, std::span<const double> x) const {
    double value = root_mean_;
    // only nodes on the routing path contribute
    std::size_t id = 0;
    std::vector<std::pair<std::uint32_t, bool>> path;  // (internal node, went left)
    while (!tree.node(id).is_leaf()) {
        const TreeNode& node = tree.node(id);
        const bool left = x[node.feature] <= node.threshold;
        path.emplace_back(static_cast<std::uint32_t>(id), left);
        id = left ? node.left : node.right;
    }
    for (const Term& term : terms_) {
        for (const auto& [pid, left] : path) {
            if (pid != term.node) continue;
            const double scale = 1.0 / std::sqrt(term.weight * term.p_left * term.p_right);
            value += term.coefficient * (left ? term.p_right * scale : -term.p_left * scale);
        }
    }
    return value;
}

std::string tree_to_json(const Tree& tree) {
    json j;
    j["depth"] = tree.depth();
    j["seed"] = tree.config().seed;
    j["n"] = tree.train_rows();
    j["p"] = tree.train_cols();
    j["max_depth"] = tree.config().max_depth;
    j["mtry"] = tree.config().mtry;
    json nodes = json::array();
    for (std::size_t id = 0; id < tree.nodes().size(); ++id) {
        const TreeNode& node = tree.node(id);
        json nj;
        nj["id"] = id;
        nj["kind"] = node.is_leaf() ? "leaf" : "internal";
        nj["mean"] = node.mean;
        nj["count"] = node.count;
        if (node.is_leaf()) {
            nj["feature"] = nullptr;
            nj["threshold"] = nullptr;
            nj["gain"] = nullptr;
            nj["left"] = nullptr;
            nj["right"] = nullptr;
            nj["stop_reason"] = to_string(node.stop);
        } else {
            nj["feature"] = node.feature;
            nj["threshold"] = node.threshold;
            nj["gain"] = node.gain;
            nj["left"] = node.left;
            nj["right"] = node.right;
            nj["stop_reason"] = nullptr;
        }
        nodes.push_back(std::move(nj));
    }
    j["nodes"] = std::move(nodes);
    return j.dump(2);
}

Tree tree_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("tree JSON: {}", e.what()));
    }
    std::vector<TreeNode> nodes;
    FitConfig config;
    std::size_t n = 0, p = 0;
    try {
        n = j.at("n").get<std::size_t>();
        p = j.at("p").get<std::size_t>();
        config.seed = j.value("seed", std::uint64_t{0});
        config.max_depth = j.value("max_depth", j.at("depth").get<int>());
        config.mtry = j.value("mtry", 0);
        for (const auto& nj : j.at("nodes")) {
            TreeNode node;
            node.mean = nj.at("mean").get<double>();
            node.count = nj.at("count").get<std::uint32_t>();
            if (nj.at("kind").get<std::string>() == "internal") {
                node.feature = nj.at("feature").get<std::int32_t>();
                node.threshold = nj.at("threshold").get<double>();
                node.gain = nj.at("gain").get<double>();
                node.left = nj.at("left").get<std::int32_t>();
                node.right = nj.at("right").get<std::int32_t>();
            } else {
                node.stop = stop_reason_from_string(nj.at("stop_reason").get<std::string>());
            }
            nodes.push_back(node);
        }
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("tree JSON: {}", e.what()));
    }
    if (nodes.empty()) throw ParseError("tree JSON: empty node list");
    try {
        return Tree::from_parts(std::move(nodes), n, p, config);
    } catch (const ConfigError& e) {
        throw ParseError(fmt::format("tree JSON: {}", e.what()));
    }
}

}  // namespace cartlab
