#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cartlab/dataset.hpp"

namespace cartlab {

enum class StopReason { none, depth, single_point, constant_response, no_valid_split };

std::string to_string(StopReason reason);
StopReason stop_reason_from_string(const std::string& text);

struct TreeNode {
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    double mean = 0.0;
    std::uint32_t count = 0;
    std::int32_t depth = 0;
    StopReason stop = StopReason::none;

    bool is_leaf() const { return left < 0; }
};

struct SplitCandidate {
    double threshold = 0.0;
    double gain = 0.0;
};

struct FitConfig {
    int max_depth = 0;
    /// Candidate features per node: 0 means all p, otherwise a fresh uniform
    /// subset of this size is drawn at every node.
    int mtry = 0;
    std::uint64_t seed = 0;
};

/// Depth-bounded binary regression tree grown breadth-first: every eligible
/// node on a level is split before the next level starts. Nodes live in an
/// arena indexed by position; node 0 is the root.
class Tree {
public:
    /// Assembles a tree from an explicit node arena (used by deserialization
    /// and pruning). Depths are recomputed from the links.
    static Tree from_parts(std::vector<TreeNode> nodes, std::size_t n, std::size_t p,
                           const FitConfig& config);

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(std::size_t id) const { return nodes_[id]; }
    int depth() const { return depth_; }
    const FitConfig& config() const { return config_; }
    std::size_t train_rows() const { return n_; }
    std::size_t train_cols() const { return p_; }

    double predict(std::span<const double> x) const;

    /// Leaf the point routes to (x_j <= s goes left).
    std::size_t route(std::span<const double> x) const;

    /// Leaf each training row lands in; reproduces the fit partition.
    std::vector<std::uint32_t> leaf_of_rows(const Dataset& data) const;

    std::size_t leaf_count() const;
    std::size_t internal_count() const;

private:
    friend Tree fit(const Dataset&, const FitConfig&);
    friend Tree tree_from_json(const std::string&);
    friend class TreeBuilder;
    std::vector<TreeNode> nodes_;
    int depth_ = 0;
    std::size_t n_ = 0, p_ = 0;
    FitConfig config_;
};

/// Within-node sample variance of the responses (two-pass, centered).
double impurity(const Dataset& data, std::span<const std::uint32_t> rows);

/// Scans every boundary between consecutive distinct values of the feature
/// inside the node and returns the gain-maximizing threshold (midpoint of
/// the straddling values), or nothing when the feature is constant on the
/// node. Equal gains keep the smallest threshold.
std::optional<SplitCandidate> best_split(const Dataset& data,
                                         std::span<const std::uint32_t> rows,
                                         std::size_t feature);

Tree fit(const Dataset& data, const FitConfig& config);

double training_error(const Tree& tree, const Dataset& data);

/// Training error of the depth-k truncation of the tree, for k = 0..depth.
/// Valid because growth is breadth-first: truncating at depth k gives
/// exactly the level-k tree of the same fit.
std::vector<double> training_error_by_depth(const Tree& tree, const Dataset& data);

struct GainIdentity {
    double impurity_decrease = 0.0;  // weighted-impurity form
    double squared_inner = 0.0;      // squared residual/stump inner product
    double gap = 0.0;
};

/// Evaluates the impurity gain of splitting `rows` on (feature, threshold)
/// two ways: as the drop in weighted within-node variance and as the squared
/// inner product between centered responses and the standardized stump.
/// The two agree exactly in exact arithmetic.
GainIdentity gain_identity_check(const Dataset& data, std::span<const std::uint32_t> rows,
                                 std::size_t feature, double threshold);

/// The tree's output written as root mean plus one orthonormal stump term
/// per internal node. Coefficients are the empirical inner products of the
/// response with the unit-norm stumps.
class StumpExpansion {
public:
    struct Term {
        std::uint32_t node = 0;
        double coefficient = 0.0;  // <Y, Y~_t>_n
        double p_left = 0.0;
        double p_right = 0.0;
        double weight = 0.0;  // w(t) = N(t)/n
    };

    double root_mean() const { return root_mean_; }
    const std::vector<Term>& terms() const { return terms_; }

    /// root_mean + sum_t c_t * Y~_t(x); equals the tree's leaf mean at every
    /// training point.
    double evaluate(const Tree& tree, std::span<const double> x) const;

    /// Value of the unit-norm stump for a given term at x (0 when x is
    /// outside the term's node).
    double stump_value(const Tree& tree, const Term& term, std::span<const double> x) const;

private:
    friend StumpExpansion stump_expansion(const Tree&, const Dataset&);
    double root_mean_ = 0.0;
    std::vector<Term> terms_;
};

StumpExpansion stump_expansion(const Tree& tree, const Dataset& data);

std::string tree_to_json(const Tree& tree);
Tree tree_from_json(const std::string& text);

}  // namespace cartlab
