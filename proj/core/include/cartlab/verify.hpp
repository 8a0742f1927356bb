#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cartlab/dataset.hpp"
#include "cartlab/model.hpp"
#include "cartlab/tree.hpp"

namespace cartlab {

enum class TvMode { analytic, empirical };

std::string to_string(TvMode mode);

/// Per-depth certificate for the 1/(K+3) excess training error bound: for a
/// reference additive g, the depth-K training error never exceeds
/// ||Y - g||_n^2 + TV(g)^2 / (K+3) for K >= 1. The empirical TV (sample-path
/// variation) is the sharper certificate; the analytic TV is the closed
/// form. The K = 0 row is informational (no bound applies).
struct BoundRow {
    int depth = 0;
    double excess_risk = 0.0;
    double bound = 0.0;
    bool satisfied = true;
    double slack = 0.0;  // bound - excess_risk
};

struct BoundReport {
    std::vector<BoundRow> rows;
    TvMode tv_mode = TvMode::empirical;
    double tv_value = 0.0;
    bool all_satisfied = true;
};

BoundReport check_training_bound(const Dataset& data, const AdditiveModel& g,
                                 int max_depth, TvMode tv_mode);

/// Per-split certificate: at any internal node with nonnegative node-level
/// excess risk R(t), the executed gain is at least R(t)^2 / TV(g)^2.
struct NodeGainRow {
    std::uint32_t node = 0;
    int depth = 0;
    double node_excess = 0.0;
    double gain = 0.0;
    double bound = 0.0;
    bool satisfied = true;
};

struct NodeGainReport {
    std::vector<NodeGainRow> rows;
    TvMode tv_mode = TvMode::empirical;
    double tv_value = 0.0;
    bool all_satisfied = true;
};

/// Tree must be fitted with mtry = all; the certificate compares against the
/// maximum over every feature.
NodeGainReport check_node_gain_bound(const Tree& tree, const Dataset& data,
                                     const AdditiveModel& g, TvMode tv_mode);

/// Best gain per feature at a node (maximized over thresholds); inadmissible
/// features contribute 0.
std::vector<double> per_feature_best_gains(const Dataset& data,
                                           std::span<const std::uint32_t> rows);

/// Exact E[max over a uniform q-subset] of the given per-feature gains,
/// enumerated over all C(p, q) subsets. Only feasible for small p.
double mtry_exact_expectation(std::span<const double> gains, std::size_t q);

struct MtryCheck {
    double mc_mean = 0.0;
    double mc_std_error = 0.0;
    double lower_bound = 0.0;  // (q/p) * max gain
    double full_max_gain = 0.0;
    std::optional<double> exact_expectation;  // set when p <= 12
    bool satisfied = true;
};

/// Monte-Carlo check of E[best-in-subset gain] >= (q/p) * (full max gain) at
/// one node; satisfied means mc_mean >= bound - 3 * SE. Requires at least
/// 100 draws.
MtryCheck check_mtry_bound(const Dataset& data, std::span<const std::uint32_t> rows,
                           std::size_t q, std::size_t draws, std::uint64_t seed);

/// Exhaustive per-tree diagnostics for the gain identity, the orthonormal
/// stump system and the per-level training error recursion.
struct TreeIdentityStats {
    /// Largest gap between the two gain formulas over every admissible
    /// split of every feature at every node.
    double max_gain_gap = 0.0;
    /// Largest entrywise deviation of the Gram matrix of {1} and the
    /// unit-norm stumps from the identity.
    double max_gram_deviation = 0.0;
    /// Largest gap between the stump expansion and the leaf mean over the
    /// training rows.
    double max_expansion_gap = 0.0;
    /// Largest violation of err_K = err_{K-1} - sum of squared level
    /// coefficients.
    double max_recursion_gap = 0.0;
    /// Training error nonincreasing in depth.
    bool monotone = true;
};

TreeIdentityStats tree_identity_stats(const Tree& tree, const Dataset& data);

/// The three-component sparse target used by the stock experiment: one
/// step, one linear and one piecewise-linear component with total variation
/// under 4.
std::vector<ComponentFn> demo_active_components();

/// floor((1/2) log2 n); exact for powers of two up to 2^63.
int depth_schedule(std::uint64_t n);

/// floor(exp(c * n^(1 - xi))), capped at p_max (capped flag set when the cap
/// engages).
std::size_t dimension_schedule(std::uint64_t n, double c, double xi,
                               std::size_t p_max, bool* capped = nullptr);

struct ExperimentRow {
    std::size_t n = 0;
    std::size_t p = 0;
    int depth = 0;
    std::size_t q = 0;  // 0 for single-tree fits
    int n_trees = 1;
    std::uint64_t seed = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;   // held-out error against the noiseless mean
    double bound_rate = 0.0; // 4 * TV / (log2 n + 6), the slow-rate proxy
};

struct ExperimentReport {
    std::vector<ExperimentRow> rows;
    std::string engine;
};

enum class ExperimentEngine { tree, forest };

struct ExperimentConfig {
    std::vector<std::size_t> n_grid;
    ExperimentEngine engine = ExperimentEngine::tree;
    /// forest only: 0 = floor(p/3) rule, otherwise fixed q (clamped to p).
    std::size_t mtry = 0;
    int n_trees = 50;
    double noise_sd = 0.5;
    std::size_t test_size = 2000;
    double schedule_c = 1.0;
    double schedule_xi = 0.9;
    std::size_t p_max = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Builds the sparse model (given actives occupy the first columns, the rest
/// are pure noise features), sweeps the n grid with the depth and dimension
/// schedules, and records held-out error against the noiseless mean.
ExperimentReport consistency_experiment(const std::vector<ComponentFn>& active_components,
                                        const ExperimentConfig& config);

/// One randomized (dataset, reference model) instance for the certificate
/// suites. Half the instances generate the response from g itself, half
/// from an unrelated model, so both the well- and mis-specified cases are
/// exercised. Deterministic in (seed, index).
struct CorpusInstance {
    Dataset data;
    AdditiveModel g;
};

struct CorpusOptions {
    std::size_t min_rows = 10, max_rows = 300;
    std::size_t min_cols = 1, max_cols = 20;
    std::uint64_t seed = 0;
};

CorpusInstance make_corpus_instance(std::size_t index, const CorpusOptions& options);

/// Random additive model on [0,1]^p mixing constant, linear, step and
/// piecewise-linear components.
AdditiveModel random_additive_model(std::size_t p, std::uint64_t seed);

}  // namespace cartlab
