#include "cartlab/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "cartlab/error.hpp"
#include "cartlab/forest.hpp"
#include "cartlab/rng.hpp"

namespace cartlab {

std::string to_string(TvMode mode) {
    return mode == TvMode::analytic ? "analytic" : "empirical";
}

namespace {

constexpr double kBoundTolerance = 1e-12;

double tv_value_for(const AdditiveModel& g, const Dataset& data, TvMode mode) {
    return mode == TvMode::analytic ? g.tv_norm_analytic() : g.tv_norm_empirical(data);
}

double reference_mse(const Dataset& data, const AdditiveModel& g) {
    double ss = 0.0;
    std::vector<double> x(data.n_cols());
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) x[j] = data.value(i, j);
        const double d = data.response(i) - g.evaluate(x);
        ss += d * d;
    }
    return ss / static_cast<double>(data.n_rows());
}

}  // namespace

BoundReport check_training_bound(const Dataset& data, const AdditiveModel& g,
                                 int max_depth, TvMode tv_mode) {
    if (g.dimension() != data.n_cols())
        throw ConfigError("reference model dimension does not match dataset");
    FitConfig fc;
    fc.max_depth = max_depth;
    Tree tree = fit(data, fc);

    std::vector<double> errors = training_error_by_depth(tree, data);
    // a tree that went pure early keeps its final error at deeper levels
    errors.resize(static_cast<std::size_t>(max_depth) + 1, errors.back());

    const double ref = reference_mse(data, g);
    BoundReport report;
    report.tv_mode = tv_mode;
    report.tv_value = tv_value_for(g, data, tv_mode);
    const double tv_sq = report.tv_value * report.tv_value;

    for (int k = 0; k <= max_depth; ++k) {
        BoundRow row;
        row.depth = k;
        row.excess_risk = errors[k] - ref;
        if (k == 0) {
            row.bound = std::numeric_limits<double>::infinity();  // informational row
            row.satisfied = true;
            row.slack = std::numeric_limits<double>::infinity();
        } else {
            row.bound = tv_sq / static_cast<double>(k + 3);
            row.slack = row.bound - row.excess_risk;
            row.satisfied = row.excess_risk <= row.bound + kBoundTolerance;
        }
        report.all_satisfied = report.all_satisfied && row.satisfied;
        report.rows.push_back(row);
    }
    return report;
}

NodeGainReport check_node_gain_bound(const Tree& tree, const Dataset& data,
                                     const AdditiveModel& g, TvMode tv_mode) {
    if (tree.config().mtry != 0)
        throw ConfigError("node gain certificate needs a tree fitted on all features");
    if (g.dimension() != data.n_cols())
        throw ConfigError("reference model dimension does not match dataset");

    const std::size_t count = tree.nodes().size();
    std::vector<double> sum_y(count, 0.0), sum_y2(count, 0.0), sum_res2(count, 0.0);
    std::vector<std::size_t> node_n(count, 0);
    std::vector<double> x(data.n_cols());
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) x[j] = data.value(i, j);
        const double y = data.response(i);
        const double r = y - g.evaluate(x);
        std::size_t id = 0;
        for (;;) {
            sum_y[id] += y;
            sum_y2[id] += y * y;
            sum_res2[id] += r * r;
            node_n[id] += 1;
            const TreeNode& node = tree.node(id);
            if (node.is_leaf()) break;
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
    }

    NodeGainReport report;
    report.tv_mode = tv_mode;
    report.tv_value = tv_value_for(g, data, tv_mode);
    const double tv_sq = report.tv_value * report.tv_value;

    for (std::uint32_t id = 0; id < count; ++id) {
        const TreeNode& node = tree.node(id);
        if (node.is_leaf()) continue;
        const double m = static_cast<double>(node_n[id]);
        const double mean = sum_y[id] / m;
        const double node_impurity = std::max(0.0, sum_y2[id] / m - mean * mean);
        const double excess = node_impurity - sum_res2[id] / m;
        if (excess < 0.0) continue;  // certificate only binds when R(t) >= 0
        NodeGainRow row;
        row.node = id;
        row.depth = node.depth;
        row.node_excess = excess;
        row.gain = node.gain;
        row.bound = tv_sq == 0.0 ? 0.0 : excess * excess / tv_sq;
        row.satisfied = row.gain >= row.bound - kBoundTolerance;
        report.all_satisfied = report.all_satisfied && row.satisfied;
        report.rows.push_back(row);
    }
    return report;
}

std::vector<double> per_feature_best_gains(const Dataset& data,
                                           std::span<const std::uint32_t> rows) {
    std::vector<double> gains(data.n_cols(), 0.0);
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        auto cand = best_split(data, rows, j);
        gains[j] = cand ? cand->gain : 0.0;
    }
    return gains;
}

double mtry_exact_expectation(std::span<const double> gains, std::size_t q) {
    const std::size_t p = gains.size();
    if (q < 1 || q > p) throw ConfigError(fmt::format("q {} out of range [1, {}]", q, p));
    if (p > 25) throw ConfigError("exact subset enumeration is limited to p <= 25");
    double total = 0.0;
    std::size_t subsets = 0;
    const std::uint32_t full = p == 32 ? 0xFFFFFFFFu : ((1u << p) - 1u);
    for (std::uint32_t mask = (1u << q) - 1u; mask <= full;) {
        double best = 0.0;
        for (std::size_t j = 0; j < p; ++j)
            if (mask & (1u << j)) best = std::max(best, gains[j]);
        total += best;
        ++subsets;
        // Gosper's hack: next mask with the same popcount
        const std::uint32_t c = mask & (0u - mask);
        const std::uint32_t r = mask + c;
        if (r > full || r < mask) break;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    return total / static_cast<double>(subsets);
}

MtryCheck check_mtry_bound(const Dataset& data, std::span<const std::uint32_t> rows,
                           std::size_t q, std::size_t draws, std::uint64_t seed) {
    if (rows.empty()) throw ConfigError("mtry check needs a nonempty node");
    if (draws < 100) throw ConfigError("mtry check needs at least 100 draws");
    const std::size_t p = data.n_cols();
    if (q < 1 || q > p) throw ConfigError(fmt::format("q {} out of range [1, {}]", q, p));

    const std::vector<double> gains = per_feature_best_gains(data, rows);
    MtryCheck check;
    check.full_max_gain = *std::max_element(gains.begin(), gains.end());
    check.lower_bound =
        static_cast<double>(q) / static_cast<double>(p) * check.full_max_gain;

    Rng rng(seed);
    std::vector<std::uint32_t> pool(p);
    // Compensated sums: with q = p every draw is the same value and the SE is
    // exactly zero, so the mean must not pick up summation noise.
    double sum = 0.0, sum_c = 0.0, sum_sq = 0.0, sq_c = 0.0;
    auto add = [](double& acc, double& comp, double v) {
        const double y = v - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    };
    for (std::size_t d = 0; d < draws; ++d) {
        std::iota(pool.begin(), pool.end(), 0u);
        double best = 0.0;
        for (std::size_t i = 0; i < q; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.next_below(p - i));
            std::swap(pool[i], pool[j]);
            best = std::max(best, gains[pool[i]]);
        }
        add(sum, sum_c, best);
        add(sum_sq, sq_c, best * best);
    }
    const double m = static_cast<double>(draws);
    check.mc_mean = sum / m;
    const double var = std::max(0.0, sum_sq / m - check.mc_mean * check.mc_mean);
    check.mc_std_error = std::sqrt(var / m);
    if (p <= 12) check.exact_expectation = mtry_exact_expectation(gains, q);
    check.satisfied = check.mc_mean >= check.lower_bound - 3.0 * check.mc_std_error;
    return check;
}

TreeIdentityStats tree_identity_stats(const Tree& tree, const Dataset& data) {
    TreeIdentityStats stats;
    const std::size_t n = data.n_rows();
    const std::size_t count = tree.nodes().size();

    std::vector<std::vector<std::uint32_t>> members(count);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::size_t id = 0;
        for (;;) {
            members[id].push_back(i);
            const TreeNode& node = tree.node(id);
            if (node.is_leaf()) break;
            id = data.value(i, node.feature) <= node.threshold ? node.left : node.right;
        }
    }

    // Gain identity at every admissible split of every feature, both
    // formulas computed from shared prefix sums of the centered responses.
    std::vector<std::uint32_t> order;
    for (std::size_t id = 0; id < count; ++id) {
        const auto& rows = members[id];
        const std::size_t m = rows.size();
        if (m < 2) continue;
        double mean = 0.0;
        for (std::uint32_t r : rows) mean += data.response(r);
        mean /= static_cast<double>(m);
        double total_q = 0.0;
        for (std::uint32_t r : rows) {
            const double z = data.response(r) - mean;
            total_q += z * z;
        }
        for (std::size_t j = 0; j < data.n_cols(); ++j) {
            order.assign(rows.begin(), rows.end());
            std::stable_sort(order.begin(), order.end(),
                             [&](std::uint32_t a, std::uint32_t b) {
                                 return data.value(a, j) < data.value(b, j);
                             });
            double sl = 0.0, ql = 0.0;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                const double z = data.response(order[i]) - mean;
                sl += z;
                ql += z * z;
                if (!(data.value(order[i], j) < data.value(order[i + 1], j))) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(m - i - 1);
                const double nm = static_cast<double>(m);
                const double pl = nl / nm, pr = nr / nm;
                const double sr = -sl;  // centered responses sum to zero
                // weighted-impurity form
                const double imp_t = total_q / nm;
                const double imp_l = ql / nl - (sl / nl) * (sl / nl);
                const double imp_r = (total_q - ql) / nr - (sr / nr) * (sr / nr);
                const double lhs = imp_t - (pl * imp_l + pr * imp_r);
                // squared inner product with the standardized stump
                const double inner = (sl * pr - sr * pl) / (nm * std::sqrt(pl * pr));
                const double rhs = inner * inner;
                stats.max_gain_gap = std::max(stats.max_gain_gap, std::abs(lhs - rhs));
            }
        }
    }

    // Gram matrix of {1} and the unit-norm stumps over the training rows.
    StumpExpansion expansion = stump_expansion(tree, data);
    const auto& terms = expansion.terms();
    std::vector<std::vector<double>> stump_values(terms.size(),
                                                  std::vector<double>(n, 0.0));
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto& term = terms[t];
        const TreeNode& node = tree.node(term.node);
        const double scale = 1.0 / std::sqrt(term.weight * term.p_left * term.p_right);
        for (std::uint32_t r : members[term.node]) {
            const bool left = data.value(r, node.feature) <= node.threshold;
            stump_values[t][r] = left ? term.p_right * scale : -term.p_left * scale;
        }
    }
    for (std::size_t a = 0; a < terms.size(); ++a) {
        double with_one = 0.0;
        for (std::size_t i = 0; i < n; ++i) with_one += stump_values[a][i];
        stats.max_gram_deviation =
            std::max(stats.max_gram_deviation, std::abs(with_one / static_cast<double>(n)));
        for (std::size_t b = a; b < terms.size(); ++b) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += stump_values[a][i] * stump_values[b][i];
            dot /= static_cast<double>(n);
            const double target = a == b ? 1.0 : 0.0;
            stats.max_gram_deviation =
                std::max(stats.max_gram_deviation, std::abs(dot - target));
        }
    }

    // Expansion reproduces the leaf means at the training rows.
    std::vector<double> x(data.n_cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) x[j] = data.value(i, j);
        const double gap = std::abs(expansion.evaluate(tree, x) - tree.predict(x));
        stats.max_expansion_gap = std::max(stats.max_expansion_gap, gap);
    }

    // Per-level training error recursion and monotonicity.
    std::vector<double> errors = training_error_by_depth(tree, data);
    for (std::size_t k = 1; k < errors.size(); ++k) {
        if (errors[k] > errors[k - 1] + 1e-12) stats.monotone = false;
        double level_sum = 0.0;
        for (const auto& term : terms)
            if (tree.node(term.node).depth == static_cast<int>(k - 1))
                level_sum += term.coefficient * term.coefficient;
        const double gap = std::abs(errors[k] - (errors[k - 1] - level_sum));
        stats.max_recursion_gap = std::max(stats.max_recursion_gap, gap);
    }
    return stats;
}

std::vector<ComponentFn> demo_active_components() {
    std::vector<ComponentFn> active;
    active.push_back(ComponentFn::step({0.5}, {0.0, 1.0}));
    active.push_back(ComponentFn::linear(1.0, 0.0));
    active.push_back(ComponentFn::piecewise_linear({0.0, 0.5, 1.0}, {0.0, 1.0, 0.25}));
    return active;
}

int depth_schedule(std::uint64_t n) {
    if (n == 0) throw ConfigError("need n >= 1");
    // floor(log2(n)/2) == floor(floor(log2 n)/2), so integer arithmetic is
    // exact for all n up to 2^63
    const int floor_log2 = std::bit_width(n) - 1;
    return floor_log2 / 2;
}

std::size_t dimension_schedule(std::uint64_t n, double c, double xi, std::size_t p_max,
                               bool* capped) {
    if (c <= 0.0) throw ConfigError("schedule constant c must be > 0");
    if (!(xi > 0.5 && xi <= 1.0)) throw ConfigError("schedule exponent xi must lie in (1/2, 1]");
    if (p_max < 1) throw ConfigError("p_max must be >= 1");
    const double value = std::exp(c * std::pow(static_cast<double>(n), 1.0 - xi));
    if (capped) *capped = false;
    if (!(value < static_cast<double>(p_max) + 1.0)) {
        if (capped) *capped = true;
        return p_max;
    }
    const std::size_t p = static_cast<std::size_t>(std::floor(value));
    return std::max<std::size_t>(1, p);
}

ExperimentReport consistency_experiment(const std::vector<ComponentFn>& active_components,
                                        const ExperimentConfig& config) {
    if (config.n_grid.empty()) throw ConfigError("empty n grid");
    for (std::size_t i = 1; i < config.n_grid.size(); ++i)
        if (config.n_grid[i] <= config.n_grid[i - 1])
            throw ConfigError("n grid must be strictly increasing");
    if (config.test_size < 1) throw ConfigError("test_size must be >= 1");
    if (active_components.empty()) throw ConfigError("need at least one active component");

    ExperimentReport report;
    report.engine = config.engine == ExperimentEngine::tree ? "tree" : "forest";

    for (std::size_t gi = 0; gi < config.n_grid.size(); ++gi) {
        const std::size_t n = config.n_grid[gi];
        std::size_t p = dimension_schedule(n, config.schedule_c, config.schedule_xi,
                                           config.p_max);
        p = std::max(p, active_components.size());
        const int depth = depth_schedule(n);

        std::vector<ComponentFn> components = active_components;
        while (components.size() < p) components.push_back(ComponentFn::constant(0.0));
        AdditiveModel model(std::move(components));

        GenerateOptions train_opts;
        train_opts.n = n;
        train_opts.noise_sd = config.noise_sd;
        train_opts.seed = derive_seed(config.seed, 2 * gi);
        Dataset train = generate_additive(model, train_opts);

        GenerateOptions test_opts;
        test_opts.n = config.test_size;
        test_opts.noise_sd = 0.0;  // held-out target is the noiseless mean
        test_opts.seed = derive_seed(config.seed, 2 * gi + 1);
        Dataset test = generate_additive(model, test_opts);

        ExperimentRow row;
        row.n = n;
        row.p = p;
        row.depth = depth;
        row.seed = config.seed;
        row.bound_rate =
            4.0 * model.tv_norm_analytic() / (std::log2(static_cast<double>(n)) + 6.0);

        auto test_error = [&](auto&& predictor) {
            double ss = 0.0;
            std::vector<double> x(p);
            for (std::size_t i = 0; i < test.n_rows(); ++i) {
                for (std::size_t j = 0; j < p; ++j) x[j] = test.value(i, j);
                const double d = test.response(i) - predictor(x);
                ss += d * d;
            }
            return ss / static_cast<double>(test.n_rows());
        };

        if (config.engine == ExperimentEngine::tree) {
            FitConfig fc;
            fc.max_depth = depth;
            fc.seed = derive_seed(config.seed, 1000 + gi);
            Tree tree = fit(train, fc);
            row.q = 0;
            row.n_trees = 1;
            row.train_mse = training_error(tree, train);
            row.test_mse = test_error([&](const std::vector<double>& x) {
                return tree.predict(x);
            });
        } else {
            ForestConfig fc;
            fc.max_depth = depth;
            fc.mtry = config.mtry == 0
                          ? default_mtry(p)
                          : static_cast<int>(std::min(config.mtry, p));
            fc.n_trees = config.n_trees;
            fc.master_seed = derive_seed(config.seed, 1000 + gi);
            fc.threads = config.threads;
            Forest forest = fit_forest(train, fc);
            row.q = static_cast<std::size_t>(fc.mtry);
            row.n_trees = fc.n_trees;
            double ss = 0.0;
            std::vector<double> x(p);
            for (std::size_t i = 0; i < train.n_rows(); ++i) {
                for (std::size_t j = 0; j < p; ++j) x[j] = train.value(i, j);
                const double d = train.response(i) - forest.predict(x);
                ss += d * d;
            }
            row.train_mse = ss / static_cast<double>(train.n_rows());
            row.test_mse = test_error([&](const std::vector<double>& x) {
                return forest.predict(x);
            });
        }
        report.rows.push_back(row);
    }
    return report;
}

AdditiveModel random_additive_model(std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ComponentFn> components;
    components.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        const double pick = rng.next_double();
        if (pick < 0.3) {
            components.push_back(ComponentFn::constant(2.0 * rng.next_double() - 1.0));
        } else if (pick < 0.55) {
            components.push_back(ComponentFn::linear(4.0 * rng.next_double() - 2.0,
                                                     2.0 * rng.next_double() - 1.0));
        } else if (pick < 0.8) {
            const std::size_t breaks = 1 + rng.next_below(3);
            std::vector<double> bs(breaks);
            for (double& b : bs) b = 0.05 + 0.9 * rng.next_double();
            std::sort(bs.begin(), bs.end());
            bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
            std::vector<double> levels(bs.size() + 1);
            for (double& l : levels) l = 2.0 * rng.next_double() - 1.0;
            components.push_back(ComponentFn::step(std::move(bs), std::move(levels)));
        } else {
            const std::size_t inner = 1 + rng.next_below(3);
            std::vector<double> knots{0.0};
            for (std::size_t k = 0; k < inner; ++k)
                knots.push_back(0.05 + 0.9 * rng.next_double());
            knots.push_back(1.0);
            std::sort(knots.begin(), knots.end());
            knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
            std::vector<double> values(knots.size());
            for (double& v : values) v = 2.0 * rng.next_double() - 1.0;
            components.push_back(
                ComponentFn::piecewise_linear(std::move(knots), std::move(values)));
        }
    }
    return AdditiveModel(std::move(components));
}

CorpusInstance make_corpus_instance(std::size_t index, const CorpusOptions& options) {
    const std::uint64_t base = derive_seed(options.seed, index);
    Rng rng(base);
    const std::size_t n =
        options.min_rows + rng.next_below(options.max_rows - options.min_rows + 1);
    const std::size_t p =
        options.min_cols + rng.next_below(options.max_cols - options.min_cols + 1);

    AdditiveModel truth = random_additive_model(p, rng.next_u64());
    const bool well_specified = index % 2 == 0;
    AdditiveModel reference =
        well_specified ? truth : random_additive_model(p, rng.next_u64());

    GenerateOptions opts;
    opts.n = n;
    opts.noise_sd = 0.5 * rng.next_double();
    opts.law = index % 4 < 2 ? FeatureLaw::uniform01 : FeatureLaw::correlated_gaussian;
    opts.rho = 0.5;
    opts.seed = rng.next_u64();
    Dataset data = generate_additive(truth, opts);
    return CorpusInstance{std::move(data), std::move(reference)};
}

}  // namespace cartlab
