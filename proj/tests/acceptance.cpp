// Acceptance gate: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.
// argv[1] must be the path to the CLI binary (used by the determinism check).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cartlab/dataset.hpp"
#include "cartlab/forest.hpp"
#include "cartlab/model.hpp"
#include "cartlab/prune.hpp"
#include "cartlab/rng.hpp"
#include "cartlab/tree.hpp"
#include "cartlab/verify.hpp"

using namespace cartlab;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    fmt::print("[{:2}] {} {}\n", id, pass ? "PASS" : "FAIL", detail);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- criteria 1-3: identity corpus (100 datasets, n <= 200, p <= 10) ----

void run_identity_criteria(const std::vector<CorpusInstance>& corpus,
                           const std::vector<Tree>& trees) {
    const auto start = Clock::now();
    double gain_gap = 0.0, gram = 0.0, expansion = 0.0, recursion = 0.0;
    bool monotone = true;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        TreeIdentityStats stats = tree_identity_stats(trees[i], corpus[i].data);
        gain_gap = std::max(gain_gap, stats.max_gain_gap);
        gram = std::max(gram, stats.max_gram_deviation);
        expansion = std::max(expansion, stats.max_expansion_gap);
        recursion = std::max(recursion, stats.max_recursion_gap);
        monotone = monotone && stats.monotone;
    }
    const double elapsed = seconds_since(start);
    report(1, gain_gap <= 1e-10 && elapsed < 10.0,
           fmt::format("gain identity: max gap {:.3e} (tol 1e-10), {:.2f}s (< 10s)",
                       gain_gap, elapsed));
    report(2, gram <= 1e-9 && expansion <= 1e-9 && elapsed < 10.0,
           fmt::format("orthogonal expansion: Gram dev {:.3e}, reproduction gap {:.3e} "
                       "(tol 1e-9), {:.2f}s (< 10s)",
                       gram, expansion, elapsed));
    report(3, recursion <= 1e-9 && monotone,
           fmt::format("training recursion: max gap {:.3e} (tol 1e-9), monotone: {}",
                       recursion, monotone ? "yes" : "no"));
}

// ---- criteria 4-5: bound corpus (200 pairs, n in [10,300], p in [1,20]) ----

void run_bound_criteria() {
    CorpusOptions opts;
    opts.seed = 2001;
    const auto start = Clock::now();
    std::size_t lemma2_checks = 0, lemma2_violations = 0;
    std::size_t gain_checks = 0, gain_violations = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        CorpusInstance inst = make_corpus_instance(i, opts);
        FitConfig fc;
        fc.max_depth = 10;
        Tree tree = fit(inst.data, fc);
        for (TvMode mode : {TvMode::analytic, TvMode::empirical}) {
            BoundReport bound = check_training_bound(inst.data, inst.g, 10, mode);
            for (const BoundRow& row : bound.rows)
                if (row.depth >= 1) {
                    ++lemma2_checks;
                    if (!row.satisfied) ++lemma2_violations;
                }
            NodeGainReport node = check_node_gain_bound(tree, inst.data, inst.g, mode);
            for (const NodeGainRow& row : node.rows) {
                ++gain_checks;
                if (!row.satisfied) ++gain_violations;
            }
        }
    }
    const double elapsed = seconds_since(start);
    report(4, lemma2_violations == 0 && elapsed < 60.0,
           fmt::format("depth-K training bound: {} violations / {} checks "
                       "(200 pairs, K=1..10, both TV modes), {:.2f}s (< 60s)",
                       lemma2_violations, lemma2_checks, elapsed));
    report(5, gain_violations == 0,
           fmt::format("per-node gain bound: {} violations / {} splits checked",
                       gain_violations, gain_checks));
}

// ---- criterion 6: feature-subset expectation bound ----

void run_mtry_criterion() {
    CorpusOptions opts;
    opts.min_cols = 2;
    opts.max_cols = 12;
    opts.seed = 3001;
    std::size_t checks = 0, exact_violations = 0, mc_violations = 0;
    for (std::size_t i = 0; i < 25; ++i) {
        CorpusInstance inst = make_corpus_instance(i, opts);
        std::vector<std::uint32_t> rows(inst.data.n_rows());
        std::iota(rows.begin(), rows.end(), 0u);
        auto gains = per_feature_best_gains(inst.data, rows);
        const double full_max = *std::max_element(gains.begin(), gains.end());
        const std::size_t p = gains.size();
        Rng rng(derive_seed(3001, 90000 + i));
        const std::size_t q = 1 + static_cast<std::size_t>(rng.next_below(p));
        const double exact = mtry_exact_expectation(gains, q);
        const double bound = static_cast<double>(q) / static_cast<double>(p) * full_max;
        ++checks;
        if (!(exact >= bound)) ++exact_violations;  // zero tolerance
        MtryCheck mc = check_mtry_bound(inst.data, rows, q, 100000,
                                        derive_seed(3001, 91000 + i));
        if (std::abs(mc.mc_mean - exact) > 3.0 * mc.mc_std_error + 1e-15)
            ++mc_violations;
    }
    report(6, exact_violations == 0 && mc_violations == 0,
           fmt::format("feature-subset bound: exact enumeration violations {} / {}, "
                       "MC-vs-exact (3 SE at 1e5 draws) violations {}",
                       exact_violations, checks, mc_violations));
}

// ---- criterion 7: degenerate forest equals the single tree ----

void run_degeneracy_criterion(const std::vector<CorpusInstance>& corpus,
                              const std::vector<Tree>& trees) {
    std::size_t mismatches = 0, points = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Dataset& data = corpus[i].data;
        ForestConfig fc;
        fc.max_depth = trees[i].config().max_depth;
        fc.mtry = static_cast<int>(data.n_cols());
        fc.n_trees = 1;
        fc.resample = ResampleMode::none;
        Forest forest = fit_forest(data, fc);
        Rng rng(derive_seed(4001, i));
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> x(data.n_cols());
            for (double& v : x) v = rng.next_double();
            ++points;
            if (forest.predict(x) != trees[i].predict(x)) ++mismatches;
        }
    }
    report(7, mismatches == 0,
           fmt::format("forest degeneracy (q=p, M=1, no resample): {} mismatches on "
                       "{} test points (exact equality)",
                       mismatches, points));
}

// ---- criterion 8: pruning optimality vs brute force ----

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

void enumerate_subtrees(const Tree& tree, const std::vector<double>& sse, std::size_t id,
                        std::vector<std::pair<double, std::size_t>>& out) {
    out.clear();
    const TreeNode& node = tree.node(id);
    out.push_back({sse[id], 1});
    if (node.is_leaf()) return;
    std::vector<std::pair<double, std::size_t>> left, right;
    enumerate_subtrees(tree, sse, node.left, left);
    enumerate_subtrees(tree, sse, node.right, right);
    for (const auto& l : left)
        for (const auto& r : right)
            out.push_back({l.first + r.first, l.second + r.second});
}

void run_pruning_criterion(const std::vector<CorpusInstance>& corpus) {
    std::size_t checked_trees = 0, checks = 0, violations = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Dataset& data = corpus[i].data;
        FitConfig fc;
        fc.max_depth = 3;
        Tree tree = fit(data, fc);
        if (tree.internal_count() == 0 || tree.internal_count() > 12) continue;
        ++checked_trees;
        const double n = static_cast<double>(data.n_rows());
        const double log_np = std::log(n * static_cast<double>(data.n_cols()));
        std::vector<std::pair<double, std::size_t>> options;
        enumerate_subtrees(tree, node_sse(tree, data), 0, options);
        Rng rng(derive_seed(5001, i));
        for (int rep = 0; rep < 5; ++rep) {
            const double alpha = rep == 0 ? 0.0 : rng.next_double();
            const double penalty = alpha * log_np / n;
            double brute = std::numeric_limits<double>::infinity();
            for (const auto& [s, l] : options)
                brute = std::min(brute, s / n + penalty * static_cast<double>(l));
            Tree pruned = prune(tree, data, {alpha});
            const double got = training_error(pruned, data) +
                               penalty * static_cast<double>(pruned.leaf_count());
            ++checks;
            worst = std::max(worst, std::abs(got - brute));
            if (std::abs(got - brute) > 1e-10) ++violations;
        }
    }
    report(8, violations == 0 && checked_trees > 0,
           fmt::format("pruning optimality: {} violations / {} (alpha, tree) checks on "
                       "{} trees with <= 12 internal nodes, worst gap {:.3e} (tol 1e-10)",
                       violations, checks, checked_trees, worst));
}

// ---- criterion 9: consistency trend ----

void run_consistency_criterion() {
    const auto start = Clock::now();
    const std::vector<std::size_t> grid = {256, 1024, 4096};
    std::vector<double> tree_mse(grid.size(), 0.0), forest_mse(grid.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ExperimentConfig config;
        config.n_grid = grid;
        config.noise_sd = 0.5;
        config.test_size = 2000;
        config.schedule_c = 1.0;
        config.schedule_xi = 0.9;
        config.p_max = 200;
        config.seed = seed;
        config.engine = ExperimentEngine::tree;
        ExperimentReport tree_report =
            consistency_experiment(demo_active_components(), config);
        config.engine = ExperimentEngine::forest;
        config.n_trees = 50;
        config.mtry = 0;  // floor(p/3) rule
        ExperimentReport forest_report =
            consistency_experiment(demo_active_components(), config);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            tree_mse[g] += tree_report.rows[g].test_mse / 5.0;
            forest_mse[g] += forest_report.rows[g].test_mse / 5.0;
        }
    }
    bool tree_dec = tree_mse[0] > tree_mse[1] && tree_mse[1] > tree_mse[2];
    bool forest_dec = forest_mse[0] > forest_mse[1] && forest_mse[1] > forest_mse[2];
    bool comparable = forest_mse[2] <= 1.1 * tree_mse[2];
    const double elapsed = seconds_since(start);
    report(9,
           tree_dec && forest_dec && comparable && elapsed < 600.0,
           fmt::format("consistency trend (5-seed avg): tree MSE [{:.4f}, {:.4f}, {:.4f}] "
                       "{}, forest MSE [{:.4f}, {:.4f}, {:.4f}] {}, "
                       "forest/tree at n=4096 = {:.3f} (<= 1.1), {:.1f}s (< 600s)",
                       tree_mse[0], tree_mse[1], tree_mse[2],
                       tree_dec ? "decreasing" : "NOT decreasing", forest_mse[0],
                       forest_mse[1], forest_mse[2],
                       forest_dec ? "decreasing" : "NOT decreasing",
                       forest_mse[2] / tree_mse[2], elapsed));
}

// ---- criterion 10: CLI determinism across reruns and thread counts ----

bool run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = fmt::format("{} {} >/dev/null 2>&1", cli, args);
    return std::system(cmd.c_str()) == 0;
}

void run_determinism_criterion(const std::string& cli) {
    if (cli.empty()) {
        report(10, false, "determinism: CLI path not supplied");
        return;
    }
    const std::string dir = "acceptance_tmp";
    std::system(fmt::format("rm -rf {} && mkdir -p {}", dir, dir).c_str());
    auto path = [&](const std::string& name) { return dir + "/" + name; };

    std::vector<std::string> mismatched;
    auto compare = [&](const std::string& label, const std::string& a,
                       const std::string& b) {
        const std::string ca = slurp(a), cb = slurp(b);
        if (ca.empty() || ca != cb) mismatched.push_back(label);
    };

    bool ok = true;
    ok &= run_cli(cli, fmt::format(
        "synth --random-p 5 --n 200 --noise-sd 0.3 --seed 3 --out {}", path("d1.csv")));
    ok &= run_cli(cli, fmt::format(
        "synth --random-p 5 --n 200 --noise-sd 0.3 --seed 3 --out {}", path("d2.csv")));
    compare("synth", path("d1.csv"), path("d2.csv"));

    for (int rep = 1; rep <= 2; ++rep) {
        ok &= run_cli(cli, fmt::format(
            "train --data {} --depth 4 --seed 5 --out {} --summary {}", path("d1.csv"),
            path(fmt::format("t{}.json", rep)), path(fmt::format("ts{}.csv", rep))));
    }
    compare("train model", path("t1.json"), path("t2.json"));
    compare("train summary", path("ts1.csv"), path("ts2.csv"));

    ok &= run_cli(cli, fmt::format(
        "train --data {} --depth 4 --engine forest --trees 8 --seed 5 --threads 1 "
        "--out {} --summary {}", path("d1.csv"), path("f1.json"), path("fs1.csv")));
    ok &= run_cli(cli, fmt::format(
        "train --data {} --depth 4 --engine forest --trees 8 --seed 5 --threads 4 "
        "--out {} --summary {}", path("d1.csv"), path("f2.json"), path("fs2.csv")));
    compare("forest model across --threads", path("f1.json"), path("f2.json"));
    compare("forest summary across --threads", path("fs1.csv"), path("fs2.csv"));

    for (int rep = 1; rep <= 2; ++rep)
        ok &= run_cli(cli, fmt::format("predict --model {} --data {} --out {}",
                                       path("t1.json"), path("d1.csv"),
                                       path(fmt::format("p{}.csv", rep))));
    compare("predict", path("p1.csv"), path("p2.csv"));

    for (int rep = 1; rep <= 2; ++rep)
        ok &= run_cli(cli, fmt::format(
            "verify --suite lemma2 --corpus 10 --seed 2 --out {} --json {}",
            path(fmt::format("v{}.csv", rep)), path(fmt::format("vj{}.json", rep))));
    compare("verify CSV", path("v1.csv"), path("v2.csv"));
    compare("verify JSON", path("vj1.json"), path("vj2.json"));

    ok &= run_cli(cli, fmt::format(
        "experiment --engine forest --trees 8 --n-grid 64,128 --test-size 200 "
        "--seed 1 --threads 1 --out {}", path("e1.csv")));
    ok &= run_cli(cli, fmt::format(
        "experiment --engine forest --trees 8 --n-grid 64,128 --test-size 200 "
        "--seed 1 --threads 4 --out {}", path("e2.csv")));
    compare("experiment across --threads", path("e1.csv"), path("e2.csv"));

    std::string detail;
    if (!ok)
        detail = "determinism: a CLI invocation failed";
    else if (!mismatched.empty())
        detail = fmt::format("determinism: byte mismatch in {}",
                             fmt::join(mismatched, ", "));
    else
        detail = "determinism: all reruns byte-identical across seeds and --threads";
    report(10, ok && mismatched.empty(), detail);
    std::system(fmt::format("rm -rf {}", dir).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";

    // Shared corpus for criteria 1-3, 7, 8: 100 datasets, n <= 200, p <= 10,
    // depth-5 trees fitted with every feature in play.
    CorpusOptions opts;
    opts.max_rows = 200;
    opts.max_cols = 10;
    opts.seed = 1001;
    std::vector<CorpusInstance> corpus;
    std::vector<Tree> trees;
    for (std::size_t i = 0; i < 100; ++i) {
        corpus.push_back(make_corpus_instance(i, opts));
        FitConfig fc;
        fc.max_depth = 5;
        trees.push_back(fit(corpus.back().data, fc));
    }

    run_identity_criteria(corpus, trees);
    run_bound_criteria();
    run_mtry_criterion();
    run_degeneracy_criterion(corpus, trees);
    run_pruning_criterion(corpus);
    run_consistency_criterion();
    run_determinism_criterion(cli);

    if (failures == 0)
        fmt::print("all acceptance criteria passed\n");
    else
        fmt::print("{} acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
