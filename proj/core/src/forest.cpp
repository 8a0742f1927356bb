#include "cartlab/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "cartlab/error.hpp"
#include "cartlab/rng.hpp"

namespace cartlab {

using nlohmann::json;

std::string to_string(ResampleMode mode) {
    switch (mode) {
        case ResampleMode::bootstrap: return "bootstrap";
        case ResampleMode::subsample: return "subsample";
        case ResampleMode::none: return "none";
    }
    return "bootstrap";
}

ResampleMode resample_mode_from_string(const std::string& text) {
    if (text == "bootstrap") return ResampleMode::bootstrap;
    if (text == "subsample") return ResampleMode::subsample;
    if (text == "none") return ResampleMode::none;
    throw ParseError(fmt::format("unknown resample mode '{}'", text));
}

int default_mtry(std::size_t p) {
    return std::max<int>(1, static_cast<int>(p / 3));
}

namespace {

std::vector<std::uint32_t> draw_resample(std::size_t n, ResampleMode mode,
                                         std::size_t subsample_size, Rng& rng) {
    std::vector<std::uint32_t> indices;
    switch (mode) {
        case ResampleMode::bootstrap:
            indices.resize(n);
            for (auto& idx : indices)
                idx = static_cast<std::uint32_t>(rng.next_below(n));
            break;
        case ResampleMode::subsample: {
            std::size_t a = subsample_size == 0
                                ? static_cast<std::size_t>(0.632 * static_cast<double>(n))
                                : subsample_size;
            a = std::clamp<std::size_t>(a, 1, n);
            // partial Fisher-Yates over 0..n-1
            std::vector<std::uint32_t> pool(n);
            std::iota(pool.begin(), pool.end(), 0u);
            for (std::size_t i = 0; i < a; ++i) {
                std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
                std::swap(pool[i], pool[j]);
            }
            indices.assign(pool.begin(), pool.begin() + a);
            break;
        }
        case ResampleMode::none:
            indices.resize(n);
            std::iota(indices.begin(), indices.end(), 0u);
            break;
    }
    return indices;
}

}  // namespace

Forest fit_forest(const Dataset& data, const ForestConfig& config) {
    const std::size_t p = data.n_cols();
    if (config.n_trees < 1) throw ConfigError("need at least one tree");
    int mtry = config.mtry;
    if (mtry == 0) mtry = default_mtry(p);
    if (mtry < 1 || mtry > static_cast<int>(p))
        throw ConfigError(fmt::format("mtry {} out of range [1, {}]", mtry, p));

    Forest forest;
    forest.config_ = config;
    forest.config_.mtry = mtry;
    forest.trees_.resize(config.n_trees);
    forest.indices_.resize(config.n_trees);

    auto build_tree = [&](int rank) {
        const std::uint64_t tree_seed = derive_seed(config.master_seed, rank);
        Rng rng(tree_seed);
        auto indices =
            draw_resample(data.n_rows(), config.resample, config.subsample_size, rng);
        FitConfig fc;
        fc.max_depth = config.max_depth;
        fc.mtry = mtry == static_cast<int>(p) ? 0 : mtry;
        fc.seed = rng.next_u64();
        if (config.resample == ResampleMode::none) {
            forest.trees_[rank] = fit(data, fc);
        } else {
            Dataset resampled = data.subset(indices);
            forest.trees_[rank] = fit(resampled, fc);
        }
        forest.indices_[rank] = std::move(indices);
    };

    const int threads = std::max(1, config.threads);
    if (threads == 1 || config.n_trees == 1) {
        for (int m = 0; m < config.n_trees; ++m) build_tree(m);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int m = next.fetch_add(1); m < config.n_trees; m = next.fetch_add(1))
                    build_tree(m);
            });
        for (auto& th : pool) th.join();
    }
    return forest;
}

double Forest::predict(std::span<const double> x) const {
    double sum = 0.0;
    for (const Tree& tree : trees_) sum += tree.predict(x);
    return sum / static_cast<double>(trees_.size());
}

double mtry_inclusion_probability(std::size_t p, std::size_t q) {
    if (q < 1 || q > p) throw ConfigError(fmt::format("q {} out of range [1, {}]", q, p));
    return static_cast<double>(q) / static_cast<double>(p);
}

double mtry_inclusion_monte_carlo(std::size_t p, std::size_t q, std::size_t draws,
                                  std::uint64_t seed) {
    if (q < 1 || q > p) throw ConfigError(fmt::format("q {} out of range [1, {}]", q, p));
    Rng rng(seed);
    std::size_t hits = 0;
    std::vector<std::uint32_t> pool(p);
    for (std::size_t d = 0; d < draws; ++d) {
        std::iota(pool.begin(), pool.end(), 0u);
        for (std::size_t i = 0; i < q; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.next_below(p - i));
            std::swap(pool[i], pool[j]);
        }
        for (std::size_t i = 0; i < q; ++i)
            if (pool[i] == 0) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(draws);
}

std::string forest_to_json(const Forest& forest) {
    json j;
    j["q"] = forest.config().mtry;
    j["M"] = forest.config().n_trees;
    j["resample_mode"] = to_string(forest.config().resample);
    j["master_seed"] = forest.config().master_seed;
    j["max_depth"] = forest.config().max_depth;
    j["trees"] = json::array();
    for (const Tree& tree : forest.trees())
        j["trees"].push_back(json::parse(tree_to_json(tree)));
    j["resample_indices"] = forest.resample_indices();
    return j.dump(2);
}

Forest forest_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("forest JSON: {}", e.what()));
    }
    Forest forest;
    try {
        forest.config_.mtry = j.at("q").get<int>();
        forest.config_.n_trees = j.at("M").get<int>();
        forest.config_.resample = resample_mode_from_string(j.at("resample_mode"));
        forest.config_.master_seed = j.at("master_seed").get<std::uint64_t>();
        forest.config_.max_depth = j.value("max_depth", 0);
        for (const auto& tj : j.at("trees"))
            forest.trees_.push_back(tree_from_json(tj.dump()));
        if (j.contains("resample_indices"))
            forest.indices_ =
                j["resample_indices"].get<std::vector<std::vector<std::uint32_t>>>();
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("forest JSON: {}", e.what()));
    }
    if (forest.trees_.empty()) throw ParseError("forest JSON: no trees");
    return forest;
}

}  // namespace cartlab
