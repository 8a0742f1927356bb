#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cartlab/dataset.hpp"
#include "cartlab/tree.hpp"

namespace cartlab {

enum class ResampleMode { bootstrap, subsample, none };

std::string to_string(ResampleMode mode);
ResampleMode resample_mode_from_string(const std::string& text);

struct ForestConfig {
    int max_depth = 0;
    /// mtry; 0 picks the regression default floor(p/3), clamped to >= 1.
    int mtry = 0;
    int n_trees = 1;
    ResampleMode resample = ResampleMode::bootstrap;
    /// Subsample size for ResampleMode::subsample; 0 picks floor(0.632 n).
    std::size_t subsample_size = 0;
    std::uint64_t master_seed = 0;
    int threads = 1;
};

/// Bagged ensemble of depth-bounded CART trees with per-node feature
/// subsampling. Tree m is fully determined by (master_seed, m), so the
/// ensemble is reproducible independent of the parallel schedule.
class Forest {
public:
    const std::vector<Tree>& trees() const { return trees_; }
    const std::vector<std::vector<std::uint32_t>>& resample_indices() const {
        return indices_;
    }
    const ForestConfig& config() const { return config_; }

    double predict(std::span<const double> x) const;

private:
    friend Forest fit_forest(const Dataset&, const ForestConfig&);
    friend Forest forest_from_json(const std::string&);
    std::vector<Tree> trees_;
    std::vector<std::vector<std::uint32_t>> indices_;
    ForestConfig config_;
};

Forest fit_forest(const Dataset& data, const ForestConfig& config);

int default_mtry(std::size_t p);

/// Chance that a fixed feature lands in a uniform without-replacement
/// subset of size q out of p; equals q/p.
double mtry_inclusion_probability(std::size_t p, std::size_t q);

/// Monte-Carlo companion: empirical inclusion frequency of feature 0 over
/// `draws` subsets.
double mtry_inclusion_monte_carlo(std::size_t p, std::size_t q, std::size_t draws,
                                  std::uint64_t seed);

std::string forest_to_json(const Forest& forest);
Forest forest_from_json(const std::string& text);

}  // namespace cartlab
