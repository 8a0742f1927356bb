#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cartlab/dataset.hpp"

namespace cartlab {

enum class ComponentKind { constant, linear, step, piecewise_linear };

/// One univariate component of an additive model, defined on a closed
/// interval. Evaluation outside the domain clamps to the nearest endpoint.
///
/// Step functions change value strictly after the breakpoint: for
/// breakpoints b_1 < ... < b_m and levels l_0, ..., l_m the value at x is
/// l_k with k = #{b_i < x} -- the same right-open convention as a tree
/// split sending X > s to the right daughter.
class ComponentFn {
public:
    static ComponentFn constant(double value);
    static ComponentFn linear(double slope, double intercept,
                              double lo = 0.0, double hi = 1.0);
    static ComponentFn step(std::vector<double> breakpoints, std::vector<double> levels,
                            double lo = 0.0, double hi = 1.0);
    static ComponentFn piecewise_linear(std::vector<double> knots, std::vector<double> values);

    ComponentKind kind() const { return kind_; }
    double domain_lo() const { return lo_; }
    double domain_hi() const { return hi_; }
    bool is_constant() const;

    double operator()(double x) const;

    /// Closed-form variation v(g): 0 for constant, |slope| * length for
    /// linear, sum of |level jumps| for step, sum of |value increments| for
    /// piecewise linear.
    double variation() const;

    double slope() const { return slope_; }
    double intercept() const { return intercept_; }
    const std::vector<double>& breakpoints() const { return xs_; }
    const std::vector<double>& levels() const { return ys_; }
    const std::vector<double>& knots() const { return xs_; }
    const std::vector<double>& values() const { return ys_; }

private:
    ComponentFn() = default;
    ComponentKind kind_ = ComponentKind::constant;
    double lo_ = 0.0, hi_ = 1.0;
    double slope_ = 0.0, intercept_ = 0.0;  // linear / constant
    std::vector<double> xs_;                // breakpoints or knots
    std::vector<double> ys_;                // levels or values
};

/// Sum of p univariate components, one per feature.
class AdditiveModel {
public:
    AdditiveModel() = default;
    explicit AdditiveModel(std::vector<ComponentFn> components)
        : components_(std::move(components)) {}

    std::size_t dimension() const { return components_.size(); }
    const ComponentFn& component(std::size_t j) const { return components_[j]; }
    const std::vector<ComponentFn>& components() const { return components_; }

    double evaluate(std::span<const double> x) const;

    /// Sum of closed-form component variations.
    double tv_norm_analytic() const;

    /// Sample-path variation: for each column, sum |g_j(x'_{i+1}) - g_j(x'_i)|
    /// over the column's sorted sample, summed over columns. Never exceeds
    /// the analytic norm when the sample stays inside the domains.
    double tv_norm_empirical(const Dataset& data) const;

    /// Number of nonconstant components.
    std::size_t l0_norm() const;

private:
    std::vector<ComponentFn> components_;
};

enum class FeatureLaw { uniform01, correlated_gaussian };

struct GenerateOptions {
    std::size_t n = 0;
    double noise_sd = 0.0;
    FeatureLaw law = FeatureLaw::uniform01;
    /// Equicorrelation for the Gaussian law; the equicorrelated normals are
    /// pushed through the standard normal CDF so features land in [0, 1].
    double rho = 0.5;
    std::uint64_t seed = 0;
};

/// Draws X_i from the feature law and sets Y_i = g(X_i) + N(0, noise_sd^2).
/// Bit-identical output for a fixed seed.
Dataset generate_additive(const AdditiveModel& model, const GenerateOptions& options);

/// JSON spec round-trip: {"components":[{"kind":...,...}]}.
AdditiveModel model_from_json(const std::string& text);
std::string model_to_json(const AdditiveModel& model);
AdditiveModel load_model(const std::string& path);
void save_model(const AdditiveModel& model, const std::string& path);

}  // namespace cartlab
