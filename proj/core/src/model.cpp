#include "cartlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "cartlab/error.hpp"
#include "cartlab/rng.hpp"

namespace cartlab {

using nlohmann::json;

namespace {

void require_strictly_increasing(const std::vector<double>& xs, const char* what) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1]))
            throw ConfigError(fmt::format("{} must be strictly increasing", what));
}

}  // namespace

ComponentFn ComponentFn::constant(double value) {
    ComponentFn f;
    f.kind_ = ComponentKind::constant;
    f.intercept_ = value;
    return f;
}

ComponentFn ComponentFn::linear(double slope, double intercept, double lo, double hi) {
    if (!(hi > lo)) throw ConfigError("linear component needs a nonempty domain");
    ComponentFn f;
    f.kind_ = ComponentKind::linear;
    f.slope_ = slope;
    f.intercept_ = intercept;
    f.lo_ = lo;
    f.hi_ = hi;
    return f;
}

ComponentFn ComponentFn::step(std::vector<double> breakpoints, std::vector<double> levels,
                              double lo, double hi) {
    if (levels.size() != breakpoints.size() + 1)
        throw ConfigError("step component needs one more level than breakpoints");
    require_strictly_increasing(breakpoints, "step breakpoints");
    for (double b : breakpoints)
        if (b < lo || b > hi) throw ConfigError("step breakpoint outside domain");
    ComponentFn f;
    f.kind_ = ComponentKind::step;
    f.xs_ = std::move(breakpoints);
    f.ys_ = std::move(levels);
    f.lo_ = lo;
    f.hi_ = hi;
    return f;
}

ComponentFn ComponentFn::piecewise_linear(std::vector<double> knots,
                                          std::vector<double> values) {
    if (knots.size() < 2) throw ConfigError("piecewise-linear component needs >= 2 knots");
    if (values.size() != knots.size())
        throw ConfigError("piecewise-linear component needs one value per knot");
    require_strictly_increasing(knots, "piecewise-linear knots");
    ComponentFn f;
    f.kind_ = ComponentKind::piecewise_linear;
    f.lo_ = knots.front();
    f.hi_ = knots.back();
    f.xs_ = std::move(knots);
    f.ys_ = std::move(values);
    return f;
}

bool ComponentFn::is_constant() const {
    switch (kind_) {
        case ComponentKind::constant: return true;
        case ComponentKind::linear: return slope_ == 0.0;
        case ComponentKind::step:
            return std::all_of(ys_.begin(), ys_.end(),
                               [&](double v) { return v == ys_.front(); });
        case ComponentKind::piecewise_linear:
            return std::all_of(ys_.begin(), ys_.end(),
                               [&](double v) { return v == ys_.front(); });
    }
    return false;
}

double ComponentFn::operator()(double x) const {
    x = std::clamp(x, lo_, hi_);
    switch (kind_) {
        case ComponentKind::constant:
            return intercept_;
        case ComponentKind::linear:
            return slope_ * x + intercept_;
        case ComponentKind::step: {
            // level index = number of breakpoints strictly below x
            std::size_t k = std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin();
            if (k > 0 && xs_[k - 1] == x) --k;  // value changes strictly after b
            return ys_[k];
        }
        case ComponentKind::piecewise_linear: {
            auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            if (it == xs_.begin()) return ys_.front();
            if (it == xs_.end()) return ys_.back();
            std::size_t hi = it - xs_.begin();
            std::size_t lo = hi - 1;
            double t = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
            return ys_[lo] + t * (ys_[hi] - ys_[lo]);
        }
    }
    return 0.0;
}

double ComponentFn::variation() const {
    switch (kind_) {
        case ComponentKind::constant:
            return 0.0;
        case ComponentKind::linear:
            return std::abs(slope_) * (hi_ - lo_);
        case ComponentKind::step:
        case ComponentKind::piecewise_linear: {
            double v = 0.0;
            for (std::size_t i = 1; i < ys_.size(); ++i) v += std::abs(ys_[i] - ys_[i - 1]);
            return v;
        }
    }
    return 0.0;
}

double AdditiveModel::evaluate(std::span<const double> x) const {
    if (x.size() != components_.size())
        throw ConfigError(fmt::format("point has dimension {}, model has {}", x.size(),
                                      components_.size()));
    double sum = 0.0;
    for (std::size_t j = 0; j < components_.size(); ++j) sum += components_[j](x[j]);
    return sum;
}

double AdditiveModel::tv_norm_analytic() const {
    double sum = 0.0;
    for (const auto& c : components_) sum += c.variation();
    return sum;
}

double AdditiveModel::tv_norm_empirical(const Dataset& data) const {
    if (data.n_cols() != components_.size())
        throw ConfigError(fmt::format("dataset has {} columns, model has {} components",
                                      data.n_cols(), components_.size()));
    double total = 0.0;
    for (std::size_t j = 0; j < components_.size(); ++j) {
        auto order = data.sort_index(j);
        const ComponentFn& g = components_[j];
        double prev = g(data.value(order[0], j));
        for (std::size_t i = 1; i < order.size(); ++i) {
            double cur = g(data.value(order[i], j));
            total += std::abs(cur - prev);
            prev = cur;
        }
    }
    return total;
}

std::size_t AdditiveModel::l0_norm() const {
    std::size_t count = 0;
    for (const auto& c : components_)
        if (!c.is_constant()) ++count;
    return count;
}

Dataset generate_additive(const AdditiveModel& model, const GenerateOptions& options) {
    const std::size_t p = model.dimension();
    if (p == 0) throw ConfigError("model has no components");
    if (options.n == 0) throw ConfigError("need n >= 1");
    if (options.noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0");
    if (options.law == FeatureLaw::correlated_gaussian &&
        (options.rho < 0.0 || options.rho >= 1.0))
        throw ConfigError("rho must lie in [0, 1)");

    Rng rng(options.seed);
    std::vector<std::vector<double>> cols(p, std::vector<double>(options.n));
    for (std::size_t i = 0; i < options.n; ++i) {
        if (options.law == FeatureLaw::uniform01) {
            for (std::size_t j = 0; j < p; ++j) cols[j][i] = rng.next_double();
        } else {
            // Equicorrelated normals pushed through the standard normal CDF.
            double shared = rng.next_normal();
            double a = std::sqrt(options.rho);
            double b = std::sqrt(1.0 - options.rho);
            for (std::size_t j = 0; j < p; ++j) {
                double z = a * shared + b * rng.next_normal();
                cols[j][i] = 0.5 * std::erfc(-z / std::sqrt(2.0));
            }
        }
    }
    std::vector<double> y(options.n);
    std::vector<double> point(p);
    for (std::size_t i = 0; i < options.n; ++i) {
        for (std::size_t j = 0; j < p; ++j) point[j] = cols[j][i];
        double noise = options.noise_sd > 0.0 ? options.noise_sd * rng.next_normal() : 0.0;
        y[i] = model.evaluate(point) + noise;
    }
    return Dataset(std::move(cols), std::move(y));
}

namespace {

json component_to_json(const ComponentFn& c) {
    json j;
    switch (c.kind()) {
        case ComponentKind::constant:
            j["kind"] = "constant";
            j["value"] = c.intercept();
            break;
        case ComponentKind::linear:
            j["kind"] = "linear";
            j["slope"] = c.slope();
            j["intercept"] = c.intercept();
            j["domain"] = {c.domain_lo(), c.domain_hi()};
            break;
        case ComponentKind::step:
            j["kind"] = "step";
            j["breakpoints"] = c.breakpoints();
            j["levels"] = c.levels();
            j["domain"] = {c.domain_lo(), c.domain_hi()};
            break;
        case ComponentKind::piecewise_linear:
            j["kind"] = "piecewise_linear";
            j["knots"] = c.knots();
            j["values"] = c.values();
            break;
    }
    return j;
}

ComponentFn component_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    double lo = 0.0, hi = 1.0;
    if (j.contains("domain")) {
        lo = j["domain"].at(0).get<double>();
        hi = j["domain"].at(1).get<double>();
    }
    if (kind == "constant") return ComponentFn::constant(j.at("value").get<double>());
    if (kind == "linear")
        return ComponentFn::linear(j.at("slope").get<double>(),
                                   j.at("intercept").get<double>(), lo, hi);
    if (kind == "step")
        return ComponentFn::step(j.at("breakpoints").get<std::vector<double>>(),
                                 j.at("levels").get<std::vector<double>>(), lo, hi);
    if (kind == "piecewise_linear")
        return ComponentFn::piecewise_linear(j.at("knots").get<std::vector<double>>(),
                                             j.at("values").get<std::vector<double>>());
    throw ParseError(fmt::format("unknown component kind '{}'", kind));
}

}  // namespace

AdditiveModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("model JSON: {}", e.what()));
    }
    std::vector<ComponentFn> components;
    try {
        for (const auto& cj : j.at("components")) components.push_back(component_from_json(cj));
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("model JSON: {}", e.what()));
    }
    if (components.empty()) throw ParseError("model JSON: empty component list");
    return AdditiveModel(std::move(components));
}

std::string model_to_json(const AdditiveModel& model) {
    json j;
    j["components"] = json::array();
    for (const auto& c : model.components()) j["components"].push_back(component_to_json(c));
    return j.dump(2);
}

AdditiveModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

void save_model(const AdditiveModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    out << model_to_json(model) << "\n";
}

}  // namespace cartlab
