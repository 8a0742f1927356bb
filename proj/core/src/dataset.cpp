#include "cartlab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "cartlab/error.hpp"

namespace cartlab {

namespace {

std::vector<std::uint32_t> argsort_stable(std::span<const double> values) {
    std::vector<std::uint32_t> order(values.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
    return order;
}

}  // namespace

Dataset::Dataset(std::vector<std::vector<double>> columns, std::vector<double> response)
    : columns_(std::move(columns)), response_(std::move(response)) {
    p_ = columns_.size();
    if (p_ == 0) throw ConfigError("dataset needs at least one feature column");
    n_ = columns_[0].size();
    if (n_ == 0) throw ConfigError("dataset needs at least one row");
    if (response_.size() != n_)
        throw ConfigError(fmt::format("response length {} does not match row count {}",
                                      response_.size(), n_));
    for (std::size_t j = 0; j < p_; ++j) {
        if (columns_[j].size() != n_)
            throw ConfigError(fmt::format("column {} has {} rows, expected {}", j,
                                          columns_[j].size(), n_));
        for (double v : columns_[j])
            if (!std::isfinite(v))
                throw ConfigError(fmt::format("non-finite value in column {}", j));
    }
    for (double y : response_)
        if (!std::isfinite(y)) throw ConfigError("non-finite response value");
    sort_index_.reserve(p_);
    for (std::size_t j = 0; j < p_; ++j) sort_index_.push_back(argsort_stable(columns_[j]));
}

std::vector<double> Dataset::row(std::size_t i) const {
    std::vector<double> out(p_);
    for (std::size_t j = 0; j < p_; ++j) out[j] = columns_[j][i];
    return out;
}

Dataset Dataset::subset(std::span<const std::uint32_t> rows) const {
    std::vector<std::vector<double>> cols(p_);
    std::vector<double> resp;
    resp.reserve(rows.size());
    for (std::size_t j = 0; j < p_; ++j) {
        cols[j].reserve(rows.size());
        for (std::uint32_t r : rows) cols[j].push_back(columns_[j][r]);
    }
    for (std::uint32_t r : rows) resp.push_back(response_[r]);
    return Dataset(std::move(cols), std::move(resp));
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path));

    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (lineno == 1 && options.has_header) {
            header = cells;
            continue;
        }
        std::vector<double> parsed(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& s = cells[c];
            const char* first = s.data();
            const char* last = s.data() + s.size();
            while (first != last && (*first == ' ' || *first == '\t')) ++first;
            while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last)
                throw ParseError(fmt::format("non-numeric cell '{}' at row {}, col {}", s,
                                             lineno, c + 1));
            parsed[c] = v;
        }
        if (!rows.empty() && parsed.size() != rows.front().size())
            throw ParseError(fmt::format("row {} has {} cells, expected {}", lineno,
                                         parsed.size(), rows.front().size()));
        rows.push_back(std::move(parsed));
    }
    if (rows.empty()) throw ParseError("no rows");

    const std::size_t width = rows.front().size();
    int resp = options.response_index;
    if (!options.response_name.empty()) {
        auto it = std::find(header.begin(), header.end(), options.response_name);
        if (it == header.end())
            throw ConfigError(fmt::format("response column '{}' not found",
                                          options.response_name));
        resp = static_cast<int>(it - header.begin());
    }
    if (resp < 0) resp = static_cast<int>(width) - 1;
    if (resp >= static_cast<int>(width))
        throw ConfigError(fmt::format("response column index {} out of range (width {})",
                                      resp, width));
    if (width < 2) throw ConfigError("need at least one feature column besides the response");

    std::vector<std::vector<double>> cols(width - 1, std::vector<double>(rows.size()));
    std::vector<double> response(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::size_t k = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (static_cast<int>(c) == resp)
                response[i] = rows[i][c];
            else
                cols[k++][i] = rows[i][c];
        }
    }
    return Dataset(std::move(cols), std::move(response));
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    for (std::size_t j = 0; j < data.n_cols(); ++j) out << fmt::format("x{},", j + 1);
    out << "y\n";
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j)
            out << fmt::format("{},", data.value(i, j));
        out << fmt::format("{}\n", data.response(i));
    }
}

Dataset augment_interactions(const Dataset& data) {
    const std::size_t p = data.n_cols();
    if (p < 2) {
        Dataset copy = data;
        copy.augmentation_skipped_ = true;
        return copy;
    }
    std::vector<std::vector<double>> cols;
    cols.reserve(p + p * (p - 1) / 2);
    for (std::size_t j = 0; j < p; ++j)
        cols.emplace_back(data.column(j).begin(), data.column(j).end());
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = j + 1; k < p; ++k) {
            std::vector<double> prod(data.n_rows());
            for (std::size_t i = 0; i < data.n_rows(); ++i)
                prod[i] = data.value(i, j) * data.value(i, k);
            cols.push_back(std::move(prod));
        }
    std::vector<double> resp(data.responses().begin(), data.responses().end());
    return Dataset(std::move(cols), std::move(resp));
}

}  // namespace cartlab
