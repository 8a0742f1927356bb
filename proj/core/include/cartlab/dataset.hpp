#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cartlab {

/// Immutable n x p design matrix with response vector and per-column
/// ascending sort order. Construction validates finiteness and builds the
/// sort indices with a stable sort (ties keep original row order), so split
/// enumeration is reproducible. Safe to share across concurrent tree fits.
class Dataset {
public:
    Dataset(std::vector<std::vector<double>> columns, std::vector<double> response);

    std::size_t n_rows() const { return n_; }
    std::size_t n_cols() const { return p_; }

    double value(std::size_t row, std::size_t col) const { return columns_[col][row]; }
    double response(std::size_t row) const { return response_[row]; }

    std::span<const double> column(std::size_t col) const { return columns_[col]; }
    std::span<const double> responses() const { return response_; }
    std::span<const std::uint32_t> sort_index(std::size_t col) const { return sort_index_[col]; }

    std::vector<double> row(std::size_t i) const;

    /// Rows picked by index (with repeats allowed); used for bootstrap and
    /// subsample resampling. Sort indices are rebuilt for the new rows.
    Dataset subset(std::span<const std::uint32_t> rows) const;

    /// Set when augment_interactions was asked to run on p < 2 and did
    /// nothing.
    bool augmentation_skipped() const { return augmentation_skipped_; }

private:
    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::vector<std::vector<double>> columns_;
    std::vector<double> response_;
    std::vector<std::vector<std::uint32_t>> sort_index_;
    bool augmentation_skipped_ = false;

    friend Dataset augment_interactions(const Dataset& data);
};

struct CsvOptions {
    bool has_header = true;
    /// Column holding the response; by name when nonempty, else by index.
    std::string response_name;
    int response_index = -1;  // -1 means last column
};

/// Reads a rectangular numeric CSV. Non-numeric cells raise ParseError with
/// the offending (row, col); an empty file raises ParseError("no rows").
Dataset load_csv(const std::string& path, const CsvOptions& options = {});

void write_csv(const Dataset& data, const std::string& path);

/// Appends the p(p-1)/2 pairwise product columns X_j * X_j' for j < j' in
/// lexicographic (j, j') order. For p < 2 returns the input unchanged with
/// the skipped flag set.
Dataset augment_interactions(const Dataset& data);

}  // namespace cartlab
