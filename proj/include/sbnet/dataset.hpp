#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbnet/linalg.hpp"

namespace sbnet {

/// Covariates X (n x k), binary treatment T and real outcome Y.
struct Dataset {
    Matrix x;
    std::vector<double> t;
    std::vector<double> y;
    std::optional<double> true_ate;
    std::string source;
    std::vector<std::string> covariate_names;

    std::size_t n() const noexcept { return x.rows(); }
    std::size_t k() const noexcept { return x.cols(); }
    std::size_t treated_count() const noexcept;
    bool has_both_arms() const noexcept { return treated_count() > 0 && treated_count() < n(); }

    /// Rows in `idx` order; metadata carried over.
    Dataset subset(std::span<const std::size_t> idx) const;

    /// Throws DimensionError on length mismatch, InvalidArgument on
    /// non-binary T, NumericalError on non-finite entries.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws InvalidArgument unless every entry is exactly 0 or 1.
void require_binary(std::span<const double> t, const char* what);

}  // namespace sbnet
