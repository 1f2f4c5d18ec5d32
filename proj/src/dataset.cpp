#include "sbnet/dataset.hpp"

#include "sbnet/errors.hpp"

#include <algorithm>
#include <cmath>

namespace sbnet {

std::size_t Dataset::treated_count() const noexcept {
    return static_cast<std::size_t>(std::count(t.begin(), t.end(), 1.0));
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.x = take_rows(x, idx);
    out.t.reserve(idx.size());
    out.y.reserve(idx.size());
    for (std::size_t i : idx) {
        out.t.push_back(t.at(i));
        out.y.push_back(y.at(i));
    }
    out.true_ate = true_ate;
    out.source = source;
    out.covariate_names = covariate_names;
    return out;
}

void Dataset::validate() const {
    if (t.size() != n() || y.size() != n()) {
        throw DimensionError("Dataset: X has " + std::to_string(n()) + " rows but |T|=" +
                             std::to_string(t.size()) + ", |Y|=" + std::to_string(y.size()));
    }
    require_binary(t, "Dataset treatment");
    if (!x.all_finite()) throw NumericalError("Dataset: non-finite covariate");
    for (double v : y)
        if (!std::isfinite(v)) throw NumericalError("Dataset: non-finite outcome");
}

void require_binary(std::span<const double> t, const char* what) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != 0.0 && t[i] != 1.0) {
            throw InvalidArgument(std::string(what) + ": entry " + std::to_string(i) +
                                  " is not 0/1");
        }
    }
}

}  // namespace sbnet
