#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sbnet/dataset.hpp"
#include "sbnet/linalg.hpp"

namespace sbnet {

/// Numeric CSV: a header row of names and a dense block of finite values.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of `name` in the header, or npos.
    std::size_t find(std::string_view name) const noexcept;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Parses comma-separated numbers. With `has_header` false the columns are
/// named c1..cN. Blank, NaN or non-numeric cells and ragged rows throw
/// DataError naming the line and column. `what` prefixes error messages.
CsvTable read_csv(std::istream& in, const std::string& what, bool has_header = true);

/// Simulation schema: covariate columns (x1..xk unless the dataset carries
/// names), then t, then y. Values are written with 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void save_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Reads the simulation schema: columns `t` and `y` are required, every other
/// column is a covariate in file order.
Dataset read_dataset_csv(std::istream& in, const std::string& what = "dataset");
Dataset load_dataset_csv(const std::filesystem::path& path);

inline constexpr std::size_t kIhdpCovariates = 25;

/// IHDP layout: treatment, y_factual, y_cfactual, mu0, mu1, x1..x25. A file
/// with a header is matched by column name; a headerless file (the usual
/// distribution format) must have exactly these 30 columns in order.
/// true_ate = mean(mu1) - mean(mu0).
Dataset read_ihdp(std::istream& in, const std::string& what = "ihdp");
Dataset load_ihdp(const std::filesystem::path& path);

/// Outcome, education and the covariate columns of the college-proximity
/// wage data.
inline constexpr const char* kCollegeOutcome = "lwage";
inline constexpr const char* kCollegeEducation = "educ";
inline const std::vector<std::string>& college_covariates() {
    static const std::vector<std::string> names = {"exper", "black", "south",
                                                   "married", "smsa", "nearc4"};
    return names;
}

/// T = 1 when years of education exceed 12, Y = log wage. Columns beyond
/// the documented ones are ignored; their names are appended to `ignored`
/// when it is given.
Dataset read_college(std::istream& in, const std::string& what = "college",
                     std::vector<std::string>* ignored = nullptr);
Dataset load_college(const std::filesystem::path& path,
                     std::vector<std::string>* ignored = nullptr);

struct SplitDataset {
    Dataset train;
    Dataset test;
    std::uint64_t split_seed = 0;
    double train_frac = 0.8;
    std::vector<std::size_t> train_rows;  // source row indices
    std::vector<std::size_t> test_rows;
};

/// Seeded shuffle; the first ceil(train_frac * n) rows train, the rest test.
/// Reshuffles (up to 100 times) while the training part misses an arm.
SplitDataset split(const Dataset& data, double train_frac, std::uint64_t seed);

/// Per-column affine map (x - mean) / scale fitted on a training matrix.
/// Columns with zero spread get scale 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Matrix& x);
    Matrix apply(const Matrix& x) const;
    Matrix inverse(const Matrix& z) const;
};

struct StandardizedSplit {
    Dataset train;
    Dataset test;
    Standardizer transform;
};

/// Fits on train covariates only and applies to both; T and Y untouched.
StandardizedSplit standardize(const Dataset& train, const Dataset& test);

}  // namespace sbnet
