#include "sbnet/data_io.hpp"

#include "sbnet/errors.hpp"
#include "sbnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

namespace sbnet {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool blank_line(std::string_view line) { return trim(line).empty(); }

bool parse_number(const std::string& cell, double& value) {
    if (cell.empty()) return false;
    char* end = nullptr;
    value = std::strtod(cell.c_str(), &end);
    return end == cell.c_str() + cell.size();
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return in;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t require_column(const CsvTable& table, const std::string& name,
                           const std::string& what) {
    const auto c = table.find(name);
    if (c == CsvTable::npos) throw DataError(what + ": missing column '" + name + "'");
    return c;
}

std::vector<double> column_of(const CsvTable& table, std::size_t c) {
    std::vector<double> out(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) out[r] = table.rows[r][c];
    return out;
}

// Data rows start on line 2 when a header is present.
void require_binary_column(const CsvTable& table, std::size_t c, const std::string& what,
                           std::size_t first_line) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const double v = table.rows[r][c];
        if (v != 0.0 && v != 1.0) {
            throw DataError(what + ": line " + std::to_string(r + first_line) + ", column '" +
                            table.header[c] + "': treatment must be 0 or 1, got " +
                            format_double(v));
        }
    }
}

}  // namespace

std::size_t CsvTable::find(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return npos;
}

CsvTable read_csv(std::istream& in, const std::string& what, bool has_header) {
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    if (has_header) {
        while (std::getline(in, line)) {
            ++lineno;
            if (!blank_line(line)) break;
        }
        if (blank_line(line)) throw DataError(what + ": empty file");
        table.header = split_line(line);
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (table.header[c].empty())
                throw DataError(what + ": header column " + std::to_string(c + 1) + " is blank");
        }
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (blank_line(line)) continue;
        auto cells = split_line(line);
        if (table.header.empty()) {
            for (std::size_t c = 0; c < cells.size(); ++c)
                table.header.push_back("c" + std::to_string(c + 1));
        }
        if (cells.size() != table.header.size()) {
            throw DataError(what + ": line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.header.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string where = what + ": line " + std::to_string(lineno) + ", column '" +
                                      table.header[c] + "'";
            if (cells[c].empty()) throw DataError(where + ": blank cell");
            if (!parse_number(cells[c], row[c]))
                throw DataError(where + ": not a number: '" + cells[c] + "'");
            if (!std::isfinite(row[c])) throw DataError(where + ": non-finite value");
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) throw DataError(what + ": no data rows");
    return table;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    data.validate();
    for (std::size_t j = 0; j < data.k(); ++j) {
        out << (data.covariate_names.size() == data.k() ? data.covariate_names[j]
                                                        : "x" + std::to_string(j + 1))
            << ',';
    }
    out << "t,y\n";
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (double v : data.x.row(i)) out << format_double(v) << ',';
        out << format_double(data.t[i]) << ',' << format_double(data.y[i]) << '\n';
    }
    if (!out) throw DataError("write_dataset_csv: stream write failed");
}

void save_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_dataset_csv(out, data);
}

Dataset read_dataset_csv(std::istream& in, const std::string& what) {
    const CsvTable table = read_csv(in, what);
    const auto tc = require_column(table, "t", what);
    const auto yc = require_column(table, "y", what);
    require_binary_column(table, tc, what, 2);
    std::vector<std::size_t> xcols;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != tc && c != yc) xcols.push_back(c);
    if (xcols.empty()) throw DataError(what + ": no covariate columns");

    Dataset d;
    d.x = Matrix(table.rows.size(), xcols.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (std::size_t j = 0; j < xcols.size(); ++j) d.x(r, j) = table.rows[r][xcols[j]];
    d.t = column_of(table, tc);
    d.y = column_of(table, yc);
    for (std::size_t c : xcols) d.covariate_names.push_back(table.header[c]);
    d.source = what;
    return d;
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_dataset_csv(in, path.string());
}

Dataset read_ihdp(std::istream& in, const std::string& what) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::istringstream first_in(text);
    std::string first;
    while (std::getline(first_in, first) && blank_line(first)) {
    }
    const auto first_cells = split_line(first);
    double probe = 0.0;
    const bool headerless = !first_cells.empty() && parse_number(first_cells[0], probe);

    std::istringstream body(text);
    CsvTable table = read_csv(body, what, !headerless);
    const std::size_t width = 5 + kIhdpCovariates;
    if (headerless) {
        if (table.header.size() != width) {
            throw DataError(what + ": headerless file must have " + std::to_string(width) +
                            " columns, found " + std::to_string(table.header.size()));
        }
        table.header = {"treatment", "y_factual", "y_cfactual", "mu0", "mu1"};
        for (std::size_t j = 1; j <= kIhdpCovariates; ++j) table.header.push_back("x" + std::to_string(j));
    }
    const auto tc = require_column(table, "treatment", what);
    const auto yc = require_column(table, "y_factual", what);
    require_column(table, "y_cfactual", what);
    const auto mu0c = require_column(table, "mu0", what);
    const auto mu1c = require_column(table, "mu1", what);
    std::vector<std::size_t> xcols;
    for (std::size_t j = 1; j <= kIhdpCovariates; ++j)
        xcols.push_back(require_column(table, "x" + std::to_string(j), what));
    require_binary_column(table, tc, what, headerless ? 1 : 2);

    Dataset d;
    d.x = Matrix(table.rows.size(), kIhdpCovariates);
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (std::size_t j = 0; j < kIhdpCovariates; ++j) d.x(r, j) = table.rows[r][xcols[j]];
    d.t = column_of(table, tc);
    d.y = column_of(table, yc);
    d.true_ate = mean(column_of(table, mu1c)) - mean(column_of(table, mu0c));
    for (std::size_t j = 1; j <= kIhdpCovariates; ++j) d.covariate_names.push_back("x" + std::to_string(j));
    d.source = what;
    return d;
}

Dataset load_ihdp(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_ihdp(in, path.string());
}

Dataset read_college(std::istream& in, const std::string& what,
                     std::vector<std::string>* ignored) {
    const CsvTable table = read_csv(in, what);
    const auto yc = require_column(table, kCollegeOutcome, what);
    const auto ec = require_column(table, kCollegeEducation, what);
    std::vector<std::size_t> xcols;
    for (const auto& name : college_covariates()) xcols.push_back(require_column(table, name, what));
    if (ignored) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c != yc && c != ec && std::find(xcols.begin(), xcols.end(), c) == xcols.end())
                ignored->push_back(table.header[c]);
        }
    }

    Dataset d;
    d.x = Matrix(table.rows.size(), xcols.size());
    d.t.resize(table.rows.size());
    d.y.resize(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t j = 0; j < xcols.size(); ++j) d.x(r, j) = table.rows[r][xcols[j]];
        d.t[r] = table.rows[r][ec] > 12.0 ? 1.0 : 0.0;
        d.y[r] = table.rows[r][yc];
    }
    d.covariate_names = college_covariates();
    d.source = what;
    return d;
}

Dataset load_college(const std::filesystem::path& path, std::vector<std::string>* ignored) {
    auto in = open_input(path);
    return read_college(in, path.string(), ignored);
}

SplitDataset split(const Dataset& data, double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw InvalidArgument("split: train_frac must lie in (0, 1)");
    data.validate();
    if (!data.has_both_arms()) throw DataError("split: source has a single treatment arm");
    const std::size_t n = data.n();
    const auto n_train = static_cast<std::size_t>(std::ceil(train_frac * static_cast<double>(n)));
    if (n_train >= n) throw InvalidArgument("split: no rows left for the test set");

    RngStream rng(seed);
    std::vector<std::size_t> order(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t treated = 0;
        for (std::size_t i = 0; i < n_train; ++i) treated += data.t[order[i]] == 1.0;
        if (treated == 0 || treated == n_train) continue;
        SplitDataset s;
        s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        s.train = data.subset(s.train_rows);
        s.test = data.subset(s.test_rows);
        s.split_seed = seed;
        s.train_frac = train_frac;
        return s;
    }
    throw DataError("split: training part missed a treatment arm in 100 shuffles");
}

Standardizer Standardizer::fit(const Matrix& x) {
    if (x.rows() == 0) throw InvalidArgument("Standardizer::fit: empty matrix");
    Standardizer s;
    s.mean.assign(x.cols(), 0.0);
    s.scale.assign(x.cols(), 1.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const auto col = x.col(j);
        const double m = sbnet::mean(col);
        double ss = 0.0;
        for (double v : col) ss += (v - m) * (v - m);
        const double sd = std::sqrt(ss / static_cast<double>(col.size()));
        s.mean[j] = m;
        s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DimensionError("Standardizer::apply: column count differs");
    Matrix out = x;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) = (out(r, j) - mean[j]) / scale[j];
    return out;
}

Matrix Standardizer::inverse(const Matrix& z) const {
    if (z.cols() != mean.size())
        throw DimensionError("Standardizer::inverse: column count differs");
    Matrix out = z;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) = out(r, j) * scale[j] + mean[j];
    return out;
}

StandardizedSplit standardize(const Dataset& train, const Dataset& test) {
    if (test.k() != train.k() && test.n() > 0)
        throw DimensionError("standardize: train and test have different covariate counts");
    StandardizedSplit s{train, test, Standardizer::fit(train.x)};
    s.train.x = s.transform.apply(train.x);
    if (test.n() > 0) s.test.x = s.transform.apply(test.x);
    return s;
}

}  // namespace sbnet
