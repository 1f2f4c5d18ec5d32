#include "sbnet/linalg.hpp"

#include "sbnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sbnet {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::col(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ " + shape(a) + " * " + shape(b));
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t p = b.cols();
    // i-k-j order keeps the innermost loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i).data();
        const double* arow = a.row(i).data();
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: inner dimensions differ " + shape(a) + " * " + shape(b) +
                             "^T");
    }
    return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: inner dimensions differ " + shape(a) + "^T * " +
                             shape(b));
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t p = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* arow = a.row(r).data();
        const double* brow = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = arow[i];
            double* orow = out.row(i).data();
            for (std::size_t j = 0; j < p; ++j) orow[j] += ari * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw DimensionError("take_rows: index out of range");
        std::copy_n(a.row(idx[i]).data(), a.cols(), out.row(i).data());
    }
    return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("hconcat: row counts differ " + shape(a) + " | " + shape(b));
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
        std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + a.cols());
    }
    return out;
}

Matrix cholesky(const Matrix& sigma) {
    const std::size_t n = sigma.rows();
    if (sigma.cols() != n) throw DimensionError("cholesky: matrix is not square " + shape(sigma));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double tol = 1e-12 * std::max({1.0, std::abs(sigma(i, j)), std::abs(sigma(j, i))});
            if (std::abs(sigma(i, j) - sigma(j, i)) > tol) {
                throw DimensionError("cholesky: matrix is not symmetric");
            }
        }
    }
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = sigma(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (!(pivot > 0.0)) {
            throw NumericalError("cholesky: matrix is not positive-definite (pivot " +
                                 std::to_string(j) + " = " + std::to_string(pivot) + ")");
        }
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = sigma(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

double std_normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double std_normal_pdf(double x) noexcept {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double mean(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("mean: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw InvalidArgument("sample_variance: need at least two values");
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

double sample_std(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

}  // namespace sbnet
