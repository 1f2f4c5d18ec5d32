#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sbnet {

/// Dense row-major matrix of doubles.
///
/// Mini-batches are stored one sample per row, so an n-sample batch with k
/// features is an n x k matrix. Layer weights are stored out x in.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    /// n x 1 column from a vector.
    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    /// Copy of column c.
    std::vector<double> col(std::size_t c) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose of b.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose of a.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double max_abs_diff(const Matrix& a, const Matrix& b);

/// Select rows by index, in the given order.
Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx);
/// Concatenate columns: [a | b].
Matrix hconcat(const Matrix& a, const Matrix& b);

/// Lower-triangular L with L * L^T == sigma. Throws NumericalError when sigma
/// is not positive-definite and DimensionError when it is not square or not
/// symmetric.
Matrix cholesky(const Matrix& sigma);

/// Standard normal CDF, evaluated through erfc (absolute error ~1e-16).
double std_normal_cdf(double x) noexcept;
/// Standard normal density.
double std_normal_pdf(double x) noexcept;

double mean(std::span<const double> v);
/// Sample variance with denominator n - 1.
double sample_variance(std::span<const double> v);
/// Sample standard deviation with denominator n - 1.
double sample_std(std::span<const double> v);

}  // namespace sbnet
