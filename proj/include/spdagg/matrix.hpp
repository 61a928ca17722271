#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace spdagg {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix ones(std::size_t rows, std::size_t cols);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::string shape_string() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// C x H x W_sp stack of feature maps. Channel c occupies a contiguous
/// block of H*W_sp values, so the reshape to Matrix(C, N) is a copy of
/// the same buffer.
class FeatureTensor {
public:
    FeatureTensor() = default;
    FeatureTensor(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
    FeatureTensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data);

    static FeatureTensor from_matrix(const Matrix& m, std::size_t height, std::size_t width);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t positions() const noexcept { return height_ * width_; }

    double& at(std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[(c * height_ + h) * width_ + w];
    }
    double at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[(c * height_ + h) * width_ + w];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    /// Rows are feature maps f_i, columns are local features x_n.
    Matrix as_matrix() const;

    bool operator==(const FeatureTensor& other) const = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
/// (a + a^T) / 2, exactly symmetric.
Matrix symmetrize(const Matrix& a);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double trace(const Matrix& a);
bool is_symmetric(const Matrix& a, double tol);
bool all_finite(std::span<const double> values);

/// ||a^T a - I||_F
double orthogonality_error(const Matrix& a);

}  // namespace spdagg
