#ifndef PANELSSM_MATRIX_HPP
#define PANELSSM_MATRIX_HPP

#include <cassert>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace panelssm {

// Minimal dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return v_.empty(); }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return v_[i * cols_ + j];
    }

    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return v_[i * cols_ + j];
    }

    std::span<double> row(std::size_t i) {
        assert(i < rows_);
        return {v_.data() + i * cols_, cols_};
    }

    std::span<const double> row(std::size_t i) const {
        assert(i < rows_);
        return {v_.data() + i * cols_, cols_};
    }

    std::vector<double> col(std::size_t j) const {
        assert(j < cols_);
        std::vector<double> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = v_[i * cols_ + j];
        return out;
    }

    std::span<double> data() { return v_; }
    std::span<const double> data() const { return v_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
    }

    friend void swap(Matrix& a, Matrix& b) {
        std::swap(a.rows_, b.rows_);
        std::swap(a.cols_, b.cols_);
        a.v_.swap(b.v_);
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

}  // namespace panelssm

#endif
