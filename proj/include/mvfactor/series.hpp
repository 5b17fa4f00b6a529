#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvfactor/error.hpp"
#include "mvfactor/linalg.hpp"

namespace mvfactor {

/// An ordered sequence of p x q observation matrices Y_1, ..., Y_n.
class MatrixSeries {
 public:
  MatrixSeries() = default;

  MatrixSeries(std::size_t p, std::size_t q) : p_(p), q_(q) {}

  MatrixSeries(std::size_t p, std::size_t q, std::vector<Matrix> frames)
      : p_(p), q_(q), frames_(std::move(frames)) {
    for (std::size_t t = 0; t < frames_.size(); ++t) check_frame(frames_[t], t);
  }

  std::size_t n() const noexcept { return frames_.size(); }
  std::size_t p() const noexcept { return p_; }
  std::size_t q() const noexcept { return q_; }

  const Matrix& operator[](std::size_t t) const noexcept { return frames_[t]; }
  const std::vector<Matrix>& frames() const noexcept { return frames_; }

  void push_back(Matrix frame) {
    check_frame(frame, frames_.size());
    frames_.push_back(std::move(frame));
  }

  // Frames [first, first + count) as a new series.
  MatrixSeries slice(std::size_t first, std::size_t count) const {
    if (first + count > frames_.size()) throw ShapeError("series slice out of range");
    return MatrixSeries(p_, q_,
                        std::vector<Matrix>(frames_.begin() + static_cast<std::ptrdiff_t>(first),
                                            frames_.begin() +
                                                static_cast<std::ptrdiff_t>(first + count)));
  }

  // Every frame transposed; rows and columns swap roles.
  MatrixSeries transposed() const {
    std::vector<Matrix> out;
    out.reserve(frames_.size());
    for (const auto& f : frames_) out.push_back(f.transpose());
    return MatrixSeries(q_, p_, std::move(out));
  }

  friend bool operator==(const MatrixSeries&, const MatrixSeries&) = default;

 private:
  void check_frame(const Matrix& f, std::size_t t) const {
    if (f.rows() != p_ || f.cols() != q_) {
      throw ShapeError("frame " + std::to_string(t) + " is " + f.shape_string() + ", expected " +
                       std::to_string(p_) + "x" + std::to_string(q_));
    }
    if (!all_finite(f)) throw ValidationError("frame " + std::to_string(t) + " has non-finite entries");
  }

  std::size_t p_ = 0;
  std::size_t q_ = 0;
  std::vector<Matrix> frames_;
};

}  // namespace mvfactor
