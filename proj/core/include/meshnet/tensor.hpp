#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace meshnet {

// Dense row-major tensor. Most operations in this library work on rank-2
// tensors laid out channels x edges; a rank-1 tensor of length n behaves as
// an n x 1 column.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T{0});
  Tensor(std::vector<std::size_t> shape, std::vector<T> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T{0}) {
    return Tensor({rows, cols}, fill);
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Leading dimension, and the product of the remaining ones.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return rows() == 0 ? 0 : data_.size() / rows(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  std::span<T> row(std::size_t r) noexcept { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const noexcept {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }

  // Same data, new shape; sizes must agree.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const noexcept;
  void fill(T value) noexcept;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::size_t shape_size(const std::vector<std::size_t>& shape);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace meshnet
