#pragma once

// Minimal tape-based reverse-mode differentiation over dense row-major
// double matrices. Every tensor is rank 2; vectors are [1, n] rows and
// scalars are [1, 1].

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffplace::ag {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false) { return from(1, 1, {v}, requires_grad); }

  bool defined() const { return static_cast<bool>(s_); }
  std::vector<std::size_t> shape() const { return {s_->rows, s_->cols}; }
  std::size_t rows() const { return s_->rows; }
  std::size_t cols() const { return s_->cols; }
  std::size_t size() const { return s_->value.size(); }
  bool requires_grad() const { return s_->requires_grad; }

  std::span<double> values() { return s_->value; }
  std::span<const double> values() const { return s_->value; }
  double& at(std::size_t r, std::size_t c) { return s_->value[r * s_->cols + c]; }
  double at(std::size_t r, std::size_t c) const { return s_->value[r * s_->cols + c]; }
  double item() const;

  bool has_grad() const { return !s_->grad.empty(); }
  // Allocates a zero gradient buffer on first use. Storage is shared, so
  // copies of a tensor see the same gradient.
  std::span<double> grad() const;
  void zero_grad() const;

  // Same storage identity.
  bool same(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

using Index = std::vector<std::size_t>;

// Records differentiable operations in order; backward() replays them in
// reverse. Operations whose inputs need no gradient are not recorded.
class Tape {
 public:
  // A disabled tape records nothing and its outputs never require grad.
  explicit Tape(bool enabled = true) : enabled_(enabled) {}
  bool enabled() const { return enabled_; }

  Tensor matmul(const Tensor& a, const Tensor& b);
  // a * b^T
  Tensor matmul_nt(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  // Broadcast a [1, m] row over every row of a [n, m] tensor.
  Tensor add_row(const Tensor& a, const Tensor& row);
  Tensor mul_row(const Tensor& a, const Tensor& row);
  Tensor scale(const Tensor& a, double c);

  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
  Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);

  Tensor gelu(const Tensor& a);
  Tensor leaky_relu(const Tensor& a, double slope);
  Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
  Tensor softmax_rows(const Tensor& a);

  Tensor gather_rows(const Tensor& a, const Index& index);
  Tensor segment_sum(const Tensor& a, const Index& segment, std::size_t num_segments);
  // Empty segments yield 0.
  Tensor segment_max(const Tensor& a, const Index& segment, std::size_t num_segments);
  // Column-wise softmax over the rows sharing a segment id.
  Tensor segment_softmax(const Tensor& a, const Index& segment, std::size_t num_segments);
  // [n, groups*c] -> [n, groups], summing each contiguous block of c columns.
  Tensor group_sum_cols(const Tensor& a, std::size_t groups);
  // out[:, g*c + k] = weights[:, g] * a[:, g*c + k]
  Tensor mul_groups(const Tensor& weights, const Tensor& a);

  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  Tensor mse(const Tensor& a, const Tensor& b);

  // Populates .grad() of every tensor that requires it. The loss must be a
  // [1, 1] tensor recorded on this tape. Consumes the tape.
  void backward(const Tensor& loss);

  std::size_t num_records() const { return records_.size(); }

 private:
  Tensor output(std::size_t rows, std::size_t cols, bool requires_grad);
  void record(std::function<void()> fn);

  std::vector<std::function<void()>> records_;
  bool enabled_ = true;
  bool consumed_ = false;
};

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update of every parameter from its .grad().
void adam_step(std::vector<Tensor>& params, AdamState& state);

// Bias-corrected Adam update of a raw buffer; `step` is the 1-based count
// after increment.
void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t step, double lr, double beta1, double beta2,
                 double eps);

}  // namespace diffplace::ag
