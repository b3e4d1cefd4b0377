#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace preqinfo {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Non-owning view of a row-major weight block inside a flat parameter vector.
struct MatrixView {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const ParamBlock&) const = default;
};

/// Flat parameter storage plus a named, contiguous block layout.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<ParamBlock> layout);
  ParamVector(std::vector<ParamBlock> layout, std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<ParamBlock>& layout() const noexcept { return layout_; }

  const ParamBlock& block(const std::string& name) const;
  std::span<const double> block_values(const std::string& name) const;
  std::span<double> block_values(const std::string& name);
  MatrixView view(const std::string& name) const;

  bool same_layout(const ParamVector& other) const { return layout_ == other.layout_; }
  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<ParamBlock> layout_;
  std::vector<double> values_;
};

// ---- layers -------------------------------------------------------------

/// Returns W x + b.
std::vector<double> affine_forward(std::span<const double> x, const Matrix& W, std::span<const double> b);
void affine_forward(std::span<const double> x, MatrixView W, std::span<const double> b, std::span<double> out);

/// Accumulates dL/dW (+= g x^T) and dL/db (+= g); writes dL/dx = W^T g when grad_x is non-empty.
void affine_backward(std::span<const double> x, MatrixView W, std::span<const double> grad_out,
                     std::span<double> grad_W, std::span<double> grad_b, std::span<double> grad_x);

void tanh_forward(std::span<const double> pre, std::span<double> out);
/// grad_pre = grad_out * (1 - tanh^2), given the forward output.
void tanh_backward(std::span<const double> out, std::span<const double> grad_out, std::span<double> grad_pre);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

/// Floor applied to predicted probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-9;

struct NllResult {
  double loss = 0.0;  // nats
  std::vector<double> grad_logits;
  bool clamped = false;
};

/// -log softmax(logits)[label] in nats with the probability floor applied.
NllResult softmax_nll(std::span<const double> logits, std::size_t label);

/// Loss only, written into a caller-supplied gradient buffer (may be empty).
double softmax_nll_into(std::span<const double> logits, std::size_t label, std::span<double> grad_logits,
                        bool* clamped);

// ---- optimizers ---------------------------------------------------------

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerHyper {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD momentum or Adam beta1
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerHyper hyper;
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  OptimizerState() = default;
  OptimizerState(OptimizerHyper h, std::size_t param_count);
};

/// One optimizer update. Coordinates outside [mask_begin, mask_end) are left untouched.
void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    std::size_t mask_begin = 0, std::size_t mask_end = SIZE_MAX);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace preqinfo
