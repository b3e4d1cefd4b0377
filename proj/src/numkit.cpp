#include "preqinfo/numkit.hpp"

#include <algorithm>
#include <cmath>

#include "preqinfo/error.hpp"

namespace preqinfo {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  PREQINFO_CHECK(values_.size() == rows_ * cols_, DimensionError, "matrix value count does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ParamVector::ParamVector(std::vector<ParamBlock> layout) : ParamVector(layout, {}) {}

ParamVector::ParamVector(std::vector<ParamBlock> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  std::size_t expected = 0;
  for (const auto& b : layout_) {
    PREQINFO_CHECK(b.offset == expected, DimensionError, "parameter layout is not contiguous at block " + b.name);
    expected += b.size();
  }
  if (values_.empty()) values_.assign(expected, 0.0);
  PREQINFO_CHECK(values_.size() == expected, DimensionError, "parameter count does not match layout");
}

const ParamBlock& ParamVector::block(const std::string& name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw InvalidArgument("no parameter block named " + name);
}

std::span<const double> ParamVector::block_values(const std::string& name) const {
  const auto& b = block(name);
  return std::span<const double>(values_).subspan(b.offset, b.size());
}

std::span<double> ParamVector::block_values(const std::string& name) {
  const auto& b = block(name);
  return std::span<double>(values_).subspan(b.offset, b.size());
}

MatrixView ParamVector::view(const std::string& name) const {
  const auto& b = block(name);
  return MatrixView{std::span<const double>(values_).subspan(b.offset, b.size()), b.rows, b.cols};
}

std::vector<double> affine_forward(std::span<const double> x, const Matrix& W, std::span<const double> b) {
  PREQINFO_CHECK(W.cols() == x.size(), DimensionError, "affine_forward: input size does not match W columns");
  PREQINFO_CHECK(W.rows() == b.size(), DimensionError, "affine_forward: bias size does not match W rows");
  std::vector<double> out(W.rows());
  affine_forward(x, MatrixView{W.values(), W.rows(), W.cols()}, b, out);
  return out;
}

void affine_forward(std::span<const double> x, MatrixView W, std::span<const double> b, std::span<double> out) {
  const std::size_t n = W.cols;
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* w = W.values.data() + r * n;
    double acc = b[r];
    for (std::size_t c = 0; c < n; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
}

void affine_backward(std::span<const double> x, MatrixView W, std::span<const double> grad_out,
                     std::span<double> grad_W, std::span<double> grad_b, std::span<double> grad_x) {
  const std::size_t n = W.cols;
  if (!grad_x.empty()) std::fill(grad_x.begin(), grad_x.end(), 0.0);
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double g = grad_out[r];
    if (!grad_b.empty()) grad_b[r] += g;
    if (g == 0.0) continue;
    if (!grad_W.empty()) {
      double* gw = grad_W.data() + r * n;
      for (std::size_t c = 0; c < n; ++c) gw[c] += g * x[c];
    }
    if (!grad_x.empty()) {
      const double* w = W.values.data() + r * n;
      for (std::size_t c = 0; c < n; ++c) grad_x[c] += g * w[c];
    }
  }
}

void tanh_forward(std::span<const double> pre, std::span<double> out) {
  for (std::size_t i = 0; i < pre.size(); ++i) out[i] = std::tanh(pre[i]);
}

void tanh_backward(std::span<const double> out, std::span<const double> grad_out, std::span<double> grad_pre) {
  for (std::size_t i = 0; i < out.size(); ++i) grad_pre[i] = grad_out[i] * (1.0 - out[i] * out[i]);
}

double log_sum_exp(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

double softmax_nll_into(std::span<const double> logits, std::size_t label, std::span<double> grad_logits,
                        bool* clamped) {
  PREQINFO_CHECK(label < logits.size(), InvalidArgument, "softmax_nll: label out of range");
  const double lse = log_sum_exp(logits);
  double log_p = logits[label] - lse;
  static const double kLogFloor = std::log(kProbabilityFloor);
  bool was_clamped = false;
  if (log_p < kLogFloor) {
    log_p = kLogFloor;
    was_clamped = true;
  }
  if (clamped) *clamped = was_clamped;
  if (!grad_logits.empty()) {
    for (std::size_t i = 0; i < logits.size(); ++i) grad_logits[i] = std::exp(logits[i] - lse);
    grad_logits[label] -= 1.0;
  }
  return -log_p;
}

NllResult softmax_nll(std::span<const double> logits, std::size_t label) {
  NllResult r;
  r.grad_logits.resize(logits.size());
  r.loss = softmax_nll_into(logits, label, r.grad_logits, &r.clamped);
  return r;
}

OptimizerState::OptimizerState(OptimizerHyper h, std::size_t param_count)
    : hyper(h), first_moment(param_count, 0.0), second_moment(h.kind == OptimizerKind::Adam ? param_count : 0, 0.0) {}

void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    std::size_t mask_begin, std::size_t mask_end) {
  PREQINFO_CHECK(params.size() == grads.size() && params.size() == state.first_moment.size(), DimensionError,
                 "optimizer_step: parameter, gradient and state sizes differ");
  mask_end = std::min(mask_end, params.size());
  const auto& h = state.hyper;
  ++state.step;
  if (h.kind == OptimizerKind::SgdMomentum) {
    for (std::size_t i = mask_begin; i < mask_end; ++i) {
      state.first_moment[i] = h.momentum * state.first_moment[i] + grads[i];
      params[i] -= h.learning_rate * state.first_moment[i];
    }
    return;
  }
  PREQINFO_CHECK(state.second_moment.size() == params.size(), DimensionError, "optimizer_step: adam buffers missing");
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.momentum, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = mask_begin; i < mask_end; ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = h.momentum * m + (1.0 - h.momentum) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g * g;
    params[i] -= h.learning_rate * (m / c1) / (std::sqrt(v / c2) + h.epsilon);
  }
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace preqinfo
