#include "preqinfo/rng.hpp"

#include <cmath>
#include <numeric>

#include "preqinfo/error.hpp"

namespace preqinfo {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t derive_key(std::uint64_t seed, const std::vector<std::string>& path) {
  std::uint64_t h = mix64(seed);
  for (const auto& label : path) {
    h = mix64(h ^ fnv1a64(label));
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::vector<std::string> path)
    : seed_(seed), path_(std::move(path)), key_(derive_key(seed_, path_)), engine_(key_) {}

RngStream RngStream::child(const std::string& label) const {
  auto p = path_;
  p.push_back(label);
  return RngStream(seed_, std::move(p));
}

RngStream RngStream::child(std::uint64_t index) const { return child(std::to_string(index)); }

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  // 53 high bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::below(std::uint64_t n) {
  PREQINFO_CHECK(n > 0, InvalidArgument, "below(0)");
  // rejection sampling keeps the draw exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_normal_ = true;
  return u * f;
}

double RngStream::gamma(double shape) {
  PREQINFO_CHECK(shape > 0.0 && std::isfinite(shape), InvalidArgument, "gamma shape must be positive");
  if (shape < 1.0) {
    // boost: G(a) = G(a + 1) * U^(1/a)
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> RngStream::dirichlet(std::size_t dim, double alpha) {
  std::vector<double> out(dim);
  double total = 0.0;
  for (auto& g : out) {
    g = gamma(alpha);
    total += g;
  }
  if (total <= 0.0) {
    // every gamma draw underflowed; fall back to a one-hot on a uniform index
    std::fill(out.begin(), out.end(), 0.0);
    out[below(dim)] = 1.0;
    return out;
  }
  for (auto& g : out) g /= total;
  return out;
}

std::size_t RngStream::categorical(std::span<const double> probs) {
  const double u = uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // rounding slack: return the last index with positive mass
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  shuffle(p);
  return p;
}

}  // namespace preqinfo
