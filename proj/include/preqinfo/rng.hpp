#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace preqinfo {

// Deterministic labelled random stream. The generator state is a pure
// function of (seed, path); child streams append a label to the path.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::vector<std::string> path = {});

  RngStream child(const std::string& label) const;
  RngStream child(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::string>& path() const noexcept { return path_; }
  // 64-bit digest of (seed, path); used to seed nested configurations.
  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double gamma(double shape);
  std::vector<double> dirichlet(std::size_t dim, double alpha);
  std::size_t categorical(std::span<const double> probs);
  std::vector<std::size_t> permutation(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::vector<std::string> path_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;

}  // namespace preqinfo
