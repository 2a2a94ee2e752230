#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace cfnade {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) {
    return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y += x
inline void add_in_place(std::span<double> y, std::span<const double> x) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

// y = m * x  (m: R x C, x: C, y: R)
void matvec(const Matrix& m, std::span<const double> x, std::span<double> y);

// y += m^T * x  (m: R x C, x: R, y: C)
void matvec_transposed_add(const Matrix& m, std::span<const double> x, std::span<double> y);

// m += outer(a, b)  (m: |a| x |b|)
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b);

Vector tanh_activation(std::span<const double> x);

// log(sum(exp(x))), stabilized by max subtraction.
double log_sum_exp(std::span<const double> x);

// Log-probabilities; exp of the result sums to 1. Throws on empty input.
Vector log_softmax(std::span<const double> scores);

Vector softmax(std::span<const double> scores);

// Central differences (f(t+h e_i) - f(t-h e_i)) / 2h. Throws with the
// offending index if f evaluates to a non-finite value.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                            const Vector& theta, double h);

// Deterministic 64-bit generator (mt19937_64 engine; raw outputs are fixed
// by the standard, so sequences are identical across platforms). Bounded
// draws use mask rejection and doubles take the top 53 bits, both of which
// keep the mapping platform-independent. Single-owner: derive a sub-stream
// with fork() instead of sharing one instance.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased draw in [0, n). Throws if n == 0.
  uint64_t next_below(uint64_t n);

  // Standard-normal draw (Box-Muller on two uniform draws).
  double next_gaussian();

  // Independent sub-stream for (seed, stream id).
  Rng fork(uint64_t stream) const;

 private:
  uint64_t seed_ = 0;
  std::mt19937_64 engine_;
};

// Uniform permutation of {0, 1, ..., n-1} by Fisher-Yates. Throws if n < 1.
std::vector<int> sample_permutation(Rng& rng, int n);

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng.next_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cfnade
