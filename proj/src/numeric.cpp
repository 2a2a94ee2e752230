#include "cfnade/numeric.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cfnade {

void matvec(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
}

void matvec_transposed_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < m.rows(); ++r) axpy(x[r], m.row(r), y);
}

void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
  for (int r = 0; r < m.rows(); ++r) axpy(a[r], b, m.row(r));
}

Vector tanh_activation(std::span<const double> x) {
  Vector out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

double log_sum_exp(std::span<const double> x) {
  double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

Vector log_softmax(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("log_softmax: empty input");
  double lse = log_sum_exp(scores);
  Vector out(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

Vector softmax(std::span<const double> scores) {
  Vector out = log_softmax(scores);
  for (double& v : out) v = std::exp(v);
  return out;
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                            const Vector& theta, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h must be positive");
  Vector grad(theta.size());
  Vector probe = theta;
  for (size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    double up = f(probe);
    probe[i] = theta[i] - h;
    double down = f(probe);
    probe[i] = theta[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("finite_diff_gradient: non-finite evaluation at index " +
                               std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

uint64_t Rng::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::next_below: n must be positive");
  if (n == 1) return 0;
  uint64_t mask = ~uint64_t{0} >> std::countl_zero(n - 1);
  uint64_t v;
  do {
    v = next_u64() & mask;
  } while (v >= n);
  return v;
}

double Rng::next_gaussian() {
  double u1 = next_double();
  double u2 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

namespace {
// splitmix64 finalizer, used only for deriving sub-stream seeds.
uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

Rng Rng::fork(uint64_t stream) const {
  return Rng(mix64(seed_ ^ mix64(stream)));
}

std::vector<int> sample_permutation(Rng& rng, int n) {
  if (n < 1) throw std::invalid_argument("sample_permutation: n must be at least 1");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  shuffle(rng, perm);
  return perm;
}

}  // namespace cfnade
