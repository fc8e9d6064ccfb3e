#include "pvmc/logspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pvmc/errors.hpp"

namespace pvmc {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Below this the scaled linear-domain sum may have lost terms to underflow, so
// the entry is recomputed exactly.
constexpr double kScaledSumFloor = 1e-250;

LogValue exact_entry(const LogMatrix& a, const LogMatrix& b, std::size_t i, std::size_t j) {
  double m = kLogZero;
  for (std::size_t l = 0; l < a.cols(); ++l) m = std::max(m, a(i, l) + b(l, j));
  if (m == kLogZero) return kLogZero;
  double s = 0.0;
  for (std::size_t l = 0; l < a.cols(); ++l) s += std::exp(a(i, l) + b(l, j) - m);
  return m + std::log(s);
}

}  // namespace

LogValue log_add(LogValue a, LogValue b) noexcept {
  const double m = std::max(a, b);
  if (m == kLogZero) return kLogZero;
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

LogValue log_sum_exp(std::span<const LogValue> values) {
  if (values.empty()) throw PreconditionError("log_sum_exp: empty sequence");
  const double m = *std::max_element(values.begin(), values.end());
  if (m == kLogZero) return kLogZero;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

LogMatrix::LogMatrix(std::size_t rows, std::size_t cols, LogValue fill)
    : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

LogMatrix LogMatrix::identity(std::size_t n) {
  LogMatrix out(n, n, kLogZero);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 0.0;
  return out;
}

LogMatrix LogMatrix::ones(std::size_t rows, std::size_t cols) { return LogMatrix(rows, cols, 0.0); }

// Each row of A and each column of B is shifted by its maximum, the product is
// formed in the linear domain with entries in [0, 1], and the shifts are added
// back. Entries whose scaled sum is tiny fall back to the exact max-shifted sum.
LogMatrix log_matmul(const LogMatrix& a, const LogMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("log_matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  LogMatrix out(m, n, kLogZero);
  if (k == 0) return out;

  std::vector<double> row_max(m, kLogZero), col_max(n, kLogZero);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) row_max[i] = std::max(row_max[i], a(i, l));
  }
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t j = 0; j < n; ++j) col_max[j] = std::max(col_max[j], b(l, j));
  }

  RowMajorMatrix ea(m, k), eb(k, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      ea(i, l) = row_max[i] == kLogZero ? 0.0 : std::exp(a(i, l) - row_max[i]);
    }
  }
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      eb(l, j) = col_max[j] == kLogZero ? 0.0 : std::exp(b(l, j) - col_max[j]);
    }
  }
  const RowMajorMatrix prod = ea * eb;

  for (std::size_t i = 0; i < m; ++i) {
    if (row_max[i] == kLogZero) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (col_max[j] == kLogZero) continue;
      const double s = prod(i, j);
      out(i, j) = s > kScaledSumFloor ? row_max[i] + col_max[j] + std::log(s)
                                      : exact_entry(a, b, i, j);
    }
  }
  return out;
}

std::vector<LogValue> log_vecmat(std::span<const LogValue> v, const LogMatrix& m) {
  if (v.size() != m.rows()) throw DimensionError("log_vecmat: vector length differs from rows");
  std::vector<LogValue> out(m.cols(), kLogZero);
  std::vector<double> terms(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) terms[i] = v[i] + m(i, j);
    out[j] = terms.empty() ? kLogZero : log_sum_exp(terms);
  }
  return out;
}

std::vector<LogValue> log_row_sums(const LogMatrix& m) {
  std::vector<LogValue> out(m.rows(), kLogZero);
  if (m.cols() == 0) return out;
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = log_sum_exp(m.row(i));
  return out;
}

double max_abs_diff(std::span<const LogValue> a, std::span<const LogValue> b) {
  if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;  // covers matching infinities
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

double max_abs_diff(const LogMatrix& a, const LogMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("max_abs_diff: shape mismatch");
  }
  return max_abs_diff(a.data(), b.data());
}

}  // namespace pvmc
