#pragma once

// Log-domain scalars and dense log-domain matrices.
//
// Every probability magnitude in the library is carried as its natural
// logarithm. Zero probability is -infinity; +infinity and NaN never appear
// as results of operations on valid inputs.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace pvmc {

using LogValue = double;

inline constexpr LogValue kLogZero = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)).
LogValue log_add(LogValue a, LogValue b) noexcept;

/// log(sum_i exp(values[i])), max-shifted. Throws PreconditionError on empty input.
LogValue log_sum_exp(std::span<const LogValue> values);

/// Dense row-major matrix of log-domain entries.
class LogMatrix {
 public:
  LogMatrix() = default;
  LogMatrix(std::size_t rows, std::size_t cols, LogValue fill = kLogZero);

  /// 0 on the diagonal, -inf elsewhere.
  static LogMatrix identity(std::size_t n);
  /// Every entry log(1) = 0.
  static LogMatrix ones(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  LogValue& operator()(std::size_t i, std::size_t j) noexcept { return entries_[i * cols_ + j]; }
  LogValue operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * cols_ + j]; }

  std::span<LogValue> row(std::size_t i) noexcept { return {entries_.data() + i * cols_, cols_}; }
  std::span<const LogValue> row(std::size_t i) const noexcept {
    return {entries_.data() + i * cols_, cols_};
  }
  std::span<LogValue> data() noexcept { return entries_; }
  std::span<const LogValue> data() const noexcept { return entries_; }

  bool operator==(const LogMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<LogValue> entries_;
};

/// C[i][j] = log sum_l exp(A[i][l] + B[l][j]). Throws DimensionError on mismatch.
LogMatrix log_matmul(const LogMatrix& a, const LogMatrix& b);

/// Row vector times matrix: out[j] = log sum_i exp(v[i] + M[i][j]).
std::vector<LogValue> log_vecmat(std::span<const LogValue> v, const LogMatrix& m);

/// Row-wise log-sum-exp: out[i] = log sum_j exp(M[i][j]).
std::vector<LogValue> log_row_sums(const LogMatrix& m);

/// Largest absolute entrywise difference; a pair of -inf entries counts as equal.
double max_abs_diff(const LogMatrix& a, const LogMatrix& b);
double max_abs_diff(std::span<const LogValue> a, std::span<const LogValue> b);

}  // namespace pvmc
