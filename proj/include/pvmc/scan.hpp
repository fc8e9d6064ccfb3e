#pragma once

// Parallel reduce and fused prefix/suffix scans over an arbitrary associative
// combine. The combine tree shape depends only on the element count, never on
// the number of executors, so floating-point results are reproducible.

#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "pvmc/errors.hpp"

namespace pvmc {

/// Instrumentation collected by every scan.
struct ScanPlan {
  std::size_t element_count = 0;
  /// Levels of the combine tree (pairing levels above the leaves).
  std::size_t depth = 0;
  std::size_t combine_invocations = 0;
  /// Sequential combine rounds on the critical path; the fused scan walks the
  /// tree up and then down, so this is twice its depth.
  std::size_t rounds = 0;
};

/// ceil(log2(n)) for n >= 1.
constexpr std::size_t ceil_log2(std::size_t n) noexcept {
  std::size_t levels = 0;
  for (std::size_t width = 1; width < n; width <<= 1) ++levels;
  return levels;
}

namespace detail {

// Runs fn(0..count-1), possibly concurrently. Exceptions are rethrown on the
// calling thread after the loop.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static) if (count > 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(pvmc_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

template <class E>
std::vector<E> unwrap(std::vector<std::optional<E>>&& slots) {
  std::vector<E> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// One pairing level: out[j] = in[2j] (+) in[2j+1], odd tail carried.
template <class E, class Combine>
std::vector<E> pair_level(const std::vector<E>& in, Combine& combine) {
  const std::size_t half = in.size() / 2;
  std::vector<std::optional<E>> out((in.size() + 1) / 2);
  parallel_for(half, [&](std::size_t j) { out[j].emplace(combine(in[2 * j], in[2 * j + 1])); });
  if (in.size() % 2 == 1) out.back().emplace(in.back());
  return unwrap(std::move(out));
}

}  // namespace detail

/// Tree reduction e_0 (+) ... (+) e_{n-1} in ceil(log2 n) levels; odd tails are
/// carried up unchanged.
template <class E, class Combine>
E parallel_reduce(std::vector<E> elements, Combine combine, ScanPlan* plan = nullptr) {
  if (elements.empty()) throw PreconditionError("parallel_reduce: empty sequence");
  ScanPlan p;
  p.element_count = elements.size();
  while (elements.size() > 1) {
    p.combine_invocations += elements.size() / 2;
    elements = detail::pair_level(elements, combine);
    ++p.depth;
  }
  p.rounds = p.depth;
  if (plan) *plan = p;
  return std::move(elements.front());
}

template <class E>
struct ScanResult {
  std::vector<E> prefix;  ///< prefix[t] = a_0 (+) ... (+) a_t
  std::vector<E> suffix;  ///< suffix[t] = a_t (+) ... (+) a_{n-1}
  ScanPlan plan;
};

/// Fused prefix and suffix scan.
///
/// One up-sweep builds the pairwise combine tree (n-1 combines). A single
/// down-sweep then pushes exclusive prefixes and suffixes from the root to the
/// leaves; a node's right child inherits the parent's inclusive prefix and its
/// left child the parent's inclusive suffix, so each level costs at most one
/// combine per child pair per direction. Total work stays below 3n.
///
/// `identity` must be a right identity for `combine`; it is checked against
/// the first element and a ScanConfigError is thrown otherwise.
template <class E, class Combine, class Equal = std::equal_to<E>>
ScanResult<E> prefix_suffix_scan(const std::vector<E>& elements, Combine combine,
                                 const E& identity, Equal equal = {}) {
  if (elements.empty()) throw PreconditionError("prefix_suffix_scan: empty sequence");
  if (!equal(combine(elements.front(), identity), elements.front())) {
    throw ScanConfigError("prefix_suffix_scan: identity is not a right identity for combine");
  }

  ScanResult<E> result;
  ScanPlan& plan = result.plan;
  plan.element_count = elements.size();

  // Up-sweep. tree[k] is level k+1; level 0 is `elements` itself.
  std::vector<std::vector<E>> tree;
  while ((tree.empty() ? elements : tree.back()).size() > 1) {
    const auto& below = tree.empty() ? elements : tree.back();
    plan.combine_invocations += below.size() / 2;
    tree.push_back(detail::pair_level(below, combine));
  }
  plan.depth = tree.size();
  auto level = [&](std::size_t k) -> const std::vector<E>& {
    return k == 0 ? elements : tree[k - 1];
  };

  // Down-sweep state for the current parent level: exclusive/inclusive prefix
  // and suffix of every node. An empty exclusive value means nothing lies on
  // that side of the node.
  std::vector<std::optional<E>> excl_prefix(1), excl_suffix(1);
  std::vector<E> incl_prefix{level(plan.depth).front()};
  std::vector<E> incl_suffix{level(plan.depth).front()};

  for (std::size_t k = plan.depth; k > 0; --k) {
    const auto& children = level(k - 1);
    const std::size_t parents = level(k).size();
    const std::size_t width = children.size();
    std::vector<std::optional<E>> ep(width), es(width), ip(width), is(width);

    detail::parallel_for(parents, [&](std::size_t j) {
      const std::size_t left = 2 * j, right = 2 * j + 1;
      if (right >= width) {  // carried tail
        ep[left] = excl_prefix[j];
        es[left] = excl_suffix[j];
        ip[left].emplace(incl_prefix[j]);
        is[left].emplace(incl_suffix[j]);
        return;
      }
      ep[left] = excl_prefix[j];
      ip[left].emplace(excl_prefix[j] ? combine(*excl_prefix[j], children[left]) : children[left]);
      ep[right] = ip[left];
      ip[right].emplace(incl_prefix[j]);

      es[right] = excl_suffix[j];
      is[right].emplace(excl_suffix[j] ? combine(children[right], *excl_suffix[j])
                                       : children[right]);
      es[left] = is[right];
      is[left].emplace(incl_suffix[j]);
    });
    for (std::size_t j = 0; j < parents; ++j) {
      if (2 * j + 1 >= width) continue;
      plan.combine_invocations += (excl_prefix[j] ? 1 : 0) + (excl_suffix[j] ? 1 : 0);
    }

    excl_prefix = std::move(ep);
    excl_suffix = std::move(es);
    incl_prefix = detail::unwrap(std::move(ip));
    incl_suffix = detail::unwrap(std::move(is));
  }

  plan.rounds = 2 * plan.depth;
  result.prefix = std::move(incl_prefix);
  result.suffix = std::move(incl_suffix);
  return result;
}

template <class E>
struct SplitScanResult {
  /// splits[k] = (a_0 (+) ... (+) a_k, a_{k+1} (+) ... (+) a_{n-1}) for k = 0..n-2.
  std::vector<std::pair<E, E>> splits;
  ScanPlan plan;
};

/// All prefix/suffix pairs at the n-1 split points, excluding the complete
/// reduction, by repeated even/odd pairing of every row of partial sums.
///
/// Each level splits every row into an aligned pairing and an offset pairing,
/// doubling the row count while halving row length; rows stop at length two.
/// Depth is at most ceil(log2 n) but the work is O(n log n), so
/// prefix_suffix_scan is the default for large inputs. `identity` pads rows of
/// even length and must be a right identity.
template <class E, class Combine, class Equal = std::equal_to<E>>
SplitScanResult<E> split_scan(const std::vector<E>& elements, Combine combine, const E& identity,
                              Equal equal = {}) {
  if (elements.empty()) throw PreconditionError("split_scan: empty sequence");
  if (!equal(combine(elements.front(), identity), elements.front())) {
    throw ScanConfigError("split_scan: identity is not a right identity for combine");
  }

  SplitScanResult<E> result;
  result.plan.element_count = elements.size();
  if (elements.size() == 1) return result;

  std::vector<std::vector<E>> rows{elements};
  std::size_t len = elements.size();
  while (len > 2) {
    const std::size_t next_len = (len + 2) / 2;
    std::vector<std::vector<E>> aligned(rows.size()), offset(rows.size());
    detail::parallel_for(rows.size(), [&](std::size_t r) {
      const auto& row = rows[r];
      auto& b = aligned[r];
      auto& c = offset[r];
      b.reserve(next_len);
      c.reserve(next_len);
      for (std::size_t j = 0; j < len / 2; ++j) b.push_back(combine(row[2 * j], row[2 * j + 1]));
      b.push_back(len % 2 == 1 ? row[len - 1] : identity);
      c.push_back(row[0]);
      for (std::size_t j = 1; j <= (len - 1) / 2; ++j) {
        c.push_back(combine(row[2 * j - 1], row[2 * j]));
      }
      if (len % 2 == 0) c.push_back(row[len - 1]);
    });
    result.plan.combine_invocations += rows.size() * (len / 2 + (len - 1) / 2);
    rows = std::move(offset);
    for (auto& b : aligned) rows.push_back(std::move(b));
    len = next_len;
    ++result.plan.depth;
  }
  result.plan.rounds = result.plan.depth;

  result.splits.reserve(elements.size() - 1);
  for (std::size_t k = 0; k + 1 < elements.size(); ++k) {
    result.splits.emplace_back(std::move(rows[k][0]), std::move(rows[k][1]));
  }
  return result;
}

}  // namespace pvmc
