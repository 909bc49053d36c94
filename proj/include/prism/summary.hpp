#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prism/encoding.hpp"
#include "prism/error.hpp"
#include "prism/table.hpp"

namespace prism {

struct SummaryBin {
  std::string label;
  // Set for numeric bins. Intervals are [lower, upper) except the last, which is closed.
  std::optional<double> lower;
  std::optional<double> upper;
  std::uint64_t count = 0;
  // Collapsed overflow of categorical values beyond max_bins.
  bool other = false;
};

struct DistributionSummary {
  std::string column;
  ColumnKind kind = ColumnKind::text;
  std::vector<SummaryBin> bins;
  std::uint64_t total = 0;
  std::uint64_t null_count = 0;
};

namespace detail {

inline DistributionSummary numeric_summary(const Column& column, std::span<const std::size_t> rows,
                                           bool all_rows, std::size_t max_bins) {
  DistributionSummary out{column.name(), column.kind(), {}, 0, 0};
  const std::size_t n = all_rows ? column.size() : rows.size();
  out.total = n;
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    double v = column.number(all_rows ? i : rows[i]);
    if (std::isnan(v)) {
      ++out.null_count;
      continue;
    }
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!any) return out;
  if (lo == hi) {
    out.bins.push_back({"[" + encoding::format_double(lo) + ", " + encoding::format_double(hi) + "]", lo, hi,
                        n - out.null_count, false});
    return out;
  }
  const double width = (hi - lo) / static_cast<double>(max_bins);
  std::vector<double> edges(max_bins + 1);
  for (std::size_t b = 0; b < max_bins; ++b) edges[b] = lo + width * static_cast<double>(b);
  edges[max_bins] = hi;
  std::vector<std::uint64_t> counts(max_bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = column.number(all_rows ? i : rows[i]);
    if (std::isnan(v)) continue;
    auto b = static_cast<std::size_t>(std::min<double>(std::floor((v - lo) / width), static_cast<double>(max_bins - 1)));
    // Snap to the stored edges so membership agrees with the reported intervals.
    while (b > 0 && v < edges[b]) --b;
    while (b + 1 < max_bins && v >= edges[b + 1]) ++b;
    ++counts[b];
  }
  for (std::size_t b = 0; b < max_bins; ++b) {
    bool last = b + 1 == max_bins;
    std::string label = "[" + encoding::format_double(edges[b]) + ", " + encoding::format_double(edges[b + 1]) +
                        (last ? "]" : ")");
    out.bins.push_back({std::move(label), edges[b], edges[b + 1], counts[b], false});
  }
  return out;
}

inline DistributionSummary value_summary(const Column& column, std::span<const std::size_t> rows, bool all_rows,
                                         std::size_t max_bins) {
  DistributionSummary out{column.name(), column.kind(), {}, 0, 0};
  const std::size_t n = all_rows ? column.size() : rows.size();
  out.total = n;
  std::vector<std::uint64_t> counts(column.dictionary().size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto code = column.code(all_rows ? i : rows[i]);
    if (code == Column::kNullCode) {
      ++out.null_count;
    } else {
      ++counts[static_cast<std::size_t>(code)];
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) order.push_back(c);
  }
  const auto& dict = column.dictionary();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return dict[a] < dict[b];
  });
  std::uint64_t overflow = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < max_bins) {
      out.bins.push_back({dict[order[i]], std::nullopt, std::nullopt, counts[order[i]], false});
    } else {
      overflow += counts[order[i]];
    }
  }
  if (overflow > 0) out.bins.push_back({"other", std::nullopt, std::nullopt, overflow, true});
  return out;
}

}  // namespace detail

// Per-column distribution. Categorical-like columns get one bin per distinct
// value by descending count (ties by value), with values past `max_bins`
// folded into a trailing "other" bin. Numeric columns get `max_bins`
// equal-width intervals over [min, max], or a single interval when constant.
// `rows`, when given, restricts the summary to those rows.
inline DistributionSummary column_summary(const MetadataTable& table, std::string_view column_name,
                                          std::size_t max_bins,
                                          std::optional<std::span<const std::size_t>> rows = std::nullopt) {
  const Column& column = table.column(column_name);
  if (max_bins < 1) fail(ErrorCode::InvalidArgument, "max_bins must be at least 1");
  std::span<const std::size_t> subset = rows ? *rows : std::span<const std::size_t>{};
  if (column.is_numeric()) return detail::numeric_summary(column, subset, !rows, max_bins);
  return detail::value_summary(column, subset, !rows, max_bins);
}

}  // namespace prism
