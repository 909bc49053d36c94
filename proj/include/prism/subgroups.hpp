#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prism/confusion.hpp"
#include "prism/error.hpp"
#include "prism/table.hpp"

namespace prism {

inline constexpr std::uint64_t kMaxSubgroupCross = 10000;

struct SubgroupOptions {
  std::vector<std::string> features;
  std::string label;
  std::string prediction;
  // One-vs-rest rates against this class; macro average over classes when absent.
  std::optional<std::string> positive_class;
  std::size_t min_size = 10;
};

struct SubgroupRow {
  std::vector<std::optional<std::string>> values;  // aligned with features; nullopt = null value
  std::size_t size = 0;
  double accuracy = 0.0;
  std::optional<double> false_positive_rate;
  std::optional<double> false_negative_rate;
  bool low_support = false;
};

struct SubgroupReport {
  std::vector<std::string> features;
  std::optional<std::string> positive_class;
  std::size_t min_size = 0;
  std::vector<SubgroupRow> rows;
};

namespace detail {

struct RateCounts {
  std::uint64_t fp = 0;
  std::uint64_t negatives = 0;
  std::uint64_t fn = 0;
  std::uint64_t positives = 0;
};

inline std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

// One row per observed combination of feature values (null counts as a
// value). A row is correct when label and prediction are both present and
// equal; rows with a null label or prediction count toward size but are
// excluded from the error rates.
inline SubgroupReport subgroup_metrics(const MetadataTable& table, const SubgroupOptions& options,
                                       const RowSubset& rows = std::nullopt) {
  std::vector<const Column*> features;
  std::uint64_t cross = 1;
  for (const auto& name : options.features) {
    const Column& c = table.column(name);
    if (!is_categorical_valued(c.kind())) {
      fail(ErrorCode::NonCategorical, "feature column '" + name + "' is " + std::string(to_string(c.kind())));
    }
    features.push_back(&c);
    std::uint64_t values = c.dictionary().size() + (c.null_count() > 0 ? 1 : 0);
    cross *= std::max<std::uint64_t>(values, 1);
    if (cross > kMaxSubgroupCross) {
      fail(ErrorCode::CardinalityExplosion, "feature cross has at least " + std::to_string(cross) +
                                                " combinations, limit is " + std::to_string(kMaxSubgroupCross));
    }
  }
  const Column& label = detail::categorical_column(table, options.label);
  const Column& pred = detail::categorical_column(table, options.prediction);
  const auto classes = detail::observed_classes(label, pred);
  const auto lmap = detail::code_map(label, classes);
  const auto pmap = detail::code_map(pred, classes);
  std::optional<std::size_t> positive;
  if (options.positive_class) {
    auto it = std::lower_bound(classes.begin(), classes.end(), *options.positive_class);
    if (it == classes.end() || *it != *options.positive_class) {
      fail(ErrorCode::UnknownClass, "positive class \"" + *options.positive_class + "\" is never observed");
    }
    positive = static_cast<std::size_t>(it - classes.begin());
  }
  const std::size_t class_slots = positive ? 1 : classes.size();

  struct Accumulator {
    std::size_t size = 0;
    std::size_t correct = 0;
    std::vector<detail::RateCounts> rates;
  };
  // Key: dictionary codes of each feature (-1 = null).
  std::map<std::vector<std::int32_t>, Accumulator> groups;
  std::vector<std::int32_t> key(features.size());
  detail::for_each_row(table.row_count(), rows, [&](std::size_t r) {
    for (std::size_t f = 0; f < features.size(); ++f) key[f] = features[f]->code(r);
    auto& acc = groups[key];
    if (acc.rates.empty()) acc.rates.resize(class_slots);
    ++acc.size;
    auto lc = label.code(r);
    auto pc = pred.code(r);
    if (lc == Column::kNullCode || pc == Column::kNullCode) return;
    auto t = static_cast<std::size_t>(lmap[static_cast<std::size_t>(lc)]);
    auto p = static_cast<std::size_t>(pmap[static_cast<std::size_t>(pc)]);
    acc.correct += t == p;
    for (std::size_t s = 0; s < class_slots; ++s) {
      std::size_t c = positive ? *positive : s;
      auto& rc = acc.rates[s];
      if (t == c) {
        ++rc.positives;
        rc.fn += p != c;
      } else {
        ++rc.negatives;
        rc.fp += p == c;
      }
    }
  });

  SubgroupReport report;
  report.features = options.features;
  report.positive_class = options.positive_class;
  report.min_size = options.min_size;
  for (const auto& [codes, acc] : groups) {
    SubgroupRow row;
    for (std::size_t f = 0; f < features.size(); ++f) {
      if (codes[f] == Column::kNullCode) {
        row.values.emplace_back();
      } else {
        row.values.emplace_back(features[f]->dictionary()[static_cast<std::size_t>(codes[f])]);
      }
    }
    row.size = acc.size;
    row.accuracy = static_cast<double>(acc.correct) / static_cast<double>(acc.size);
    row.low_support = acc.size < options.min_size;
    if (positive) {
      row.false_positive_rate = detail::ratio(acc.rates[0].fp, acc.rates[0].negatives);
      row.false_negative_rate = detail::ratio(acc.rates[0].fn, acc.rates[0].positives);
    } else {
      double fpr = 0.0;
      double fnr = 0.0;
      std::size_t fpr_n = 0;
      std::size_t fnr_n = 0;
      for (const auto& rc : acc.rates) {
        if (auto v = detail::ratio(rc.fp, rc.negatives)) {
          fpr += *v;
          ++fpr_n;
        }
        if (auto v = detail::ratio(rc.fn, rc.positives)) {
          fnr += *v;
          ++fnr_n;
        }
      }
      if (fpr_n) row.false_positive_rate = fpr / static_cast<double>(fpr_n);
      if (fnr_n) row.false_negative_rate = fnr / static_cast<double>(fnr_n);
    }
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const SubgroupRow& a, const SubgroupRow& b) { return a.values < b.values; });
  return report;
}

}  // namespace prism
