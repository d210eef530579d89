#pragma once

#include <cstdint>
#include <vector>

#include "tsiv/core.hpp"

namespace tsiv::detail {

// Canonical multiset form of a paired sample: unique (key, companion)
// rows sorted lexicographically with replication counts.  Estimators
// run on this form, which makes them exactly invariant to input row
// order, and bootstrap resampling only has to draw counts.
struct GroupedPairs {
  std::vector<double> key;        // ascending (ties broken by companion)
  std::vector<double> companion;
  std::vector<double> counts;
  std::vector<std::uint32_t> row_group;  // original row index -> group
  std::size_t n_rows = 0;
};

GroupedPairs group_pairs(const double* key, const double* companion,
                         std::size_t n);

// key = a, companion = z.
GroupedPairs group_aux(const std::vector<AuxiliaryRow>& aux);

// key = a, companion = y.
GroupedPairs group_primary(const std::vector<PrimaryRow>& primary);

// Single-variable variant (key only), used for pooled treatments.
struct GroupedValues {
  std::vector<double> value;  // ascending
  std::vector<double> counts;
};

GroupedValues group_values(const std::vector<double>& v);

}  // namespace tsiv::detail
