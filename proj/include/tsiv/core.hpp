#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tsiv {

// One observation carrying the instrument and the treatment.
struct AuxiliaryRow {
  double z = 0.0;
  double a = 0.0;
};

// One observation carrying the treatment and the outcome.
struct PrimaryRow {
  double a = 0.0;
  double y = 0.0;
};

// The instrument sample and the outcome sample share no rows; the
// treatment is the only variable observed in both.
struct TwoSampleDataset {
  std::vector<AuxiliaryRow> aux;
  std::vector<PrimaryRow> primary;
};

// A row observed in full, used by the oracle estimator that the
// two-sample fit is benchmarked against.
struct JointRow {
  double z = 0.0;
  double a = 0.0;
  double y = 0.0;
};

// Transformations of the treatment entering the outcome equation.
struct BasisTerm {
  enum class Kind { identity, power };
  Kind kind = Kind::identity;
  int exponent = 1;  // meaningful for power only

  bool operator==(const BasisTerm&) const = default;
};

struct BasisSpec {
  std::vector<BasisTerm> terms{BasisTerm{}};

  std::size_t size() const { return terms.size(); }
};

// Parses descriptors like "identity" or "power:2".  Throws
// ConfigError for unknown names, exponents outside [1, 8], or
// duplicate terms.
BasisSpec parse_basis(const std::vector<std::string>& descriptors);

std::vector<std::string> basis_descriptors(const BasisSpec& basis);

// Evaluates every basis term at one treatment value.
std::vector<double> eval_basis(double a, const BasisSpec& basis);

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> violations;
};

// Checks the dataset invariants and returns every violation found;
// never throws.  Checks: all fields finite, n1 >= 2, n2 >= p + 2,
// instrument and auxiliary treatment have positive variance, and the
// primary design [1, g(A)] has full column rank.
ValidationResult validate_two_sample_dataset(const TwoSampleDataset& ds,
                                             const BasisSpec& basis);

struct DiagnosticsBlock {
  double bandwidth_used = 0.0;
  double gram_condition_number = 0.0;
  double support_overlap_fraction = 0.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

struct EstimateReport {
  std::vector<double> alpha_hat;             // one entry per basis term
  double xi_hat = 0.0;                       // control-term coefficient
  double intercept = 0.0;
  std::vector<std::vector<double>> variance; // p x p, empty until inference
  DiagnosticsBlock diagnostics;
};

}  // namespace tsiv
