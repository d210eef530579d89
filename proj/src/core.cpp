#include "tsiv/core.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <charconv>

#include "tsiv/errors.hpp"

namespace tsiv {

namespace {

double ipow(double a, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= a;
  return out;
}

}  // namespace

BasisSpec parse_basis(const std::vector<std::string>& descriptors) {
  if (descriptors.empty()) throw ConfigError("basis must be non-empty");
  BasisSpec basis;
  basis.terms.clear();
  for (const auto& d : descriptors) {
    BasisTerm term;
    if (d == "identity") {
      term.kind = BasisTerm::Kind::identity;
      term.exponent = 1;
    } else if (d.rfind("power:", 0) == 0) {
      const std::string arg = d.substr(6);
      int k = 0;
      const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), k);
      if (ec != std::errc() || ptr != arg.data() + arg.size())
        throw ConfigError("basis term '" + d + "': exponent is not an integer");
      if (k < 1 || k > 8)
        throw ConfigError("basis term '" + d + "': exponent out of range [1, 8]");
      term.kind = BasisTerm::Kind::power;
      term.exponent = k;
    } else {
      throw ConfigError("unknown basis term '" + d + "'");
    }
    if (std::find(basis.terms.begin(), basis.terms.end(), term) != basis.terms.end())
      throw ConfigError("duplicate basis term '" + d + "'");
    basis.terms.push_back(term);
  }
  return basis;
}

std::vector<std::string> basis_descriptors(const BasisSpec& basis) {
  std::vector<std::string> out;
  out.reserve(basis.terms.size());
  for (const auto& term : basis.terms) {
    if (term.kind == BasisTerm::Kind::identity)
      out.push_back("identity");
    else
      out.push_back("power:" + std::to_string(term.exponent));
  }
  return out;
}

std::vector<double> eval_basis(double a, const BasisSpec& basis) {
  std::vector<double> out;
  out.reserve(basis.terms.size());
  for (const auto& term : basis.terms) {
    if (term.kind == BasisTerm::Kind::identity)
      out.push_back(a);
    else
      out.push_back(ipow(a, term.exponent));
  }
  return out;
}

ValidationResult validate_two_sample_dataset(const TwoSampleDataset& ds,
                                             const BasisSpec& basis) {
  ValidationResult result;
  auto flag = [&result](std::string msg) {
    result.ok = false;
    result.violations.push_back(std::move(msg));
  };

  const std::size_t n1 = ds.aux.size();
  const std::size_t n2 = ds.primary.size();
  const std::size_t p = basis.size();

  bool finite = true;
  for (std::size_t i = 0; i < n1; ++i) {
    if (!std::isfinite(ds.aux[i].z)) {
      flag("auxiliary row " + std::to_string(i) + ": non-finite z");
      finite = false;
      break;
    }
    if (!std::isfinite(ds.aux[i].a)) {
      flag("auxiliary row " + std::to_string(i) + ": non-finite a");
      finite = false;
      break;
    }
  }
  for (std::size_t j = 0; j < n2; ++j) {
    if (!std::isfinite(ds.primary[j].a)) {
      flag("primary row " + std::to_string(j) + ": non-finite a");
      finite = false;
      break;
    }
    if (!std::isfinite(ds.primary[j].y)) {
      flag("primary row " + std::to_string(j) + ": non-finite y");
      finite = false;
      break;
    }
  }

  if (n1 < 2) flag("auxiliary sample too small (n1 < 2)");
  if (n2 < p + 2) flag("primary sample too small (n2 < p + 2)");
  if (!finite) return result;

  if (n1 >= 2) {
    const auto [zmin, zmax] = std::minmax_element(
        ds.aux.begin(), ds.aux.end(),
        [](const AuxiliaryRow& l, const AuxiliaryRow& r) { return l.z < r.z; });
    if (zmin->z == zmax->z) flag("instrument has zero variance");
    const auto [amin, amax] = std::minmax_element(
        ds.aux.begin(), ds.aux.end(),
        [](const AuxiliaryRow& l, const AuxiliaryRow& r) { return l.a < r.a; });
    if (amin->a == amax->a) flag("auxiliary treatment has zero variance");
  }

  if (n2 >= p + 2) {
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n2),
                           static_cast<Eigen::Index>(p) + 1);
    for (std::size_t j = 0; j < n2; ++j) {
      design(static_cast<Eigen::Index>(j), 0) = 1.0;
      const auto g = eval_basis(ds.primary[j].a, basis);
      for (std::size_t k = 0; k < p; ++k)
        design(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k) + 1) =
            g[k];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < static_cast<Eigen::Index>(p) + 1)
      flag("design matrix rank-deficient");
  }

  return result;
}

}  // namespace tsiv
