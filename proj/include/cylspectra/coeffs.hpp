#pragma once

#include <functional>
#include <string>
#include <vector>

namespace cylspectra {

struct CrossSectionResult;

/// Entries of the symmetric 2x2 matrix A(x2) = [[a11, a12], [a12, a22]].
struct MatrixEntries {
  double a11 = 1.0;
  double a12 = 0.0;
  double a22 = 1.0;

  /// Smaller eigenvalue of the symmetric matrix.
  double min_eigenvalue() const;
  /// Larger eigenvalue (the spectral norm, since A is positive definite).
  double max_eigenvalue() const;
};

enum class FamilyKind { Identity, ConstantOffDiag, LinearOffDiag, GradAligned, Tabulated };

/// One sample row of a tabulated coefficient field.
struct CoefficientSample {
  double x2 = 0.0;
  double a11 = 1.0;
  double a12 = 0.0;
  double a22 = 1.0;
};

/// Built-in coefficient families.
///
/// - Identity: A = I.
/// - ConstantOffDiag(c): a12 = c.
/// - LinearOffDiag(c): a12 = c * x2.
/// - GradAligned(c): a12 = c * W'(x2) for the cross-section ground state W.
/// - Tabulated: piecewise-linear interpolation of `samples`.
struct CoefficientFamily {
  FamilyKind kind = FamilyKind::Identity;
  double c = 0.0;
  std::vector<CoefficientSample> samples;

  static CoefficientFamily identity() { return {FamilyKind::Identity, 0.0, {}}; }
  static CoefficientFamily constant_off_diag(double c) { return {FamilyKind::ConstantOffDiag, c, {}}; }
  static CoefficientFamily linear_off_diag(double c) { return {FamilyKind::LinearOffDiag, c, {}}; }
  static CoefficientFamily grad_aligned(double c) { return {FamilyKind::GradAligned, c, {}}; }
  static CoefficientFamily tabulated(std::vector<CoefficientSample> rows) {
    return {FamilyKind::Tabulated, 0.0, std::move(rows)};
  }

  /// Short label used in tables, e.g. "ConstantOffDiag(0.3)".
  std::string label() const;
};

/// Coefficient matrix field A(x2) on omega = (-1/2, 1/2).
///
/// Entries are evaluated on demand. The ellipticity margin and sup norm are
/// computed once, at construction, by dense sampling. Immutable.
class CoefficientField {
 public:
  using Sampler = std::function<MatrixEntries(double)>;

  CoefficientField(Sampler sampler, std::string label, bool reflected = false);

  MatrixEntries at(double x2) const {
    MatrixEntries e = sampler_(x2);
    if (reflected_) e.a12 = -e.a12;
    return e;
  }

  double lambda_margin() const { return lambda_margin_; }
  double sup_norm() const { return sup_norm_; }
  const std::string& label() const { return label_; }
  bool reflected() const { return reflected_; }

  /// Same field with a12 negated.
  CoefficientField reflected_copy() const;

 private:
  Sampler sampler_;
  std::string label_;
  bool reflected_ = false;
  double lambda_margin_ = 0.0;
  double sup_norm_ = 0.0;
};

/// Default number of samples for the ellipticity check.
inline constexpr int kEllipticitySamples = 1024;

/// Builds the field for `family`. GradAligned requires the cross-section
/// ground state `cross`. Throws ConfigError when the resulting field is not
/// uniformly elliptic (the message reports the margin).
CoefficientField make_coefficients(const CoefficientFamily& family,
                                   const CrossSectionResult* cross = nullptr);

/// Minimum over `n_samples` equispaced points of [-1/2, 1/2] of the smaller
/// eigenvalue of A(x2). Requires n_samples >= 16. A nonpositive value marks
/// an invalid field.
double ellipticity_margin(const CoefficientField& field, int n_samples = kEllipticitySamples);

/// True iff A(-x2) = A(x2) entrywise within `tol` at all sample points.
bool satisfies_symmetry_S(const CoefficientField& field, double tol,
                          int n_samples = kEllipticitySamples);

/// The reflected field with a12 -> -a12 (half cylinder on the other side).
CoefficientField reflect_axis(const CoefficientField& field);

/// Reads `x2,a11,a12,a22` rows from a CSV file (header required, rows sorted
/// by x2 and covering [-1/2, 1/2]).
std::vector<CoefficientSample> load_coefficient_table(const std::string& path);

/// Piecewise-linear interpolation in sorted samples; clamps outside the range.
MatrixEntries interpolate(const std::vector<CoefficientSample>& samples, double x2);

}  // namespace cylspectra
