#pragma once

#include <string>
#include <vector>

#include "cylspectra/coeffs.hpp"
#include "cylspectra/discretization.hpp"
#include "cylspectra/eigensolve.hpp"
#include "cylspectra/mesh.hpp"

namespace cylspectra {

/// End of a cylinder mesh: Left is x1 = x1_begin, Right is x1 = x1_end.
enum class End { Left, Right };

const char* to_string(End end);

struct SlabRecord {
  int index = 0;             // unit slab number counted from the chosen end
  double grad_energy = 0.0;  // int |grad u|^p over the slab
  double p_mass = 0.0;       // int |u|^p over the slab
};

struct SlabProfile {
  End from = End::Left;
  std::vector<SlabRecord> slabs;
};

/// Unit-length slab integrals of u counted from `from`. A trailing partial
/// slab (axial length not an integer) is dropped.
SlabProfile slab_integrals(const CylinderMesh& mesh, const DiscreteField& u, double p,
                           End from);

/// End carrying the larger p-mass half of u; Left on ties. Half-cylinder
/// meshes always report their natural end.
End dominant_end(const CylinderMesh& mesh, const DiscreteField& u, double p);

struct DecayWindow {
  int first = 2;
  int last = 0;
};

/// Default window [2, ell - 2].
DecayWindow default_decay_window(double ell);

struct DecayFit {
  double alpha_hat = 1.0;
  double r_squared = 0.0;
  DecayWindow window;
  /// False when the fitted ratio is not below 1.
  bool decays = false;
};

/// Least-squares fit of log(grad_energy) against slab index over `window`.
/// Throws PreconditionError when fewer than 3 slabs fall in the window or an
/// energy there is not positive.
DecayFit fit_decay(const SlabProfile& profile, const DecayWindow& window);

/// int |u|^p over (-r, r) x omega on a full cylinder.
double central_mass(const CylinderMesh& mesh, const DiscreteField& u, double p, double r);

struct LadderPoint {
  double ell = 0.0;
  double lambda_tilde = 0.0;
  bool converged = false;
};

struct NuEstimate {
  Side side = Side::Plus;
  std::vector<LadderPoint> ladder;
  double last_value = 0.0;
  double extrapolated = 0.0;
  bool monotone_ok = false;
  /// False when the last three values admit no geometric tail.
  bool fit_ok = false;
};

inline constexpr double kLadderSlack = 1e-7;

/// nu + C rho^ell through three points (ell strictly increasing). Falls back
/// to the last value (fit_ok = false) when no rho in (0, 1) fits.
struct TailFit {
  double value = 0.0;
  double rho = 0.0;
  bool ok = false;
};
TailFit geometric_tail(const double ell[3], const double value[3]);

/// Builds a NuEstimate from already computed ladder values.
NuEstimate nu_estimate_from_ladder(Side side, std::vector<LadderPoint> ladder);

NuEstimate nu_infinity_estimate(Side side, const CoefficientField& coeffs, double p,
                                const std::vector<double>& ell_ladder,
                                const Resolution& resolution, const SolveOptions& opts,
                                int threads = 1);

struct GapIntegral {
  double value = 0.0;
  /// a12 W' vanishes at every quadrature point.
  bool a12_dW_zero = true;
};

/// int |a22 W'^2|^{(p-2)/2} (a12 W') W over omega.
GapIntegral gap_integral_I2(const CrossSectionResult& cross, const CoefficientField& coeffs,
                            double p);

/// Rayleigh quotient of e^{-eps x1} W(x2) on (0, truncation) x omega.
/// Requires eps > 0 and truncation >= 10 / eps.
double exp_test_upper_bound(double eps, const CrossSectionResult& cross,
                            const CoefficientField& coeffs, double p, double truncation);

enum class SlabBoundVariant { AsPrinted, Squared };

struct SlabBound {
  double value = 0.0;
  int clamp_count = 0;
};

/// int (a22 W'^2 - T)^{p/2} / int |W|^p with T = a12 W' / a11 (AsPrinted) or
/// (a12 W')^2 / a11 (Squared); negative bases are clamped to 0 and counted.
SlabBound slab_bound(const CrossSectionResult& cross, const CoefficientField& coeffs, double p,
                     SlabBoundVariant variant);

struct Beta2Bound {
  double value = 0.0;
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  bool converged = false;
};

Beta2Bound beta2_upper_bound(double ell, const Resolution& resolution,
                             const CoefficientField& coeffs, double p, const SolveOptions& opts);

struct PiconeResidual {
  double min_raw = 0.0;
  /// Minimum of the residual divided by its local scale (sum of term magnitudes).
  double min_normalized = 0.0;
  int points = 0;
};

/// Minimum of the pointwise Picone residual R(u, W) over quadrature points
/// with W > w_floor. u must be nonnegative.
PiconeResidual picone_residual_min(const DiscreteField& u, const CrossSectionResult& cross,
                                   const CylinderMesh& mesh, const CoefficientField& coeffs,
                                   double p, double w_floor);

/// 1e-3 max W.
double default_w_floor(const CrossSectionResult& cross);

struct EndMassSplit {
  double d_plus = 0.0;
  double d_minus = 0.0;
  double n_plus = 0.0;
  double n_minus = 0.0;
};

/// p-mass and energy of u on x1 > 0 (plus) and x1 < 0 (minus).
EndMassSplit end_mass_split(const DiscreteField& u, const CylinderMesh& mesh,
                            const CoefficientField& coeffs, double p);

/// L^p distance on the first r units of the natural end between the
/// full-cylinder field translated to that end and the half-cylinder
/// minimizer. Plus pairs the left end with the half cylinder (0, l); Minus
/// pairs the right end with (-l, 0). Signs are aligned first.
double translate_distance(const DiscreteField& u_full, const CylinderMesh& full_mesh,
                          const DiscreteField& u_half, const CylinderMesh& half_mesh, Side side,
                          double r, double p);

struct SweepRow {
  double ell = 0.0;
  double p = 0.0;
  std::string family;
  double lambda_mixed = 0.0;
  double lambda_dirichlet = 0.0;
  double lambda_half_plus = 0.0;
  double lambda_half_minus = 0.0;
  double mu1 = 0.0;
  double gap = 0.0;
  double alpha_hat = 0.0;  // NaN when the decay window is too short
  double d_plus = 0.0;
  double d_minus = 0.0;
  double n_plus = 0.0;
  double n_minus = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;

  // Not part of the CSV.
  DecayFit decay;
  double central_mass = 0.0;
  EigenResult mixed;
  EigenResult dirichlet;
  EigenResult half_plus;
  EigenResult half_minus;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  CrossSectionResult cross;
  Resolution resolution;
};

/// Coefficients for `family` at exponent p; GradAligned uses the a22 = 1
/// cross-section state at nx2.
CoefficientField build_coefficients(const CoefficientFamily& family, double p, int nx2);

/// Mixed, DirichletAll and both half-cylinder solves for every ell. Rows are
/// independent and may run on `threads` workers; results do not depend on
/// the thread count.
SweepTable sweep_lambda(const std::vector<double>& ells, const CoefficientField& coeffs, double p,
                        const Resolution& resolution, const SolveOptions& opts, int threads = 1);

SweepTable sweep_lambda(const std::vector<double>& ells, const CoefficientFamily& family,
                        double p, const Resolution& resolution, const SolveOptions& opts,
                        int threads = 1);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace cylspectra
