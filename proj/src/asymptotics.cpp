#include "cylspectra/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cylspectra/errors.hpp"
#include "kernels.hpp"

namespace cylspectra {

const char* to_string(End end) { return end == End::Left ? "left" : "right"; }

namespace {

const CoefficientField& identity_field() {
  static const CoefficientField field = make_coefficients(CoefficientFamily::identity());
  return field;
}

int units_to_cells(const CylinderMesh& mesh, double length) {
  const double cells = length * mesh.spec().cells_per_unit;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9) {
    std::ostringstream os;
    os << "length " << length << " is not a whole number of cells";
    throw ConfigError(os.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace

// ---------------------------------------------------------------------------
// Slabs and decay

SlabProfile slab_integrals(const CylinderMesh& mesh, const DiscreteField& u, double p, End from) {
  check_field(mesh, u);
  const CylinderEnergy model(mesh, identity_field(), p);
  const ColumnIntegrals cols = model.column_integrals(u.values);
  const int per = mesh.spec().cells_per_unit;
  const int n1 = mesh.n1();
  SlabProfile profile;
  profile.from = from;
  for (int s = 0; (s + 1) * per <= n1; ++s) {
    SlabRecord rec;
    rec.index = s;
    for (int k = 0; k < per; ++k) {
      const int col = from == End::Left ? s * per + k : n1 - 1 - (s * per + k);
      rec.grad_energy += cols.grad_p[col];
      rec.p_mass += cols.p_mass[col];
    }
    profile.slabs.push_back(rec);
  }
  return profile;
}

End dominant_end(const CylinderMesh& mesh, const DiscreteField& u, double p) {
  switch (mesh.spec().shape) {
    case Shape::HalfPlus: return End::Left;
    case Shape::HalfMinus: return End::Right;
    default: break;
  }
  check_field(mesh, u);
  const CylinderEnergy model(mesh, identity_field(), p);
  const ColumnIntegrals cols = model.column_integrals(u.values);
  const int n1 = mesh.n1();
  double left = 0.0, right = 0.0;
  for (int i = 0; i < n1 / 2; ++i) left += cols.p_mass[i];
  for (int i = n1 - n1 / 2; i < n1; ++i) right += cols.p_mass[i];
  return right > left ? End::Right : End::Left;
}

DecayWindow default_decay_window(double ell) {
  return {2, static_cast<int>(std::floor(ell)) - 2};
}

DecayFit fit_decay(const SlabProfile& profile, const DecayWindow& window) {
  std::vector<double> xs, ys;
  for (const SlabRecord& rec : profile.slabs) {
    if (rec.index < window.first || rec.index > window.last) continue;
    if (!(rec.grad_energy > 0.0)) {
      std::ostringstream os;
      os << "slab " << rec.index << " has nonpositive gradient energy " << rec.grad_energy;
      throw PreconditionError(os.str());
    }
    xs.push_back(rec.index);
    ys.push_back(std::log(rec.grad_energy));
  }
  if (xs.size() < 3) throw PreconditionError("decay window holds fewer than 3 slabs");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - (my + slope * (xs[k] - mx));
    ss_res += e * e;
  }
  DecayFit fit;
  fit.window = window;
  fit.alpha_hat = std::exp(slope);
  // A constant profile is fitted exactly.
  const double scale = std::max(1.0, std::abs(my));
  fit.r_squared = syy <= 1e-28 * scale * scale * n ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  fit.decays = fit.alpha_hat < 1.0 - 1e-12;
  return fit;
}

double central_mass(const CylinderMesh& mesh, const DiscreteField& u, double p, double r) {
  if (mesh.spec().shape != Shape::FullCylinder) {
    throw PreconditionError("central_mass needs a full cylinder");
  }
  if (!(r > 0.0) || r > mesh.spec().ell) throw PreconditionError("central radius out of range");
  check_field(mesh, u);
  const CylinderEnergy model(mesh, identity_field(), p);
  const ColumnIntegrals cols = model.column_integrals(u.values);
  const int half = mesh.n1() / 2;
  const int k = units_to_cells(mesh, r);
  double total = 0.0;
  for (int i = half - k; i < half + k; ++i) total += cols.p_mass[i];
  return total;
}

// ---------------------------------------------------------------------------
// Semi-infinite estimates

TailFit geometric_tail(const double ell[3], const double value[3]) {
  TailFit fit;
  fit.value = value[2];
  const double d1 = ell[1] - ell[0];
  const double d2 = ell[2] - ell[1];
  const double delta1 = value[1] - value[0];
  const double delta2 = value[2] - value[1];
  if (!(d1 > 0.0 && d2 > 0.0) || delta1 == 0.0) return fit;
  const double r = delta2 / delta1;
  const double r_max = d2 / d1;
  if (!(r > 0.0 && r < r_max)) return fit;

  double rho = 0.0;
  if (std::abs(d1 - d2) <= 1e-12 * d1) {
    rho = std::pow(r, 1.0 / d1);
  } else {
    // g(rho) = rho^d1 (1 - rho^d2) / (1 - rho^d1) increases from 0 to d2/d1.
    const auto g = [&](double x) {
      return std::pow(x, d1) * (1.0 - std::pow(x, d2)) / (1.0 - std::pow(x, d1));
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) < r ? lo : hi) = mid;
    }
    rho = 0.5 * (lo + hi);
  }
  if (!(rho > 0.0 && rho < 1.0)) return fit;
  fit.rho = rho;
  if (std::abs(d1 - d2) <= 1e-12 * d1) {
    fit.value = value[2] - delta2 * delta2 / (delta2 - delta1);
  } else {
    const double q = std::pow(rho, d2);
    fit.value = value[2] - delta2 * q / (q - 1.0);
  }
  fit.ok = std::isfinite(fit.value);
  if (!fit.ok) fit.value = value[2];
  return fit;
}

NuEstimate nu_estimate_from_ladder(Side side, std::vector<LadderPoint> ladder) {
  if (ladder.size() < 3) throw ConfigError("nu estimate needs a ladder of at least 3 lengths");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (!(ladder[i].ell > ladder[i - 1].ell)) throw ConfigError("ladder lengths must increase");
  }
  NuEstimate est;
  est.side = side;
  est.ladder = std::move(ladder);
  est.last_value = est.ladder.back().lambda_tilde;
  est.monotone_ok = true;
  for (std::size_t i = 1; i < est.ladder.size(); ++i) {
    if (est.ladder[i].lambda_tilde > est.ladder[i - 1].lambda_tilde + kLadderSlack) {
      est.monotone_ok = false;
    }
  }
  est.extrapolated = est.last_value;
  if (est.monotone_ok) {
    const std::size_t n = est.ladder.size();
    const double ell[3] = {est.ladder[n - 3].ell, est.ladder[n - 2].ell, est.ladder[n - 1].ell};
    const double val[3] = {est.ladder[n - 3].lambda_tilde, est.ladder[n - 2].lambda_tilde,
                           est.ladder[n - 1].lambda_tilde};
    const TailFit tail = geometric_tail(ell, val);
    est.fit_ok = tail.ok;
    est.extrapolated = tail.value;
  }
  return est;
}

NuEstimate nu_infinity_estimate(Side side, const CoefficientField& coeffs, double p,
                                const std::vector<double>& ell_ladder,
                                const Resolution& resolution, const SolveOptions& opts,
                                int threads) {
  if (ell_ladder.size() < 3) throw ConfigError("nu estimate needs a ladder of at least 3 lengths");
  const CrossSectionResult cross = cross_section_ground_state(resolution.nx2, coeffs, p, opts);
  std::vector<LadderPoint> ladder(ell_ladder.size());
  parallel_for(static_cast<int>(ell_ladder.size()), threads, [&](int i) {
    const EigenResult r = half_cylinder_eigen(side, ell_ladder[i], resolution, coeffs, p, opts, cross);
    ladder[i] = {ell_ladder[i], r.lambda, r.converged};
  });
  return nu_estimate_from_ladder(side, std::move(ladder));
}

// ---------------------------------------------------------------------------
// Cross-section diagnostics

namespace {

// Visits every cross quadrature point with (x2, weight, W, W').
template <typename Fn>
void for_cross_points(const CrossSectionResult& cross, Fn&& fn) {
  const QuadratureRule& quad = default_quadrature();
  const double h = cross.h();
  for (int j = 0; j < cross.nx2; ++j) {
    const double slope = (cross.W[j + 1] - cross.W[j]) / h;
    for (int b = 0; b < quad.points_per_dir; ++b) {
      const double s = quad.abscissae[b];
      const double x2 = -0.5 + (j + s) * h;
      const double w = (1.0 - s) * cross.W[j] + s * cross.W[j + 1];
      fn(x2, quad.weights[b] * h, w, slope);
    }
  }
}

double cross_p_mass(const CrossSectionResult& cross, double p) {
  double total = 0.0;
  for_cross_points(cross, [&](double, double wt, double w, double) {
    total += wt * std::pow(std::abs(w), p);
  });
  return total;
}

}  // namespace

GapIntegral gap_integral_I2(const CrossSectionResult& cross, const CoefficientField& coeffs,
                            double p) {
  check_exponent(p);
  GapIntegral out;
  double scale = 0.0;
  for_cross_points(cross, [&](double, double, double, double dw) { scale = std::max(scale, std::abs(dw)); });
  const detail::PowerHalf power(p);
  for_cross_points(cross, [&](double x2, double wt, double w, double dw) {
    const MatrixEntries a = coeffs.at(x2);
    const double t = a.a12 * dw;
    if (std::abs(t) > 1e-14 * std::max(1.0, scale)) out.a12_dW_zero = false;
    out.value += wt * power.reduced(std::abs(a.a22 * dw * dw)) * t * w;
  });
  return out;
}

double exp_test_upper_bound(double eps, const CrossSectionResult& cross,
                            const CoefficientField& coeffs, double p, double truncation) {
  check_exponent(p);
  if (!(eps > 0.0)) throw PreconditionError("exp_test_upper_bound needs eps > 0");
  if (!(truncation >= 10.0 / eps)) {
    std::ostringstream os;
    os << "truncation " << truncation << " < 10/eps = " << 10.0 / eps
       << ": the exponential tail dominates";
    throw PreconditionError(os.str());
  }
  // The x1 factor e^{-p eps x1} is common to both integrals.
  const double axial = -std::expm1(-p * eps * truncation) / (p * eps);
  double energy = 0.0;
  for_cross_points(cross, [&](double x2, double wt, double w, double dw) {
    const MatrixEntries a = coeffs.at(x2);
    // grad v = e^{-eps x1} (-eps W, W')
    const double q = a.a11 * eps * eps * w * w - 2.0 * a.a12 * eps * w * dw + a.a22 * dw * dw;
    energy += wt * std::pow(std::abs(q), 0.5 * p);
  });
  return (axial * energy) / (axial * cross_p_mass(cross, p));
}

SlabBound slab_bound(const CrossSectionResult& cross, const CoefficientField& coeffs, double p,
                     SlabBoundVariant variant) {
  check_exponent(p);
  SlabBound out;
  double total = 0.0;
  for_cross_points(cross, [&](double x2, double wt, double, double dw) {
    const MatrixEntries a = coeffs.at(x2);
    const double t = a.a12 * dw;
    const double sub = variant == SlabBoundVariant::AsPrinted ? t / a.a11 : t * t / a.a11;
    double base = a.a22 * dw * dw - sub;
    if (base < 0.0) {
      base = 0.0;
      ++out.clamp_count;
    }
    total += wt * std::pow(base, 0.5 * p);
  });
  out.value = total / cross_p_mass(cross, p);
  return out;
}

Beta2Bound beta2_upper_bound(double ell, const Resolution& resolution,
                             const CoefficientField& coeffs, double p, const SolveOptions& opts) {
  const CrossSectionResult cross = cross_section_ground_state(resolution.nx2, coeffs, p, opts);
  const EigenResult plus = half_cylinder_eigen(Side::Plus, ell, resolution, coeffs, p, opts, cross);
  const EigenResult minus = half_cylinder_eigen(Side::Minus, ell, resolution, coeffs, p, opts, cross);
  Beta2Bound out;
  out.lambda_plus = plus.lambda;
  out.lambda_minus = minus.lambda;
  out.value = std::max(plus.lambda, minus.lambda);
  out.converged = plus.converged && minus.converged;
  return out;
}

// ---------------------------------------------------------------------------
// Picone residual

double default_w_floor(const CrossSectionResult& cross) { return 1e-3 * cross.W.maxCoeff(); }

PiconeResidual picone_residual_min(const DiscreteField& u, const CrossSectionResult& cross,
                                   const CylinderMesh& mesh, const CoefficientField& coeffs,
                                   double p, double w_floor) {
  check_exponent(p);
  check_field(mesh, u);
  if (cross.nx2 != mesh.n2()) throw DimensionError("cross-section and mesh resolutions differ");
  if (!(w_floor > 0.0)) throw PreconditionError("w_floor must be positive");
  if (u.values.size() > 0 && u.values.minCoeff() < 0.0) {
    std::ostringstream os;
    os << "Picone residual needs u >= 0; min nodal value " << u.values.minCoeff();
    throw PreconditionError(os.str());
  }
  const CylinderEnergy model(mesh, coeffs, p);
  const Eigen::VectorXd U = model.expand(u.values);
  const QuadratureRule& quad = default_quadrature();
  const int nq = quad.points_per_dir;
  const double h1 = mesh.h1(), h2 = mesh.h2();
  const detail::PowerHalf power(p);

  PiconeResidual out;
  out.min_raw = std::numeric_limits<double>::infinity();
  out.min_normalized = std::numeric_limits<double>::infinity();
  for (int j = 0; j < mesh.n2(); ++j) {
    const double dw = (cross.W[j + 1] - cross.W[j]) / h2;
    for (int b = 0; b < nq; ++b) {
      const double eta = quad.abscissae[b];
      const double w = (1.0 - eta) * cross.W[j] + eta * cross.W[j + 1];
      if (!(w > w_floor)) continue;
      const MatrixEntries& a = model.coefficient(j, b);
      const double av1 = a.a12 * dw;  // A grad v with grad v = (0, W')
      const double av2 = a.a22 * dw;
      const double qv = av2 * dw;
      const double rv = power.reduced(std::abs(qv));
      for (int i = 0; i < mesh.n1(); ++i) {
        const auto nodes = mesh.cell_nodes(i, j);
        const double u00 = U[nodes[0]], u10 = U[nodes[1]], u01 = U[nodes[2]], u11 = U[nodes[3]];
        for (int a1 = 0; a1 < nq; ++a1) {
          const double xi = quad.abscissae[a1];
          const double uu = (1.0 - xi) * (1.0 - eta) * u00 + xi * (1.0 - eta) * u10 +
                            (1.0 - xi) * eta * u01 + xi * eta * u11;
          const double gu1 = ((1.0 - eta) * (u10 - u00) + eta * (u11 - u01)) / h1;
          const double gu2 = ((1.0 - xi) * (u01 - u00) + xi * (u11 - u10)) / h2;
          const double qu = gu1 * (a.a11 * gu1 + a.a12 * gu2) + gu2 * (a.a12 * gu1 + a.a22 * gu2);
          const double lhs = power.reduced(std::abs(qu)) * std::abs(qu);
          const double ratio = uu / w;
          const double cross_term = av1 * gu1 + av2 * gu2;
          const double t1 = p * std::pow(ratio, p - 1.0) * cross_term;
          const double t2 = (p - 1.0) * std::pow(ratio, p) * qv;
          const double residual = lhs - rv * (t1 - t2);
          const double scale = lhs + rv * (std::abs(t1) + std::abs(t2));
          out.min_raw = std::min(out.min_raw, residual);
          if (scale > 0.0) out.min_normalized = std::min(out.min_normalized, residual / scale);
          ++out.points;
        }
      }
    }
  }
  if (out.points == 0) throw PreconditionError("no quadrature point has W above w_floor");
  if (!std::isfinite(out.min_normalized)) out.min_normalized = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// End splits and translates

EndMassSplit end_mass_split(const DiscreteField& u, const CylinderMesh& mesh,
                            const CoefficientField& coeffs, double p) {
  if (mesh.spec().shape != Shape::FullCylinder) {
    throw PreconditionError("end_mass_split needs a full cylinder");
  }
  check_field(mesh, u);
  const CylinderEnergy model(mesh, coeffs, p);
  const ColumnIntegrals cols = model.column_integrals(u.values);
  const int half = mesh.n1() / 2;
  EndMassSplit out;
  for (int i = 0; i < mesh.n1(); ++i) {
    if (i < half) {
      out.d_minus += cols.p_mass[i];
      out.n_minus += cols.energy[i];
    } else {
      out.d_plus += cols.p_mass[i];
      out.n_plus += cols.energy[i];
    }
  }
  return out;
}

double translate_distance(const DiscreteField& u_full, const CylinderMesh& full_mesh,
                          const DiscreteField& u_half, const CylinderMesh& half_mesh, Side side,
                          double r, double p) {
  check_exponent(p);
  check_field(full_mesh, u_full);
  check_field(half_mesh, u_half);
  if (full_mesh.spec().shape != Shape::FullCylinder) {
    throw PreconditionError("translate_distance needs a full-cylinder field first");
  }
  const Shape want = side == Side::Plus ? Shape::HalfPlus : Shape::HalfMinus;
  if (half_mesh.spec().shape != want) throw PreconditionError("half mesh does not match side");
  if (full_mesh.n2() != half_mesh.n2() ||
      full_mesh.spec().cells_per_unit != half_mesh.spec().cells_per_unit) {
    throw DimensionError("translate_distance needs identical grids");
  }
  if (!(r > 0.0) || r > full_mesh.spec().ell || r > half_mesh.spec().ell) {
    throw PreconditionError("translate radius exceeds a cylinder length");
  }
  const int k = units_to_cells(half_mesh, r);
  const int stride = half_mesh.n2() + 1;

  const CylinderEnergy full_model(full_mesh, identity_field(), p);
  const CylinderEnergy half_model(half_mesh, identity_field(), p);
  const Eigen::VectorXd F = full_model.expand(u_full.values);
  const Eigen::VectorXd H = half_model.expand(u_half.values);

  // Axial node ranges: the natural end of the half cylinder is x1 = 0.
  const int half_begin = side == Side::Plus ? 0 : half_mesh.n1() - k;
  const int full_begin = side == Side::Plus ? 0 : full_mesh.n1() - k;

  double sf = 0.0, sh = 0.0;
  for (int i = 0; i <= k; ++i) {
    for (int j = 0; j <= half_mesh.n2(); ++j) {
      sf += F[(full_begin + i) * stride + j];
      sh += H[(half_begin + i) * stride + j];
    }
  }
  const double sign_f = sf < 0.0 ? -1.0 : 1.0;
  const double sign_h = sh < 0.0 ? -1.0 : 1.0;

  Eigen::VectorXd diff = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(half_mesh.node_count()));
  for (int i = 0; i <= k; ++i) {
    for (int j = 0; j <= half_mesh.n2(); ++j) {
      diff[(half_begin + i) * stride + j] =
          sign_f * F[(full_begin + i) * stride + j] - sign_h * H[(half_begin + i) * stride + j];
    }
  }
  const ColumnIntegrals cols = half_model.column_integrals_nodal(diff);
  double total = 0.0;
  for (int i = half_begin; i < half_begin + k; ++i) total += cols.p_mass[i];
  return std::pow(total, 1.0 / p);
}

// ---------------------------------------------------------------------------
// Sweeps

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CoefficientField build_coefficients(const CoefficientFamily& family, double p, int nx2) {
  if (family.kind != FamilyKind::GradAligned) return make_coefficients(family);
  const CrossSectionResult cross = cross_section_ground_state(nx2, identity_field(), p);
  return make_coefficients(family, &cross);
}

namespace {

SweepRow solve_row(double ell, const CoefficientField& coeffs, double p,
                   const Resolution& resolution, const SolveOptions& opts,
                   const CrossSectionResult& cross) {
  SweepRow row;
  row.ell = ell;
  row.p = p;
  row.family = coeffs.label() + (coeffs.reflected() ? "~reflected" : "");
  row.mu1 = cross.mu1;

  DomainSpec spec;
  spec.shape = Shape::FullCylinder;
  spec.ell = ell;
  spec.cells_per_unit = resolution.cells_per_unit;
  spec.nx2 = resolution.nx2;
  spec.bc = BoundaryKind::Mixed;
  const CylinderMesh mixed_mesh = build_mesh(spec);
  spec.bc = BoundaryKind::DirichletAll;
  const CylinderMesh dirichlet_mesh = build_mesh(spec);

  row.mixed = minimize_rayleigh(mixed_mesh, coeffs, p, opts, cross);
  row.dirichlet = minimize_rayleigh(dirichlet_mesh, coeffs, p, opts, cross);
  row.half_plus = half_cylinder_eigen(Side::Plus, ell, resolution, coeffs, p, opts, cross);
  row.half_minus = half_cylinder_eigen(Side::Minus, ell, resolution, coeffs, p, opts, cross);

  row.lambda_mixed = row.mixed.lambda;
  row.lambda_dirichlet = row.dirichlet.lambda;
  row.lambda_half_plus = row.half_plus.lambda;
  row.lambda_half_minus = row.half_minus.lambda;
  row.gap = row.mu1 - row.lambda_mixed;

  const EndMassSplit split = end_mass_split(row.mixed.field, mixed_mesh, coeffs, p);
  row.d_plus = split.d_plus;
  row.d_minus = split.d_minus;
  row.n_plus = split.n_plus;
  row.n_minus = split.n_minus;

  row.alpha_hat = std::numeric_limits<double>::quiet_NaN();
  const DecayWindow window = default_decay_window(ell);
  const End end = dominant_end(mixed_mesh, row.mixed.field, p);
  const SlabProfile profile = slab_integrals(mixed_mesh, row.mixed.field, p, end);
  try {
    row.decay = fit_decay(profile, window);
    row.alpha_hat = row.decay.alpha_hat;
  } catch (const PreconditionError&) {
    row.decay.window = window;
  }
  row.central_mass = ell >= 2.0 ? central_mass(mixed_mesh, row.mixed.field, p, 2.0)
                                 : std::numeric_limits<double>::quiet_NaN();

  row.iterations = row.mixed.iterations;
  row.residual = row.mixed.final_residual;
  row.converged = row.mixed.converged && row.dirichlet.converged && row.half_plus.converged &&
                  row.half_minus.converged;
  return row;
}

}  // namespace

SweepTable sweep_lambda(const std::vector<double>& ells, const CoefficientField& coeffs, double p,
                        const Resolution& resolution, const SolveOptions& opts, int threads) {
  check_exponent(p);
  opts.validate();
  if (ells.empty()) throw ConfigError("sweep needs at least one length");
  for (std::size_t i = 1; i < ells.size(); ++i) {
    if (!(ells[i] > ells[i - 1])) throw ConfigError("sweep lengths must be strictly increasing");
  }
  for (double ell : ells) {
    DomainSpec spec;
    spec.ell = ell;
    spec.cells_per_unit = resolution.cells_per_unit;
    spec.nx2 = resolution.nx2;
    validate(spec);
  }
  SweepTable table;
  table.resolution = resolution;
  table.cross = cross_section_ground_state(resolution.nx2, coeffs, p, opts);
  table.rows.resize(ells.size());
  parallel_for(static_cast<int>(ells.size()), threads, [&](int i) {
    table.rows[i] = solve_row(ells[i], coeffs, p, resolution, opts, table.cross);
  });
  return table;
}

SweepTable sweep_lambda(const std::vector<double>& ells, const CoefficientFamily& family,
                        double p, const Resolution& resolution, const SolveOptions& opts,
                        int threads) {
  return sweep_lambda(ells, build_coefficients(family, p, resolution.nx2), p, resolution, opts,
                      threads);
}

}  // namespace cylspectra
