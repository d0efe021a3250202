#include "doctest.h"

#include <atomic>

#include "cylspectra/asymptotics.hpp"
#include "cylspectra/errors.hpp"
#include "oracles.hpp"

using namespace cylspectra;

namespace {

const CoefficientField& identity() {
  static const CoefficientField a = make_coefficients(CoefficientFamily::identity());
  return a;
}

CylinderMesh mesh_of(Shape shape, double ell, int cpu, int nx2) {
  DomainSpec s;
  s.shape = shape;
  s.bc = shape == Shape::FullCylinder ? BoundaryKind::Mixed : BoundaryKind::HalfCylinder;
  s.ell = ell;
  s.cells_per_unit = cpu;
  s.nx2 = nx2;
  return build_mesh(s);
}

// Free-DOF values of a full nodal vector.
DiscreteField restrict_to(const CylinderMesh& mesh, const Eigen::VectorXd& nodal) {
  DiscreteField u = DiscreteField::zeros(mesh);
  for (std::size_t d = 0; d < mesh.free_dof_count(); ++d) u.values[d] = nodal[mesh.dof_nodes()[d]];
  return u;
}

SlabProfile geometric_profile(double ratio, int n) {
  SlabProfile prof;
  for (int k = 0; k < n; ++k) prof.slabs.push_back({k, 3.0 * std::pow(ratio, k), 1.0});
  return prof;
}

}  // namespace

TEST_CASE("decay fit recovers a geometric ratio") {
  const DecayFit fit = fit_decay(geometric_profile(0.5, 12), default_decay_window(12.0));
  CHECK(fit.alpha_hat == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK(fit.decays);
  CHECK(fit.window.first == 2);
  CHECK(fit.window.last == 10);

  const DecayFit flat = fit_decay(geometric_profile(1.0, 8), {1, 6});
  CHECK(flat.alpha_hat == doctest::Approx(1.0));
  CHECK_FALSE(flat.decays);

  CHECK_THROWS_AS(fit_decay(geometric_profile(0.5, 4), {2, 3}), PreconditionError);
  SlabProfile zero = geometric_profile(0.5, 8);
  zero.slabs[4].grad_energy = 0.0;
  CHECK_THROWS_AS(fit_decay(zero, {2, 6}), PreconditionError);
}

TEST_CASE("slab integrals of a lifted profile are uniform") {
  const int nx2 = 16;
  const CrossSectionResult cross = cross_section_ground_state(nx2, identity(), 2.0);
  const CylinderMesh mesh = mesh_of(Shape::FullCylinder, 3.0, 4, nx2);
  const DiscreteField w = lift_cross_section(cross, mesh);
  const SlabProfile prof = slab_integrals(mesh, w, 2.0, End::Left);
  REQUIRE(prof.slabs.size() == 6);
  for (const SlabRecord& s : prof.slabs) {
    CHECK(s.p_mass == doctest::Approx(1.0 / 6.0));
    CHECK(s.grad_energy == doctest::Approx(cross.mu1 / 6.0));
  }
  CHECK(central_mass(mesh, w, 2.0, 2.0) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("dominant end follows the heavier half") {
  const int nx2 = 8;
  const CylinderMesh mesh = mesh_of(Shape::FullCylinder, 2.0, 2, nx2);
  DiscreteField u = DiscreteField::zeros(mesh);
  for (std::size_t d = 0; d < mesh.free_dof_count(); ++d) {
    const int i = mesh.dof_nodes()[d] / (mesh.n2() + 1);
    u.values[d] = std::exp(0.5 * mesh.x1(i));
  }
  CHECK(dominant_end(mesh, u, 2.0) == End::Right);
  u.values = u.values.reverse().eval();
  CHECK(dominant_end(mesh, u, 2.0) == End::Left);
  const CylinderMesh minus = mesh_of(Shape::HalfMinus, 2.0, 2, nx2);
  CHECK(dominant_end(minus, DiscreteField::zeros(minus), 2.0) == End::Right);
}

TEST_CASE("geometric tail extrapolation") {
  const double nu = 9.87, c = 0.6, rho = 0.8;
  const double eq[3] = {4.0, 8.0, 12.0};
  double v[3];
  for (int k = 0; k < 3; ++k) v[k] = nu + c * std::pow(rho, eq[k]);
  TailFit fit = geometric_tail(eq, v);
  CHECK(fit.ok);
  CHECK(fit.value == doctest::Approx(nu).epsilon(1e-12));
  CHECK(fit.rho == doctest::Approx(rho).epsilon(1e-12));

  const double uneq[3] = {4.0, 8.0, 16.0};
  for (int k = 0; k < 3; ++k) v[k] = nu + c * std::pow(rho, uneq[k]);
  fit = geometric_tail(uneq, v);
  CHECK(fit.ok);
  CHECK(fit.value == doctest::Approx(nu).epsilon(1e-10));

  const double flat[3] = {1.0, 1.0, 1.0};
  fit = geometric_tail(eq, flat);
  CHECK_FALSE(fit.ok);
  CHECK(fit.value == 1.0);
}

TEST_CASE("nu estimate from a ladder") {
  std::vector<LadderPoint> ladder;
  for (double ell : {2.0, 4.0, 6.0, 8.0}) ladder.push_back({ell, 5.0 + std::pow(0.5, ell), true});
  NuEstimate est = nu_estimate_from_ladder(Side::Minus, ladder);
  CHECK(est.monotone_ok);
  CHECK(est.fit_ok);
  CHECK(est.last_value == doctest::Approx(5.0 + std::pow(0.5, 8.0)));
  CHECK(est.extrapolated == doctest::Approx(5.0).epsilon(1e-12));
  ladder[2].lambda_tilde += 0.1;
  est = nu_estimate_from_ladder(Side::Minus, ladder);
  CHECK_FALSE(est.monotone_ok);
  CHECK_THROWS_AS(nu_estimate_from_ladder(Side::Plus, {ladder[0], ladder[1]}), ConfigError);
}

TEST_CASE("gap integral") {
  const int nx2 = 32;
  for (double p : {2.0, 3.0}) {
    CAPTURE(p);
    const CrossSectionResult id_cross = cross_section_ground_state(nx2, identity(), p);
    const GapIntegral none = gap_integral_I2(id_cross, identity(), p);
    CHECK(none.value == 0.0);
    CHECK(none.a12_dW_zero);

    // Constant a12 against an even W integrates to zero.
    const CoefficientField cst = make_coefficients(CoefficientFamily::constant_off_diag(0.3));
    const CrossSectionResult cst_cross = cross_section_ground_state(nx2, cst, p);
    const GapIntegral zero = gap_integral_I2(cst_cross, cst, p);
    CHECK_FALSE(zero.a12_dW_zero);
    CHECK(std::abs(zero.value) < 1e-8);

    // a12 = c W' makes the integrand c |W'|^p W >= 0, linear in c.
    const CoefficientField g1 = make_coefficients(CoefficientFamily::grad_aligned(0.05), &id_cross);
    const CoefficientField g2 = make_coefficients(CoefficientFamily::grad_aligned(0.1), &id_cross);
    const double i1 = gap_integral_I2(id_cross, g1, p).value;
    CHECK(i1 > 0.0);
    CHECK(gap_integral_I2(id_cross, g2, p).value == doctest::Approx(2.0 * i1));
  }
}

TEST_CASE("exponential test function quotient") {
  const CrossSectionResult cross = cross_section_ground_state(32, identity(), 2.0);
  for (double eps : {0.1, 0.05, 0.01}) {
    CHECK(exp_test_upper_bound(eps, cross, identity(), 2.0, 10.0 / eps) ==
          doctest::Approx(cross.mu1 + eps * eps).epsilon(1e-10));
  }
  CHECK_THROWS_AS(exp_test_upper_bound(0.1, cross, identity(), 2.0, 50.0), PreconditionError);
  CHECK_THROWS_AS(exp_test_upper_bound(0.0, cross, identity(), 2.0, 50.0), PreconditionError);
}

TEST_CASE("slab bound reduces to mu1 without coupling") {
  for (double p : {2.0, 3.0}) {
    const CrossSectionResult cross = cross_section_ground_state(32, identity(), p);
    for (auto variant : {SlabBoundVariant::AsPrinted, SlabBoundVariant::Squared}) {
      const SlabBound b = slab_bound(cross, identity(), p, variant);
      CHECK(b.value == doctest::Approx(cross.mu1).epsilon(1e-10));
      CHECK(b.clamp_count == 0);
    }
  }
  const CoefficientField cst = make_coefficients(CoefficientFamily::constant_off_diag(0.3));
  const CrossSectionResult cross = cross_section_ground_state(32, cst, 2.0);
  const SlabBound sq = slab_bound(cross, cst, 2.0, SlabBoundVariant::Squared);
  CHECK(sq.value == doctest::Approx((1.0 - 0.09) * cross.mu1).epsilon(1e-10));
}

TEST_CASE("Picone residual vanishes on multiples of W") {
  const int nx2 = 16;
  for (double p : {2.0, 3.0}) {
    CAPTURE(p);
    const CrossSectionResult cross = cross_section_ground_state(nx2, identity(), p);
    const CylinderMesh mesh = mesh_of(Shape::FullCylinder, 2.0, 4, nx2);
    const Eigen::VectorXd nodal = lift_nodal(cross, mesh);
    for (double scale : {1.0, 2.0}) {
      const DiscreteField u = restrict_to(mesh, scale * nodal);
      const PiconeResidual r = picone_residual_min(u, cross, mesh, identity(), p, default_w_floor(cross));
      CHECK(r.points > 0);
      CHECK(std::abs(r.min_normalized) < 1e-10);
    }
    DiscreteField neg = restrict_to(mesh, -nodal);
    CHECK_THROWS_AS(picone_residual_min(neg, cross, mesh, identity(), p, 0.0), PreconditionError);
  }
}

TEST_CASE("Picone residual is nonnegative for a coupled minimizer") {
  const int nx2 = 16;
  const CoefficientField a = make_coefficients(CoefficientFamily::constant_off_diag(0.3));
  const CrossSectionResult cross = cross_section_ground_state(nx2, a, 3.0);
  const CylinderMesh mesh = mesh_of(Shape::FullCylinder, 2.0, 4, nx2);
  const EigenResult r = minimize_rayleigh(mesh, a, 3.0, {}, cross);
  const PiconeResidual pr = picone_residual_min(r.field, cross, mesh, a, 3.0, default_w_floor(cross));
  CHECK(pr.min_normalized >= -1e-10);
}

TEST_CASE("end mass split of a symmetric field") {
  const int nx2 = 16;
  const CrossSectionResult cross = cross_section_ground_state(nx2, identity(), 2.0);
  const CylinderMesh mesh = mesh_of(Shape::FullCylinder, 2.0, 4, nx2);
  const DiscreteField w = lift_cross_section(cross, mesh);
  const EndMassSplit s = end_mass_split(w, mesh, identity(), 2.0);
  CHECK(s.d_plus == doctest::Approx(0.5));
  CHECK(s.d_minus == doctest::Approx(0.5));
  CHECK(s.n_plus == doctest::Approx(cross.mu1 / 2.0));
  CHECK(s.n_plus + s.n_minus == doctest::Approx(rayleigh(mesh, identity(), w, 2.0)));
}

TEST_CASE("translate distance") {
  const int nx2 = 16;
  const double p = 2.0, r = 1.0;
  const CrossSectionResult cross = cross_section_ground_state(nx2, identity(), p);
  const CylinderMesh full = mesh_of(Shape::FullCylinder, 3.0, 4, nx2);
  const DiscreteField u_full = restrict_to(full, lift_nodal(cross, full));
  const CrossSectionEnergy section(nx2, p);
  const double w_mass = section.p_mass(cross.W.segment(1, nx2 - 1));
  for (Shape shape : {Shape::HalfPlus, Shape::HalfMinus}) {
    const Side side = shape == Shape::HalfPlus ? Side::Plus : Side::Minus;
    const CylinderMesh half = mesh_of(shape, 3.0, 4, nx2);
    const Eigen::VectorXd w_half = lift_nodal(cross, half);
    CHECK(translate_distance(u_full, full, restrict_to(half, w_half), half, side, r, p) <
          1e-12);
    CHECK(translate_distance(u_full, full, restrict_to(half, 2.0 * w_half), half, side, r, p) ==
          doctest::Approx(std::pow(r * w_mass, 1.0 / p)));
    CHECK(translate_distance(u_full, full, restrict_to(half, -w_half), half, side, r, p) < 1e-12);
  }
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<std::atomic<int>> hits(37);
  parallel_for(37, 4, [&](int i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(8, 3,
                               [](int i) {
                                 if (i == 5) throw SolverError("boom");
                               }),
                  SolverError);
}

TEST_CASE("sweep rows do not depend on the thread count") {
  const CoefficientField a = make_coefficients(CoefficientFamily::constant_off_diag(0.3));
  const Resolution res{16, 4};
  const SweepTable one = sweep_lambda({1.0, 2.0, 3.0}, a, 2.0, res, {}, 1);
  const SweepTable three = sweep_lambda({1.0, 2.0, 3.0}, a, 2.0, res, {}, 3);
  REQUIRE(one.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(one.rows[i].lambda_mixed == three.rows[i].lambda_mixed);
    CHECK(one.rows[i].lambda_half_minus == three.rows[i].lambda_half_minus);
    CHECK(one.rows[i].d_plus == three.rows[i].d_plus);
    CHECK(one.rows[i].gap == doctest::Approx(one.rows[i].mu1 - one.rows[i].lambda_mixed));
    CHECK(one.rows[i].d_plus + one.rows[i].d_minus == doctest::Approx(1.0));
    CHECK(one.rows[i].n_plus + one.rows[i].n_minus == doctest::Approx(one.rows[i].lambda_mixed));
    CHECK(one.rows[i].lambda_mixed <= one.rows[i].mu1);
    CHECK(one.rows[i].lambda_dirichlet >= one.rows[i].mu1);
  }
  CHECK_THROWS_AS(sweep_lambda({2.0, 1.0}, a, 2.0, res, {}, 1), ConfigError);
}
