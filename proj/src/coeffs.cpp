#include "cylspectra/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cylspectra/eigensolve.hpp"
#include "cylspectra/errors.hpp"

namespace cylspectra {

double MatrixEntries::min_eigenvalue() const {
  const double mean = 0.5 * (a11 + a22);
  const double half_diff = 0.5 * (a11 - a22);
  return mean - std::hypot(half_diff, a12);
}

double MatrixEntries::max_eigenvalue() const {
  const double mean = 0.5 * (a11 + a22);
  const double half_diff = 0.5 * (a11 - a22);
  return mean + std::hypot(half_diff, a12);
}

std::string CoefficientFamily::label() const {
  std::ostringstream os;
  switch (kind) {
    case FamilyKind::Identity: return "Identity";
    case FamilyKind::ConstantOffDiag: os << "ConstantOffDiag(" << c << ")"; break;
    case FamilyKind::LinearOffDiag: os << "LinearOffDiag(" << c << ")"; break;
    case FamilyKind::GradAligned: os << "GradAligned(" << c << ")"; break;
    case FamilyKind::Tabulated: os << "Tabulated(" << samples.size() << ")"; break;
  }
  return os.str();
}

namespace {

struct SampledBounds {
  double margin = 0.0;
  double sup = 0.0;
};

SampledBounds sample_bounds(const CoefficientField& field, int n_samples) {
  SampledBounds b{std::numeric_limits<double>::infinity(), 0.0};
  for (int s = 0; s < n_samples; ++s) {
    const double x2 = -0.5 + static_cast<double>(s) / (n_samples - 1);
    const MatrixEntries e = field.at(x2);
    b.margin = std::min(b.margin, e.min_eigenvalue());
    b.sup = std::max(b.sup, std::max(std::abs(e.min_eigenvalue()), std::abs(e.max_eigenvalue())));
  }
  return b;
}

}  // namespace

CoefficientField::CoefficientField(Sampler sampler, std::string label, bool reflected)
    : sampler_(std::move(sampler)), label_(std::move(label)), reflected_(reflected) {
  const SampledBounds b = sample_bounds(*this, kEllipticitySamples);
  lambda_margin_ = b.margin;
  sup_norm_ = b.sup;
}

CoefficientField CoefficientField::reflected_copy() const {
  return CoefficientField(sampler_, label_, !reflected_);
}

double ellipticity_margin(const CoefficientField& field, int n_samples) {
  if (n_samples < 16) throw ConfigError("ellipticity_margin needs at least 16 samples");
  return sample_bounds(field, n_samples).margin;
}

bool satisfies_symmetry_S(const CoefficientField& field, double tol, int n_samples) {
  for (int s = 0; s < n_samples; ++s) {
    const double x2 = -0.5 + static_cast<double>(s) / (n_samples - 1);
    const MatrixEntries a = field.at(x2);
    const MatrixEntries b = field.at(-x2);
    const double diff = std::max({std::abs(a.a11 - b.a11), std::abs(a.a12 - b.a12),
                                  std::abs(a.a22 - b.a22)});
    if (diff > tol) return false;
  }
  return true;
}

CoefficientField reflect_axis(const CoefficientField& field) { return field.reflected_copy(); }

MatrixEntries interpolate(const std::vector<CoefficientSample>& samples, double x2) {
  if (samples.empty()) return {};
  if (x2 <= samples.front().x2) {
    const auto& s = samples.front();
    return {s.a11, s.a12, s.a22};
  }
  if (x2 >= samples.back().x2) {
    const auto& s = samples.back();
    return {s.a11, s.a12, s.a22};
  }
  const auto hi = std::upper_bound(samples.begin(), samples.end(), x2,
                                   [](double x, const CoefficientSample& s) { return x < s.x2; });
  const auto lo = hi - 1;
  const double t = (x2 - lo->x2) / (hi->x2 - lo->x2);
  return {lo->a11 + t * (hi->a11 - lo->a11), lo->a12 + t * (hi->a12 - lo->a12),
          lo->a22 + t * (hi->a22 - lo->a22)};
}

namespace {

void check_table(const std::vector<CoefficientSample>& rows) {
  if (rows.size() < 2) throw ConfigError("coefficient table needs at least two rows");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].x2 > rows[i - 1].x2)) {
      throw ConfigError("coefficient table rows must be strictly increasing in x2");
    }
  }
  constexpr double kSlack = 1e-12;
  if (rows.front().x2 > -0.5 + kSlack || rows.back().x2 < 0.5 - kSlack) {
    throw ConfigError("coefficient table must cover [-1/2, 1/2]");
  }
}

// Nodal W' from averaged neighbouring cell slopes, for a continuous a12.
std::vector<CoefficientSample> grad_aligned_table(const CrossSectionResult& cross, double c) {
  const int n = cross.nx2;
  const double h = cross.h();
  std::vector<CoefficientSample> rows(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) {
    double slope = 0.0;
    if (j == 0) {
      slope = (cross.W[1] - cross.W[0]) / h;
    } else if (j == n) {
      slope = (cross.W[n] - cross.W[n - 1]) / h;
    } else {
      slope = 0.5 * (cross.W[j + 1] - cross.W[j - 1]) / h;
    }
    rows[j] = {-0.5 + j * h, 1.0, c * slope, 1.0};
  }
  return rows;
}

}  // namespace

CoefficientField make_coefficients(const CoefficientFamily& family, const CrossSectionResult* cross) {
  const std::string label = family.label();
  const double c = family.c;
  CoefficientField::Sampler sampler;
  switch (family.kind) {
    case FamilyKind::Identity:
      sampler = [](double) { return MatrixEntries{1.0, 0.0, 1.0}; };
      break;
    case FamilyKind::ConstantOffDiag:
      sampler = [c](double) { return MatrixEntries{1.0, c, 1.0}; };
      break;
    case FamilyKind::LinearOffDiag:
      sampler = [c](double x2) { return MatrixEntries{1.0, c * x2, 1.0}; };
      break;
    case FamilyKind::GradAligned: {
      if (cross == nullptr) {
        throw ConfigError("GradAligned family requires a cross-section ground state");
      }
      auto rows = grad_aligned_table(*cross, c);
      sampler = [rows = std::move(rows)](double x2) { return interpolate(rows, x2); };
      break;
    }
    case FamilyKind::Tabulated: {
      check_table(family.samples);
      auto rows = family.samples;
      sampler = [rows = std::move(rows)](double x2) { return interpolate(rows, x2); };
      break;
    }
  }
  CoefficientField field(std::move(sampler), label);
  if (!(field.lambda_margin() > 0.0)) {
    std::ostringstream os;
    os << label << " is not uniformly elliptic: sampled margin " << field.lambda_margin();
    throw ConfigError(os.str());
  }
  return field;
}

std::vector<CoefficientSample> load_coefficient_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open coefficient table " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("coefficient table " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x2,a11,a12,a22") {
    throw ConfigError("coefficient table header must be x2,a11,a12,a22, got '" + line + "'");
  }
  std::vector<CoefficientSample> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(ls, cell, ',')) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 4 columns");
      }
      try {
        std::size_t used = 0;
        v[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (std::getline(ls, cell, ',')) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": too many columns");
    }
    rows.push_back({v[0], v[1], v[2], v[3]});
  }
  check_table(rows);
  return rows;
}

}  // namespace cylspectra
