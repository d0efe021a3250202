#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

// Closed-form references used by the tests.
namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// Discrete eigenvalue of -u'' with P1 elements, consistent mass and uniform
// spacing h, for the mode with phase theta = (wavenumber) * h.
inline double p1_mode(double h, double theta) {
  return 6.0 / (h * h) * (1.0 - std::cos(theta)) / (2.0 + std::cos(theta));
}

// Lowest Dirichlet eigenvalue of (-1/2, 1/2) on nx2 cells.
inline double cross_p2(int nx2) { return p1_mode(1.0 / nx2, kPi / nx2); }

// Axial mode k on an interval of length L with spacing h (cosine modes with
// natural ends, or the quarter-wave sine/cosine modes mixed ends allow).
inline double axial(double length, double h, double k) { return p1_mode(h, k * kPi * h / length); }

// First eigenvalue of int |u'|^p / int |u|^p on a unit interval.
inline double cross_closed_form(double p) {
  return (p - 1.0) * std::pow(2.0 * kPi / (p * std::sin(kPi / p)), p);
}

// Continuum separated mode on (-l, l) x (-1/2, 1/2).
inline double continuum(double ell, int k) {
  return kPi * kPi + std::pow(k * kPi / (2.0 * ell), 2);
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("cylspectra-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace oracle
