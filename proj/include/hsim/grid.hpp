#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace hsim {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Uniform periodic grid on [origin, origin + length)^dims with `points` nodes
/// per axis. Flat storage is row-major: the last axis varies fastest.
/// The endpoint origin + length is never stored.
struct Grid {
  int dims = 1;
  int points = 64;
  double length = 1.0;
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  /// The unit torus [0,1)^dims.
  static Grid torus(int dims, int points);
  /// [-half_width, half_width)^dims; x = 0 is a node when `points` is even.
  static Grid centered(int dims, int points, double half_width);

  Index size() const;
  double spacing() const { return length / points; }
  double cell_volume() const;
  double coordinate(int axis, int i) const { return origin[axis] + i * spacing(); }
  std::array<int, 3> unflatten(Index flat) const;
  Index flatten(const std::array<int, 3>& idx) const;
  Eigen::VectorXd point(Index flat) const;
  /// size() x dims matrix of node coordinates.
  Eigen::MatrixXd nodes() const;

  bool operator==(const Grid&) const = default;
};

/// Riemann sum times cell volume; equals the trapezoid rule for periodic or
/// boundary-decaying data.
inline double integrate(const Grid& grid, const VectorXd& values) {
  return values.sum() * grid.cell_volume();
}

inline double l1_norm(const Grid& grid, const VectorXd& values) {
  return values.cwiseAbs().sum() * grid.cell_volume();
}

/// Root-mean-square norm: the discrete L2 norm of a field on the unit torus.
inline double rms(const VectorXd& values) {
  return values.size() == 0 ? 0.0 : std::sqrt(values.squaredNorm() / values.size());
}

/// Fourier pseudo-spectral operators on a periodic grid.
///
/// Coefficients are normalised so that c_0 is the grid mean. Derivatives zero
/// the Nyquist mode so that the discrete derivative is skew-adjoint; products
/// are dealiased with the 3/2 rule and drop the Nyquist mode, which keeps the
/// multiplication operator self-adjoint.
///
/// Holds an FFT engine with mutable plan caches: one instance per thread.
class Spectral {
 public:
  explicit Spectral(const Grid& grid);

  const Grid& grid() const { return grid_; }
  int wavenumber(int i) const { return i < grid_.points / 2 ? i : i - grid_.points; }
  double wave_scale() const { return 2.0 * M_PI / grid_.length; }

  VectorXcd forward(const VectorXd& f) const;
  VectorXd inverse(const VectorXcd& c) const;

  VectorXd derivative(const VectorXd& f, int axis) const;
  VectorXd laplacian(const VectorXd& f) const;
  /// phi with -lap(phi) = r - mean(r) and mean(phi) = 0.
  VectorXd solve_poisson(const VectorXd& r) const;
  /// exp(t * lap) f.
  VectorXd heat(const VectorXd& f, double t) const;

  VectorXd product(const VectorXd& a, const VectorXd& b) const;
  /// Mean of the dealiased product; exact integral of the two interpolants.
  double inner(const VectorXd& a, const VectorXd& b) const;

  // Coefficient-space building blocks used by the cell operators.
  VectorXcd derivative_coeffs(const VectorXcd& c, int axis) const;
  VectorXcd negative_laplacian_coeffs(const VectorXcd& c) const;
  /// Physical values on the padded (3/2) grid of the interpolant of c.
  VectorXd pad(const VectorXcd& c) const;
  /// Coefficients on this grid of a field sampled on the padded grid.
  VectorXcd truncate(const VectorXd& padded) const;
  int padded_points() const { return padded_; }

  /// Resample by spectral zero-padding or truncation to `points` per axis.
  VectorXd resample(const VectorXd& f, int points) const;

 private:
  void transform(std::vector<std::complex<double>>& data, int points, bool inverse) const;
  Index padded_index(Index flat) const;

  Grid grid_;
  int padded_ = 0;
  std::vector<Index> pad_map_;  // flat index on padded grid, -1 for dropped Nyquist modes
  mutable Eigen::FFT<double> fft_;
};

/// Exact trigonometric interpolation of one or more fields sampled on a
/// periodic grid. Evaluation costs O(points^dims) per query point.
class FourierInterpolant {
 public:
  FourierInterpolant(const Grid& grid, const MatrixXd& values);

  int fields() const { return static_cast<int>(coeffs_.cols()); }
  /// Rows of `queries` are points (dims columns); returns queries.rows() x fields().
  MatrixXd evaluate(const MatrixXd& queries) const;
  /// Convenience for dims == 1.
  MatrixXd evaluate(const VectorXd& z) const;

 private:
  Grid grid_;
  Eigen::MatrixXcd coeffs_;  // size x fields, symmetric Nyquist treatment applied
};

/// Local Lagrange interpolation (tensor product, `order` nodes per axis) on a
/// non-periodic uniform grid. Queries outside the grid evaluate to zero.
class LagrangeInterpolator {
 public:
  LagrangeInterpolator(const Grid& grid, const MatrixXd& values, int order = 6);

  MatrixXd evaluate(const MatrixXd& queries) const;
  MatrixXd evaluate(const VectorXd& x) const;

 private:
  Grid grid_;
  MatrixXd values_;
  int order_;
};

}  // namespace hsim
