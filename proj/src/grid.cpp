#include "hsim/grid.hpp"

#include <algorithm>
#include <cmath>

#include "hsim/error.hpp"

namespace hsim {

namespace {

Index ipow(int base, int exp) {
  Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

Grid Grid::torus(int dims, int points) {
  Grid g;
  g.dims = dims;
  g.points = points;
  g.length = 1.0;
  require(dims >= 1 && dims <= 3, "grid dimension must be 1, 2 or 3");
  require(points >= 2 && points % 2 == 0, "grid points per axis must be even");
  return g;
}

Grid Grid::centered(int dims, int points, double half_width) {
  Grid g = torus(dims, points);
  require(half_width > 0.0, "half width must be positive");
  g.length = 2.0 * half_width;
  g.origin = {-half_width, -half_width, -half_width};
  return g;
}

Index Grid::size() const { return ipow(points, dims); }

double Grid::cell_volume() const { return std::pow(spacing(), dims); }

std::array<int, 3> Grid::unflatten(Index flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dims - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % points);
    flat /= points;
  }
  return idx;
}

Index Grid::flatten(const std::array<int, 3>& idx) const {
  Index flat = 0;
  for (int a = 0; a < dims; ++a) flat = flat * points + idx[a];
  return flat;
}

VectorXd Grid::point(Index flat) const {
  const auto idx = unflatten(flat);
  VectorXd p(dims);
  for (int a = 0; a < dims; ++a) p[a] = coordinate(a, idx[a]);
  return p;
}

MatrixXd Grid::nodes() const {
  MatrixXd out(size(), dims);
  for (Index i = 0; i < size(); ++i) out.row(i) = point(i).transpose();
  return out;
}

// ---------------------------------------------------------------------------

Spectral::Spectral(const Grid& grid) : grid_(grid) {
  fft_.SetFlag(Eigen::FFT<double>::Unscaled);
  padded_ = 3 * grid_.points / 2;
  pad_map_.resize(grid_.size());
  const Index n = grid_.size();
  for (Index flat = 0; flat < n; ++flat) {
    const auto idx = grid_.unflatten(flat);
    Index p = 0;
    bool drop = false;
    for (int a = 0; a < grid_.dims; ++a) {
      const int k = wavenumber(idx[a]);
      if (k == -grid_.points / 2) drop = true;
      p = p * padded_ + (k >= 0 ? k : padded_ + k);
    }
    pad_map_[flat] = drop ? -1 : p;
  }
}

void Spectral::transform(std::vector<std::complex<double>>& data, int points, bool inverse) const {
  const int dims = grid_.dims;
  const Index total = ipow(points, dims);
  std::vector<std::complex<double>> line(points), out(points);
  for (int axis = 0; axis < dims; ++axis) {
    const Index stride = ipow(points, dims - 1 - axis);
    const Index lines = total / points;
    for (Index l = 0; l < lines; ++l) {
      // Decompose l into (outer, inner) around the transformed axis.
      const Index inner = l % stride;
      const Index outer = l / stride;
      const Index base = outer * stride * points + inner;
      for (int i = 0; i < points; ++i) line[i] = data[base + i * stride];
      if (inverse)
        fft_.inv(out, line);
      else
        fft_.fwd(out, line);
      for (int i = 0; i < points; ++i) data[base + i * stride] = out[i];
    }
  }
}

VectorXcd Spectral::forward(const VectorXd& f) const {
  const Index n = grid_.size();
  require(f.size() == n, "field size does not match grid");
  std::vector<std::complex<double>> data(n);
  for (Index i = 0; i < n; ++i) data[i] = f[i];
  transform(data, grid_.points, false);
  VectorXcd c(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) c[i] = data[i] * scale;
  return c;
}

VectorXd Spectral::inverse(const VectorXcd& c) const {
  const Index n = grid_.size();
  std::vector<std::complex<double>> data(c.data(), c.data() + n);
  transform(data, grid_.points, true);
  VectorXd f(n);
  for (Index i = 0; i < n; ++i) f[i] = data[i].real();
  return f;
}

VectorXcd Spectral::derivative_coeffs(const VectorXcd& c, int axis) const {
  VectorXcd d(c.size());
  const double s = wave_scale();
  for (Index flat = 0; flat < c.size(); ++flat) {
    const int k = wavenumber(grid_.unflatten(flat)[axis]);
    d[flat] = (k == -grid_.points / 2) ? std::complex<double>(0.0)
                                       : std::complex<double>(0.0, s * k) * c[flat];
  }
  return d;
}

VectorXcd Spectral::negative_laplacian_coeffs(const VectorXcd& c) const {
  VectorXcd d(c.size());
  const double s2 = wave_scale() * wave_scale();
  for (Index flat = 0; flat < c.size(); ++flat) {
    const auto idx = grid_.unflatten(flat);
    double k2 = 0.0;
    for (int a = 0; a < grid_.dims; ++a) {
      const double k = wavenumber(idx[a]);
      k2 += k * k;
    }
    d[flat] = s2 * k2 * c[flat];
  }
  return d;
}

VectorXd Spectral::derivative(const VectorXd& f, int axis) const {
  return inverse(derivative_coeffs(forward(f), axis));
}

VectorXd Spectral::laplacian(const VectorXd& f) const {
  return -inverse(negative_laplacian_coeffs(forward(f)));
}

VectorXd Spectral::solve_poisson(const VectorXd& r) const {
  VectorXcd c = forward(r);
  const double s2 = wave_scale() * wave_scale();
  for (Index flat = 0; flat < c.size(); ++flat) {
    const auto idx = grid_.unflatten(flat);
    double k2 = 0.0;
    for (int a = 0; a < grid_.dims; ++a) {
      const double k = wavenumber(idx[a]);
      k2 += k * k;
    }
    c[flat] = k2 == 0.0 ? std::complex<double>(0.0) : c[flat] / (s2 * k2);
  }
  return inverse(c);
}

VectorXd Spectral::heat(const VectorXd& f, double t) const {
  VectorXcd c = forward(f);
  const double s2 = wave_scale() * wave_scale();
  for (Index flat = 0; flat < c.size(); ++flat) {
    const auto idx = grid_.unflatten(flat);
    double k2 = 0.0;
    for (int a = 0; a < grid_.dims; ++a) {
      const double k = wavenumber(idx[a]);
      k2 += k * k;
    }
    c[flat] *= std::exp(-t * s2 * k2);
  }
  return inverse(c);
}

VectorXd Spectral::pad(const VectorXcd& c) const {
  const Index np = ipow(padded_, grid_.dims);
  std::vector<std::complex<double>> data(np, 0.0);
  for (Index flat = 0; flat < c.size(); ++flat)
    if (pad_map_[flat] >= 0) data[pad_map_[flat]] = c[flat];
  transform(data, padded_, true);
  VectorXd out(np);
  for (Index i = 0; i < np; ++i) out[i] = data[i].real();
  return out;
}

VectorXcd Spectral::truncate(const VectorXd& padded) const {
  const Index np = padded.size();
  std::vector<std::complex<double>> data(np);
  for (Index i = 0; i < np; ++i) data[i] = padded[i];
  transform(data, padded_, false);
  VectorXcd c(grid_.size());
  const double scale = 1.0 / static_cast<double>(np);
  for (Index flat = 0; flat < c.size(); ++flat)
    c[flat] = pad_map_[flat] >= 0 ? data[pad_map_[flat]] * scale : std::complex<double>(0.0);
  return c;
}

VectorXd Spectral::product(const VectorXd& a, const VectorXd& b) const {
  const VectorXd pa = pad(forward(a));
  const VectorXd pb = pad(forward(b));
  return inverse(truncate(pa.cwiseProduct(pb)));
}

double Spectral::inner(const VectorXd& a, const VectorXd& b) const {
  const VectorXcd ca = forward(a);
  const VectorXcd cb = forward(b);
  double s = 0.0;
  for (Index flat = 0; flat < ca.size(); ++flat)
    if (pad_map_[flat] >= 0) s += (ca[flat] * std::conj(cb[flat])).real();
  return s;
}

VectorXd Spectral::resample(const VectorXd& f, int points) const {
  const VectorXcd c = forward(f);
  Grid target = grid_;
  target.points = points;
  Spectral out(target);
  VectorXcd d = VectorXcd::Zero(target.size());
  const int half = std::min(points, grid_.points) / 2;
  for (Index flat = 0; flat < c.size(); ++flat) {
    const auto idx = grid_.unflatten(flat);
    std::array<int, 3> tidx{0, 0, 0};
    bool keep = true;
    for (int a = 0; a < grid_.dims; ++a) {
      const int k = wavenumber(idx[a]);
      if (k >= half || k <= -half) keep = false;
      tidx[a] = k >= 0 ? k : points + k;
    }
    if (keep) d[target.flatten(tidx)] = c[flat];
  }
  return out.inverse(d);
}

// ---------------------------------------------------------------------------

FourierInterpolant::FourierInterpolant(const Grid& grid, const MatrixXd& values) : grid_(grid) {
  Spectral sp(grid);
  coeffs_.resize(grid.size(), values.cols());
  for (Index j = 0; j < values.cols(); ++j) coeffs_.col(j) = sp.forward(values.col(j));
}

MatrixXd FourierInterpolant::evaluate(const MatrixXd& queries) const {
  const int dims = grid_.dims;
  const int m = grid_.points;
  require(queries.cols() == dims, "query dimension mismatch");
  const Index nq = queries.rows();
  MatrixXd out(nq, fields());
  // Per-axis tables of exp(i k theta) for k in [-m/2, m/2), stored by grid index.
  std::vector<std::vector<std::complex<double>>> table(dims, std::vector<std::complex<double>>(m));
  Eigen::RowVectorXcd acc(fields());
  for (Index q = 0; q < nq; ++q) {
    for (int a = 0; a < dims; ++a) {
      const double theta = 2.0 * M_PI * (queries(q, a) - grid_.origin[a]) / grid_.length;
      const std::complex<double> w(std::cos(theta), std::sin(theta));
      std::complex<double> pos(1.0, 0.0);
      for (int k = 0; k <= m / 2; ++k) {
        if (k < m / 2) {
          table[a][k] = pos;
          if (k > 0) table[a][m - k] = std::conj(pos);
        } else {
          // Nyquist: symmetric split gives cos(m/2 theta).
          table[a][m / 2] = std::complex<double>(pos.real(), 0.0);
        }
        pos *= w;
      }
    }
    acc.setZero();
    const Index n = grid_.size();
    if (dims == 1) {
      for (Index flat = 0; flat < n; ++flat) acc += table[0][flat] * coeffs_.row(flat);
    } else {
      for (Index flat = 0; flat < n; ++flat) {
        const auto idx = grid_.unflatten(flat);
        std::complex<double> w = table[0][idx[0]];
        for (int a = 1; a < dims; ++a) w *= table[a][idx[a]];
        acc += w * coeffs_.row(flat);
      }
    }
    out.row(q) = acc.real();
  }
  return out;
}

MatrixXd FourierInterpolant::evaluate(const VectorXd& z) const {
  return evaluate(MatrixXd(z));
}

// ---------------------------------------------------------------------------

LagrangeInterpolator::LagrangeInterpolator(const Grid& grid, const MatrixXd& values, int order)
    : grid_(grid), values_(values), order_(order) {
  require(values.rows() == grid.size(), "interpolator values do not match grid");
  require(order >= 2 && order <= grid.points, "invalid interpolation order");
}

MatrixXd LagrangeInterpolator::evaluate(const MatrixXd& queries) const {
  const int dims = grid_.dims;
  const double h = grid_.spacing();
  const int m = grid_.points;
  MatrixXd out = MatrixXd::Zero(queries.rows(), values_.cols());
  std::vector<std::array<double, 16>> weights(dims);
  std::vector<int> start(dims);
  for (Index q = 0; q < queries.rows(); ++q) {
    bool inside = true;
    for (int a = 0; a < dims; ++a) {
      const double s = (queries(q, a) - grid_.origin[a]) / h;
      if (s < 0.0 || s > m - 1) {
        inside = false;
        break;
      }
      int s0 = static_cast<int>(std::floor(s)) - (order_ / 2 - 1);
      s0 = std::clamp(s0, 0, m - order_);
      start[a] = s0;
      for (int j = 0; j < order_; ++j) {
        double w = 1.0;
        for (int l = 0; l < order_; ++l)
          if (l != j) w *= (s - (s0 + l)) / static_cast<double>(j - l);
        weights[a][j] = w;
      }
    }
    if (!inside) continue;
    const int corners = static_cast<int>(std::pow(order_, dims));
    for (int c = 0; c < corners; ++c) {
      int rem = c;
      double w = 1.0;
      std::array<int, 3> idx{0, 0, 0};
      for (int a = dims - 1; a >= 0; --a) {
        const int j = rem % order_;
        rem /= order_;
        idx[a] = start[a] + j;
        w *= weights[a][j];
      }
      out.row(q) += w * values_.row(grid_.flatten(idx));
    }
  }
  return out;
}

MatrixXd LagrangeInterpolator::evaluate(const VectorXd& x) const { return evaluate(MatrixXd(x)); }

}  // namespace hsim
