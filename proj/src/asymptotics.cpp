#include "hsim/asymptotics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "hsim/error.hpp"

namespace hsim {

Grid RescaledState::z_grid() const {
  Grid z = grid;
  z.length = grid.length * R;
  for (int a = 0; a < grid.dims; ++a) z.origin[a] = grid.origin[a] * R + shift[a];
  return z;
}

RescaledState to_self_similar(const Grid& box, const VectorXd& f, double t, const VectorXd& c) {
  require(t >= 0.0, "time must be nonnegative");
  require(f.size() == box.size(), "field does not match the box grid");
  require(c.size() == box.dims, "drift has the wrong dimension");
  RescaledState s;
  s.t = t;
  s.R = std::sqrt(1.0 + 2.0 * t);
  s.tau = std::log(s.R);
  s.shift = c * t;
  s.grid = box;
  s.grid.length = box.length / s.R;
  for (int a = 0; a < box.dims; ++a) s.grid.origin[a] = (box.origin[a] - s.shift[a]) / s.R;
  s.U = std::pow(s.R, box.dims) * f;
  return s;
}

RescaledState to_self_similar(const Grid& box, const VectorXd& f, double t, const VectorXd& c,
                              const Grid& target) {
  RescaledState s = to_self_similar(box, f, t, c);
  s.U = conservative_remap(s.grid, s.U, target);
  s.grid = target;
  return s;
}

namespace {

bool same_grid(const Grid& a, const Grid& b) {
  if (a.dims != b.dims || a.points != b.points) return false;
  const double tol = 1e-9 * b.spacing();
  if (std::abs(a.length - b.length) > tol * b.points) return false;
  for (int d = 0; d < a.dims; ++d)
    if (std::abs(a.origin[d] - b.origin[d]) > tol) return false;
  return true;
}

// Piecewise-constant transfer of one line; returns the absolute mass that falls outside.
double remap_line(const std::vector<double>& src, double src_lo, double h, std::vector<double>& dst,
                  double dst_lo, double H) {
  const int n = static_cast<int>(src.size());
  const int m = static_cast<int>(dst.size());
  std::vector<double> cum(n + 1, 0.0), cum_abs(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    cum[i + 1] = cum[i] + src[i] * h;
    cum_abs[i + 1] = cum_abs[i] + std::abs(src[i]) * h;
  }
  auto at = [&](const std::vector<double>& c, double e) {
    const double pos = (e - src_lo) / h;
    if (pos <= 0.0) return 0.0;
    if (pos >= n) return c[n];
    const int k = static_cast<int>(pos);
    return c[k] + (pos - k) * (c[k + 1] - c[k]);
  };
  double prev = at(cum, dst_lo);
  for (int i = 0; i < m; ++i) {
    const double next = at(cum, dst_lo + (i + 1) * H);
    dst[i] = (next - prev) / H;
    prev = next;
  }
  return cum_abs[n] - (at(cum_abs, dst_lo + m * H) - at(cum_abs, dst_lo));
}

}  // namespace

VectorXd conservative_remap(const Grid& from, const VectorXd& values, const Grid& to) {
  require(from.dims == to.dims, "remap between grids of different dimension");
  require(values.size() == from.size(), "values do not match the source grid");
  if (same_grid(from, to)) return values;
  const int dims = from.dims;
  if (dims > 2) throw Error(ErrorKind::DimensionUnsupported, "conservative remap supports N <= 2");
  const int n = from.points, m = to.points;
  const double h = from.spacing(), H = to.spacing();
  double lost = 0.0;
  VectorXd out(to.size());
  std::vector<double> src(n), dst(m);
  if (dims == 1) {
    for (int i = 0; i < n; ++i) src[i] = values[i];
    lost = remap_line(src, from.origin[0] - 0.5 * h, h, dst, to.origin[0] - 0.5 * H, H);
    for (int i = 0; i < m; ++i) out[i] = dst[i];
  } else {
    // Axis 0 (slow index) first, then axis 1.
    MatrixXd tmp(m, n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) src[i] = values[static_cast<Index>(i) * n + j];
      lost += remap_line(src, from.origin[0] - 0.5 * h, h, dst, to.origin[0] - 0.5 * H, H) * h;
      for (int i = 0; i < m; ++i) tmp(i, j) = dst[i];
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) src[j] = tmp(i, j);
      lost += remap_line(src, from.origin[1] - 0.5 * h, h, dst, to.origin[1] - 0.5 * H, H) * H;
      for (int j = 0; j < m; ++j) out[static_cast<Index>(i) * m + j] = dst[j];
    }
  }
  const double total = l1_norm(from, values);
  if (lost > 1e-10 * std::max(total, 1e-300)) {
    std::ostringstream msg;
    msg << "mass " << lost << " of " << total << " lies outside the target grid";
    throw Error(ErrorKind::OutOfDomain, msg.str());
  }
  return out;
}

VectorXd from_self_similar(const RescaledState& state, const Grid& box) {
  Grid image = state.grid;
  image.length = state.grid.length * state.R;
  for (int a = 0; a < image.dims; ++a) image.origin[a] = state.grid.origin[a] * state.R + state.shift[a];
  const VectorXd f = state.U / std::pow(state.R, image.dims);
  return conservative_remap(image, f, box);
}

MatrixXd sample_periodic(const TorusField& field, const MatrixXd& points) {
  const FourierInterpolant interp(field.grid(), field.values());
  return interp.evaluate(points);
}

MatrixXd sample_periodic(const TorusField& field, const Grid& at) {
  require(at.dims == field.dims(), "sampling grid has the wrong dimension");
  const double per = 1.0 / at.spacing();
  const long m = std::lround(per);
  bool aligned = m >= 1 && std::abs(per - m) <= 1e-9 * per && m <= 4096;
  std::array<long, 3> offset{0, 0, 0};
  for (int a = 0; aligned && a < at.dims; ++a) {
    const double o = at.origin[a] * m;
    offset[a] = std::lround(o);
    aligned = std::abs(o - offset[a]) <= 1e-6;
  }
  if (!aligned) return sample_periodic(field, at.nodes());

  const Grid table_grid = Grid::torus(at.dims, static_cast<int>(m));
  const MatrixXd table =
      table_grid == field.grid() ? field.values() : sample_periodic(field, table_grid.nodes());
  MatrixXd out(at.size(), field.components());
  for (Index i = 0; i < at.size(); ++i) {
    auto idx = at.unflatten(i);
    for (int a = 0; a < at.dims; ++a) idx[a] = static_cast<int>(((idx[a] + offset[a]) % m + m) % m);
    out.row(i) = table.row(table_grid.flatten(idx));
  }
  return out;
}

// ---------------------------------------------------------------------------

UappCells solve_uapp_cells(const Homogenization& hom, const CellOptions& opts) {
  const TorusField& alpha1 = hom.alpha1;
  const Grid& g = alpha1.grid();
  const int n = g.dims;
  const Spectral sp(g);
  const CellOperator op(alpha1);
  const VectorXd& c = hom.coeffs.c;
  UappCells cells;
  cells.dims = n;
  cells.f0 = hom.f0;
  cells.f1 = hom.f1;
  const VectorXd f0 = hom.f0.component(0);

  auto solve = [&](VectorXd rhs) {
    rhs.array() -= rhs.mean();
    CellProblem p{alpha1, TorusField(g, MatrixXd(rhs)), CellKind::direct, Normalization::mean_zero, std::nullopt};
    TorusField phi = solve_cell(p, opts);
    cells.max_residual = std::max(cells.max_residual, rms(op.apply(phi.component(0)) - rhs));
    return phi;
  };
  auto centred = [](VectorXd v) {
    v.array() -= v.mean();
    return v;
  };

  cells.phi_a = solve(f0.array() - 1.0);
  for (int i = 0; i < n; ++i) {
    const VectorXd drift = alpha1.component(i).array() - c[i];
    for (int j = 0; j < n; ++j) {
      const VectorXd f1j = hom.f1.component(j);
      cells.phi_ij.push_back(solve(-centred(drift.cwiseProduct(f1j)) + 2.0 * sp.derivative(f1j, i)));
    }
  }
  if (n == 1 && hom.alpha2) {
    const VectorXd a2 = hom.alpha2->component(0);
    const VectorXd a3 = hom.alpha3 ? hom.alpha3->component(0) : VectorXd::Zero(g.size());
    const VectorXd g1 = hom.g1 ? hom.g1->component(0) : VectorXd::Zero(g.size());
    const VectorXd f1 = hom.f1.component(0);
    const VectorXd drift = alpha1.component(0).array() - c[0];
    cells.g1 = hom.g1 ? *hom.g1 : TorusField(g, 1);
    cells.phi_c = solve(-centred(drift.cwiseProduct(g1)) + 2.0 * sp.derivative(g1, 0) -
                        centred(a2.cwiseProduct(f0).cwiseProduct(f0)));
    cells.phi_d = solve(-2.0 * sp.derivative(a2.cwiseProduct(f0).cwiseProduct(f1), 0));
    cells.phi_e = solve(-2.0 * sp.derivative(a2.cwiseProduct(f0).cwiseProduct(g1), 0) -
                        sp.derivative(a3.cwiseProduct(f0.cwiseAbs2()).cwiseProduct(f0), 0));
  }
  if (n == 2 && hom.alpha2) {
    VectorXd rhs = VectorXd::Zero(g.size());
    for (int d = 0; d < 2; ++d) rhs -= sp.derivative(hom.alpha2->component(d).cwiseProduct(f0.cwiseAbs2()), d);
    cells.phi_nl = solve(rhs);
  }
  return cells;
}

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Jets hold derivatives 0..K column-wise.
MatrixXd jet_product(const MatrixXd& u, const MatrixXd& v) {
  const int order = static_cast<int>(std::min(u.cols(), v.cols())) - 1;
  MatrixXd out = MatrixXd::Zero(u.rows(), order + 1);
  for (int k = 0; k <= order; ++k)
    for (int i = 0; i <= k; ++i) out.col(k).array() += binomial(k, i) * u.col(i).array() * v.col(k - i).array();
  return out;
}

MatrixXd jet_shift(const MatrixXd& u, int by) { return u.rightCols(u.cols() - by); }

MatrixXd first3(const MatrixXd& u) { return u.leftCols(3); }

}  // namespace

ApproxSolution build_uapp(const SelfSimilarProfile& F, const UappCells& cells,
                          const EffectiveCoefficients& coeffs, double tau, double tau_offset) {
  const int n = cells.dims;
  require(F.grid.dims == n && coeffs.dims == n, "profile, cells and coefficients disagree on N");
  ApproxSolution out;
  out.tau = tau;
  out.R = std::exp(tau_offset + tau);
  out.shift = coeffs.c * 0.5 * (out.R * out.R - 1.0);
  out.profile_grid = F.grid;
  auto add = [&](int order, const TorusField& cell, MatrixXd xfun) {
    out.terms.push_back({order, cell, std::move(xfun)});
  };
  const double a = n == 1 ? coeffs.a_or_zero() : 0.0;

  if (n == 1 && F.jets) {
    const MatrixXd& J = *F.jets;
    const MatrixXd J2 = jet_product(J, J);
    const MatrixXd J3 = jet_product(J2, J);
    const double eta = coeffs.eta_sym(0, 0);
    const MatrixXd X1 = (1.0 - eta) * jet_shift(J, 2).leftCols(4) + a * jet_shift(J2, 1).leftCols(4);
    add(0, cells.f0, first3(J));
    add(1, TorusField(cells.f1.grid(), MatrixXd(cells.f1.values())), first3(jet_shift(J, 1)));
    if (cells.g1) add(1, *cells.g1, first3(J2));
    add(2, cells.phi_a, first3(X1));
    add(2, cells.phi_ij[0], first3(jet_shift(J, 2)));
    if (cells.phi_c) add(2, *cells.phi_c, first3(jet_shift(J2, 1)));
    if (cells.phi_d) add(2, *cells.phi_d, 0.5 * first3(jet_shift(J2, 1)));
    if (cells.phi_e) add(2, *cells.phi_e, first3(J3));
    return out;
  }

  const Spectral sp(F.grid);
  const VectorXd& f = F.values;
  std::vector<VectorXd> grad(n);
  for (int i = 0; i < n; ++i) grad[i] = sp.derivative(f, i);
  VectorXd X1 = VectorXd::Zero(f.size());
  add(0, cells.f0, MatrixXd(f));
  for (int j = 0; j < n; ++j) {
    add(1, TorusField(cells.f1.grid(), MatrixXd(cells.f1.values().col(j))), MatrixXd(grad[j]));
    for (int i = 0; i < n; ++i) {
      const VectorXd dij = sp.derivative(grad[j], i);
      add(2, cells.phi_ij[i * n + j], MatrixXd(dij));
      X1 -= coeffs.eta_sym(i, j) * dij;
      if (i == j) X1 += dij;
    }
  }
  const VectorXd f2 = f.cwiseAbs2();
  if (n == 1) {
    const VectorXd df2 = sp.derivative(f2, 0);
    X1 += a * df2;
    if (cells.g1) add(1, *cells.g1, MatrixXd(f2));
    if (cells.phi_c) add(2, *cells.phi_c, MatrixXd(df2));
    if (cells.phi_d) add(2, *cells.phi_d, MatrixXd(f.cwiseProduct(grad[0])));
    if (cells.phi_e) add(2, *cells.phi_e, MatrixXd(f2.cwiseProduct(f)));
  }
  if (n == 2 && cells.phi_nl) add(2, *cells.phi_nl, MatrixXd(f2));
  add(2, cells.phi_a, MatrixXd(X1));
  return out;
}

VectorXd ApproxSolution::evaluate(const Grid& xgrid) const { return evaluate(xgrid, 2); }

VectorXd ApproxSolution::evaluate(const Grid& xgrid, int max_order) const {
  Grid zgrid = xgrid;
  zgrid.length = xgrid.length * R;
  for (int a = 0; a < xgrid.dims; ++a) zgrid.origin[a] = xgrid.origin[a] * R + shift[a];
  const MatrixXd xnodes = xgrid.nodes();
  VectorXd out = VectorXd::Zero(xgrid.size());
  for (const ApproxTerm& term : terms) {
    if (term.order > max_order) continue;
    const VectorXd cell = sample_periodic(term.cell, zgrid).col(0);
    const LagrangeInterpolator lx(profile_grid, term.xfun.col(0));
    const VectorXd g = lx.evaluate(xnodes).col(0);
    out += std::pow(R, -term.order) * cell.cwiseProduct(g);
  }
  return out;
}

double uapp_remainder_l1(const ApproxSolution& uapp, const TaylorData& taylor, const VectorXd& c,
                         int points_per_period) {
  require(uapp.profile_grid.dims == 1, "the remainder is evaluated for N = 1 only");
  for (const ApproxTerm& t : uapp.terms)
    require(t.xfun.cols() >= 3, "the remainder needs profile derivatives (stationary N = 1 profile)");
  const double R = uapp.R;
  const double X = uapp.profile_grid.length / 2.0;
  const Index nx = static_cast<Index>(std::ceil(2.0 * X * R * points_per_period));
  const double dx = 2.0 * X / nx;
  VectorXd x(nx), z(nx);
  for (Index k = 0; k < nx; ++k) {
    x[k] = -X + k * dx;
    z[k] = R * x[k] + uapp.shift[0];
  }

  // Cell functions and their first two z-derivatives, then the Taylor coefficients.
  const Grid& cg = taylor.alpha1().grid();
  const Spectral sp(cg);
  const int nt = static_cast<int>(uapp.terms.size());
  const int deg = static_cast<int>(taylor.alpha.size());
  MatrixXd table(cg.size(), 3 * nt + 2 * deg);
  for (int t = 0; t < nt; ++t) {
    require(uapp.terms[t].cell.grid() == cg, "cell data and Taylor data must share a grid");
    const VectorXd phi = uapp.terms[t].cell.component(0);
    table.col(3 * t) = phi;
    table.col(3 * t + 1) = sp.derivative(phi, 0);
    table.col(3 * t + 2) = sp.derivative(table.col(3 * t + 1), 0);
  }
  for (int j = 0; j < deg; ++j) {
    table.col(3 * nt + 2 * j) = taylor.alpha[j].component(0);
    table.col(3 * nt + 2 * j + 1) = sp.derivative(taylor.alpha[j].component(0), 0);
  }
  const MatrixXd zs = FourierInterpolant(cg, table).evaluate(z);

  VectorXd U = VectorXd::Zero(nx), Ux = U, Uxx = U, Ut = U;
  for (int t = 0; t < nt; ++t) {
    const ApproxTerm& term = uapp.terms[t];
    const MatrixXd G = LagrangeInterpolator(uapp.profile_grid, term.xfun.leftCols(3)).evaluate(x);
    const double w = std::pow(R, -term.order);
    const auto phi = zs.col(3 * t).array(), dphi = zs.col(3 * t + 1).array(), d2phi = zs.col(3 * t + 2).array();
    const auto g0 = G.col(0).array(), g1 = G.col(1).array(), g2 = G.col(2).array();
    U.array() += w * phi * g0;
    Ux.array() += w * (R * dphi * g0 + phi * g1);
    Uxx.array() += w * (R * R * d2phi * g0 + 2.0 * R * dphi * g1 + phi * g2);
    Ut.array() += w * (-term.order * phi * g0 + dphi * (R * x.array() + c[0] * R * R) * g0);
  }
  const Eigen::ArrayXd u = U.array() / R;
  Eigen::ArrayXd bz = Eigen::ArrayXd::Zero(nx), bf = Eigen::ArrayXd::Zero(nx);
  for (int j = deg; j >= 1; --j) {
    bz = (bz + zs.col(3 * nt + 2 * (j - 1) + 1).array()) * u;
    bf = bf * u + j * zs.col(3 * nt + 2 * (j - 1)).array();
  }
  const Eigen::ArrayXd res = Ut.array() - U.array() - x.array() * Ux.array() - Uxx.array() + R * R * R * bz +
                             R * bf * Ux.array() - R * c[0] * Ux.array();
  return res.abs().sum() * dx;
}

RemainderFit fit_remainder_decay(const SelfSimilarProfile& F, const UappCells& cells,
                                 const EffectiveCoefficients& coeffs, const TaylorData& taylor,
                                 const std::vector<double>& taus, int points_per_period) {
  require(taus.size() >= 2, "need at least two times for a decay fit");
  RemainderFit fit;
  fit.taus = taus;
  for (double tau : taus)
    fit.l1.push_back(uapp_remainder_l1(build_uapp(F, cells, coeffs, tau), taylor, coeffs.c, points_per_period));
  const Index n = static_cast<Index>(taus.size());
  Eigen::ArrayXd t(n), y(n);
  for (Index i = 0; i < n; ++i) {
    t[i] = taus[i];
    y[i] = std::log(fit.l1[i]);
  }
  const double tm = t.mean(), ym = y.mean();
  fit.slope = ((t - tm) * (y - ym)).sum() / (t - tm).square().sum();
  return fit;
}

// ---------------------------------------------------------------------------

VectorXd compute_V(const RescaledState& state, const TorusField& f0) {
  return state.U.cwiseQuotient(sample_periodic(f0, state.z_grid()).col(0));
}

double diag_l1(const RescaledState& state, const TorusField& f0, const SelfSimilarProfile& fm) {
  const VectorXd w = sample_periodic(f0, state.z_grid()).col(0);
  const VectorXd F = LagrangeInterpolator(fm.grid, fm.values).evaluate(state.grid.nodes()).col(0);
  return l1_norm(state.grid, state.U - w.cwiseProduct(F));
}

double diag_quasi_lyapunov(const RescaledState& state, const VectorXd& uapp) {
  require(uapp.size() == state.U.size(), "approximate solution does not match the state grid");
  return l1_norm(state.grid, state.U - uapp);
}

std::pair<double, double> diag_weighted(const Grid& grid, const VectorXd& V, double m) {
  const int n = grid.dims;
  if (!(m > 2.0 * (n + 1))) {
    std::ostringstream msg;
    msg << "weight exponent m = " << m << " must exceed 2(N+1) = " << 2 * (n + 1);
    throw Error(ErrorKind::WeightTooSmall, msg.str());
  }
  const int pts = grid.points;
  const double h = grid.spacing();
  double l2w = 0.0, grad = 0.0;
  for (Index i = 0; i < grid.size(); ++i) {
    const VectorXd x = grid.point(i);
    l2w += V[i] * V[i] * std::pow(1.0 + x.squaredNorm(), 0.5 * m);
    const auto idx = grid.unflatten(i);
    for (int a = 0; a < n; ++a) {
      auto lo = idx, hi = idx;
      lo[a] = std::max(0, idx[a] - 1);
      hi[a] = std::min(pts - 1, idx[a] + 1);
      const double d = (V[grid.flatten(hi)] - V[grid.flatten(lo)]) / ((hi[a] - lo[a]) * h);
      grad += d * d;
    }
  }
  return {l2w * grid.cell_volume(), grad * grid.cell_volume()};
}

double diag_moment4(const Grid& box, const VectorXd& f, double t, const VectorXd& c) {
  double s = 0.0;
  for (Index i = 0; i < box.size(); ++i) {
    const double r2 = (box.point(i) - c * t).squaredNorm();
    s += std::abs(f[i]) * r2 * r2;
  }
  return s * box.cell_volume() / ((1.0 + 2.0 * t) * (1.0 + 2.0 * t));
}

void DiagnosticsSeries::write_csv(std::ostream& os) const {
  static const char* axes[] = {"com_x", "com_y", "com_z"};
  os << "t,tau,l1_error,H,weighted_l2,grad_l2,moment4,mass";
  for (int a = 0; a < dims; ++a) os << ',' << axes[a];
  os << ",linf\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << sep;
  };
  for (const DiagnosticsRow& r : rows) {
    for (double v : {r.t, r.tau, r.l1_error, r.H, r.weighted_l2, r.grad_l2, r.moment4, r.mass}) put(v, ',');
    for (int a = 0; a < dims; ++a) put(r.com[a], ',');
    put(r.linf, '\n');
  }
}

QuasiLyapunovCheck check_quasi_lyapunov(const std::vector<double>& taus, const std::vector<double>& H,
                                        double slack) {
  require(taus.size() == H.size(), "tau and H series differ in length");
  QuasiLyapunovCheck out;
  const std::size_t n = taus.size();
  const std::size_t half = std::max<std::size_t>(2, n / 2);
  double scale = 0.0;
  for (double h : H) scale = std::max(scale, std::abs(h));
  auto gap = [&](std::size_t i, std::size_t j) { return std::exp(-taus[i]) - std::exp(-taus[j]); };
  for (std::size_t i = 0; i < std::min(half, n); ++i)
    for (std::size_t j = i + 1; j < std::min(half, n); ++j)
      if (gap(i, j) > 0.0) out.C = std::max(out.C, (H[j] - H[i]) / gap(i, j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double excess = H[j] - H[i] - out.C * gap(i, j);
      out.worst_excess = std::max(out.worst_excess, excess);
    }
  out.holds = out.worst_excess <= slack * std::max(scale, 1.0);
  return out;
}

}  // namespace hsim
