#include "hsim/torus_field.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

#include "hsim/error.hpp"

namespace hsim {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TorusField::TorusField(const Grid& grid, int components)
    : grid_(grid), values_(MatrixXd::Zero(grid.size(), components)) {}

TorusField::TorusField(const Grid& grid, MatrixXd values) : grid_(grid), values_(std::move(values)) {
  require(values_.rows() == grid_.size(), "torus field values do not match grid size");
}

TorusField TorusField::constant(const Grid& grid, const VectorXd& value) {
  TorusField out(grid, static_cast<int>(value.size()));
  out.values_.rowwise() = value.transpose();
  return out;
}

void write_text(std::ostream& os, const TorusField& field) {
  const Grid& g = field.grid();
  os << "torus_field dims " << g.dims << " points " << g.points << " components "
     << field.components() << '\n';
  for (Index i = 0; i < field.size(); ++i) {
    for (int k = 0; k < field.components(); ++k) {
      if (k) os << ' ';
      os << format_double(field.values()(i, k));
    }
    os << '\n';
  }
}

TorusField read_text(std::istream& is) {
  std::string tag, kd, kp, kc;
  int dims = 0, points = 0, comps = 0;
  if (!(is >> tag >> kd >> dims >> kp >> points >> kc >> comps) || tag != "torus_field" ||
      kd != "dims" || kp != "points" || kc != "components")
    throw Error(ErrorKind::InvalidArgument, "malformed torus_field header");
  const Grid g = Grid::torus(dims, points);
  TorusField out(g, comps);
  for (Index i = 0; i < g.size(); ++i)
    for (int k = 0; k < comps; ++k)
      if (!(is >> out.values()(i, k)))
        throw Error(ErrorKind::InvalidArgument, "truncated torus_field body");
  return out;
}

void write_csv(std::ostream& os, const TorusField& field) {
  const Grid& g = field.grid();
  for (int a = 0; a < g.dims; ++a) os << (a ? ",z" : "z") << a;
  for (int k = 0; k < field.components(); ++k) os << ",v" << k;
  os << '\n';
  for (Index i = 0; i < field.size(); ++i) {
    const VectorXd p = g.point(i);
    for (int a = 0; a < g.dims; ++a) os << (a ? "," : "") << format_double(p[a]);
    for (int k = 0; k < field.components(); ++k) os << ',' << format_double(field.values()(i, k));
    os << '\n';
  }
}

}  // namespace hsim
