#pragma once

#include <iosfwd>
#include <string>

#include "hsim/grid.hpp"

namespace hsim {

/// Scalar or vector field sampled on the unit torus [0,1)^N.
/// values() is size() x components(); column k is component k.
class TorusField {
 public:
  TorusField() = default;
  TorusField(const Grid& grid, int components);
  TorusField(const Grid& grid, MatrixXd values);

  /// Samples fn(z) -> VectorXd (length `components`) at every node.
  template <class Fn>
  static TorusField sample(const Grid& grid, int components, Fn&& fn) {
    TorusField out(grid, components);
    for (Index i = 0; i < grid.size(); ++i) out.values_.row(i) = fn(grid.point(i)).transpose();
    return out;
  }
  static TorusField constant(const Grid& grid, const VectorXd& value);

  const Grid& grid() const { return grid_; }
  int dims() const { return grid_.dims; }
  int components() const { return static_cast<int>(values_.cols()); }
  Index size() const { return values_.rows(); }

  const MatrixXd& values() const { return values_; }
  MatrixXd& values() { return values_; }
  VectorXd component(int k) const { return values_.col(k); }

  double mean(int k = 0) const { return values_.col(k).mean(); }
  double min(int k = 0) const { return values_.col(k).minCoeff(); }

 private:
  Grid grid_;
  MatrixXd values_;
};

/// Plain-text dump: a header line
///   torus_field dims <N> points <M> components <C>
/// followed by one line per node (row-major, last axis fastest) holding C values.
void write_text(std::ostream& os, const TorusField& field);
TorusField read_text(std::istream& is);

/// CSV with columns z0[,z1,z2],v0[,v1,...].
void write_csv(std::ostream& os, const TorusField& field);

}  // namespace hsim
