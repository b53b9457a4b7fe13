#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pdhams {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Lattice point as indices into LatticeSpec::values.
using IndexPoint = std::vector<std::uint16_t>;

/// Homogeneous lattice {a_1 < ... < a_K}^d.
class LatticeSpec {
 public:
  LatticeSpec(std::size_t dim, std::vector<double> values);

  /// {lo, lo+1, ..., hi}^dim
  static LatticeSpec integer_range(std::size_t dim, int lo, int hi);

  std::size_t dim() const { return dim_; }
  std::size_t K() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t k) const { return values_[k]; }

  /// Throws InvalidStateError when v is not a lattice level.
  std::size_t index_of(double v) const;
  bool contains(double v) const;
  bool contains(const Vec& s) const;

  IndexPoint indices(const Vec& s) const;
  Vec point(std::span<const std::uint16_t> idx) const;

 private:
  std::size_t dim_;
  std::vector<double> values_;
};

class Philox;

/// Uniformly random lattice point, one draw per coordinate ascending.
Vec random_lattice_point(const LatticeSpec& lattice, Philox& rng);

}  // namespace pdhams
