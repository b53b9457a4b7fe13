#include "pdhams/lattice.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "pdhams/error.hpp"
#include "pdhams/rng.hpp"

namespace pdhams {

LatticeSpec::LatticeSpec(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw ConfigError("lattice dimension must be positive");
  if (values_.size() < 2) throw ConfigError("lattice needs at least two levels");
  if (values_.size() > std::numeric_limits<std::uint16_t>::max())
    throw ConfigError("lattice has too many levels");
  for (std::size_t k = 1; k < values_.size(); ++k) {
    if (!(values_[k - 1] < values_[k])) throw ConfigError("lattice levels must be strictly ascending");
  }
}

LatticeSpec LatticeSpec::integer_range(std::size_t dim, int lo, int hi) {
  if (hi <= lo) throw ConfigError("integer lattice needs lo < hi");
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int a = lo; a <= hi; ++a) v.push_back(a);
  return LatticeSpec(dim, std::move(v));
}

std::size_t LatticeSpec::index_of(double v) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), v);
  if (it == values_.end() || *it != v)
    throw InvalidStateError("value " + std::to_string(v) + " is not a lattice level");
  return static_cast<std::size_t>(it - values_.begin());
}

bool LatticeSpec::contains(double v) const {
  return std::binary_search(values_.begin(), values_.end(), v);
}

bool LatticeSpec::contains(const Vec& s) const {
  if (static_cast<std::size_t>(s.size()) != dim_) return false;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (!contains(s[i])) return false;
  return true;
}

IndexPoint LatticeSpec::indices(const Vec& s) const {
  if (static_cast<std::size_t>(s.size()) != dim_) throw InvalidStateError("state has wrong dimension");
  IndexPoint out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<std::uint16_t>(index_of(s[i]));
  return out;
}

Vec LatticeSpec::point(std::span<const std::uint16_t> idx) const {
  Vec s(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) s[static_cast<Eigen::Index>(i)] = values_[idx[i]];
  return s;
}

Vec random_lattice_point(const LatticeSpec& lattice, Philox& rng) {
  Vec s(static_cast<Eigen::Index>(lattice.dim()));
  const double K = static_cast<double>(lattice.K());
  for (auto& x : s) {
    const auto k = std::min(static_cast<std::size_t>(rng.uniform() * K), lattice.K() - 1);
    x = lattice.value(k);
  }
  return s;
}

}  // namespace pdhams
