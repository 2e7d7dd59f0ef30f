#pragma once

// Ground truth: closed-form solutions of the two toy problems and a
// method-of-lines finite-difference solver for 2D transport.

#include <cmath>
#include <vector>

#include "dfo/problems.hpp"

namespace dfo::reference {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

template <class T>
struct WaveSolution {
  T u;
  T u_t;
};

/// Two Gaussians starting at -2 and 2 and travelling toward each other at
/// speed c; the second has variance 1 + rho. Written generically so dual
/// numbers can be passed in tests.
template <class T>
WaveSolution<T> wave_exact(const T& t, const T& x, double rho = 0.0, double c = 1.0) {
  using std::exp;
  const T z1 = x - (-2.0 + c * t);
  const T z2 = x - (2.0 - c * t);
  const double s2 = 1.0 + rho;
  const T g1 = exp(-0.5 * z1 * z1);
  const T g2 = exp(-0.5 * z2 * z2 / s2);
  return {g1 + g2, c * z1 * g1 - c * (z2 / s2) * g2};
}

template <class T>
T advreact_exact(const T& t, const T& x) {
  using std::cos;
  using std::sin;
  return sin(t) * (sin(x) + cos(x));
}

/// Tensor-product grid of n_k cells on [lower_k, upper_k) per dimension.
/// Flattened point index runs fastest along the first dimension.
struct UniformGrid {
  std::vector<Index> sizes;
  std::vector<double> lower;
  std::vector<double> upper;

  static UniformGrid periodic_1d(Index n, double lower, double upper);
  static UniformGrid periodic_2d(Index nx, Index ny, double lower = -1.0, double upper = 1.0);

  Index dim() const { return static_cast<Index>(sizes.size()); }
  Index point_count() const;
  double spacing(Index k) const { return (upper[k] - lower[k]) / static_cast<double>(sizes[k]); }
  double coordinate(Index k, Index i) const { return lower[k] + static_cast<double>(i) * spacing(k); }
  models::Points points() const;

  bool operator==(const UniformGrid&) const = default;
};

struct ReferenceField {
  UniformGrid grid;
  double time = 0.0;
  Matrix values;  ///< point_count x components
};

struct FdConfig {
  Index nx = 128;
  Index ny = 128;
  double dt = 1e-3;
  /// RK4 with the fourth-order central stencil is stable up to a Courant
  /// number of about 2.06; the default check leaves a factor of two.
  double max_cfl = 1.0;
};

/// Gaussian bump exp(-((x - cx)^2 + (y - cy)^2) / (pi sigma)).
struct GaussianBump {
  double sigma = 8e-3;
  double center_x = -0.2;
  double center_y = 0.0;

  double operator()(double x, double y) const;
  ReferenceField sample(const UniformGrid& grid) const;

  bool operator==(const GaussianBump&) const = default;
};

/// Method of lines for du/dt = -c_x(x) u_x - c_y(y) u_y on a periodic 2D
/// grid: fourth-order central differences in space, classical RK4 in time.
class FdTransport {
 public:
  /// Throws ConfigError when the Courant number exceeds cfg.max_cfl.
  FdTransport(const FdConfig& cfg, const models::SeparableFlow& flow, double lower = -1.0, double upper = 1.0);

  void set_state(const ReferenceField& field);
  /// Advances with steps of cfg.dt, shortening the last one to land on t.
  void advance_to(double t);
  void step(double h);

  double time() const { return time_; }
  double courant_number() const;
  ReferenceField snapshot() const;
  /// nx x ny, entry (i, j) at (x_i, y_j).
  const Matrix& state() const { return u_; }

 private:
  Matrix rhs(const Matrix& u) const;

  FdConfig cfg_;
  UniformGrid grid_;
  Vector cx_;
  Vector cy_;
  Matrix u_;
  double time_ = 0.0;
};

/// Integrates from ic to each requested time (sorted ascending) and returns
/// the snapshots.
std::vector<ReferenceField> fd_transport_reference(const ReferenceField& ic, const FdConfig& cfg,
                                                   const models::SeparableFlow& flow,
                                                   const std::vector<double>& times);

/// Samples ic on a cfg.nx x cfg.ny grid over [-1, 1)^2 and integrates to T.
ReferenceField fd_transport_solution(const GaussianBump& ic, const FdConfig& cfg, const models::SeparableFlow& flow,
                                     double T);

}  // namespace dfo::reference
