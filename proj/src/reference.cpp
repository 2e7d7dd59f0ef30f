#include "dfo/reference.hpp"

#include <numbers>

#include "dfo/errors.hpp"

namespace dfo::reference {

UniformGrid UniformGrid::periodic_1d(Index n, double lower, double upper) {
  if (n < 1 || !(upper > lower)) throw InputError("invalid 1D grid");
  return {{n}, {lower}, {upper}};
}

UniformGrid UniformGrid::periodic_2d(Index nx, Index ny, double lower, double upper) {
  if (nx < 1 || ny < 1 || !(upper > lower)) throw InputError("invalid 2D grid");
  return {{nx, ny}, {lower, lower}, {upper, upper}};
}

Index UniformGrid::point_count() const {
  Index count = 1;
  for (Index n : sizes) count *= n;
  return count;
}

models::Points UniformGrid::points() const {
  const Index d = dim();
  models::Points out(point_count(), d);
  for (Index row = 0; row < out.rows(); ++row) {
    Index rest = row;
    for (Index k = 0; k < d; ++k) {
      out(row, k) = coordinate(k, rest % sizes[k]);
      rest /= sizes[k];
    }
  }
  return out;
}

double GaussianBump::operator()(double x, double y) const {
  const double dx = x - center_x;
  const double dy = y - center_y;
  return std::exp(-(dx * dx + dy * dy) / (std::numbers::pi * sigma));
}

ReferenceField GaussianBump::sample(const UniformGrid& grid) const {
  if (grid.dim() != 2) throw InputError("the Gaussian bump lives on a 2D grid");
  const auto points = grid.points();
  ReferenceField field{grid, 0.0, Matrix(points.rows(), 1)};
  for (Index i = 0; i < points.rows(); ++i) field.values(i, 0) = (*this)(points(i, 0), points(i, 1));
  return field;
}

FdTransport::FdTransport(const FdConfig& cfg, const models::SeparableFlow& flow, double lower, double upper)
    : cfg_(cfg) {
  if (cfg.nx < 5 || cfg.ny < 5) throw ConfigError("the five-point stencil needs at least 5 cells per dimension");
  if (!(cfg.dt > 0.0)) throw ConfigError("reference dt must be positive");
  grid_ = UniformGrid::periodic_2d(cfg.nx, cfg.ny, lower, upper);
  cx_.resize(cfg.nx);
  cy_.resize(cfg.ny);
  for (Index i = 0; i < cfg.nx; ++i) cx_(i) = flow.cx(grid_.coordinate(0, i));
  for (Index j = 0; j < cfg.ny; ++j) cy_(j) = flow.cy(grid_.coordinate(1, j));
  if (courant_number() > cfg.max_cfl) {
    throw ConfigError("reference time step violates the stability limit: Courant number " +
                      std::to_string(courant_number()) + " > " + std::to_string(cfg.max_cfl));
  }
  u_ = Matrix::Zero(cfg.nx, cfg.ny);
}

double FdTransport::courant_number() const {
  return cfg_.dt * (cx_.cwiseAbs().maxCoeff() / grid_.spacing(0) + cy_.cwiseAbs().maxCoeff() / grid_.spacing(1));
}

void FdTransport::set_state(const ReferenceField& field) {
  if (!(field.grid == grid_) || field.values.cols() != 1) throw InputError("initial field does not match the FD grid");
  u_ = field.values.reshaped(cfg_.nx, cfg_.ny);
  time_ = field.time;
}

Matrix FdTransport::rhs(const Matrix& u) const {
  const Index nx = cfg_.nx;
  const Index ny = cfg_.ny;

  // Pad two wrap-around layers on each side so the stencil is a sum of
  // shifted blocks.
  Matrix rows(nx + 4, ny);
  rows.middleRows(2, nx) = u;
  rows.topRows(2) = u.bottomRows(2);
  rows.bottomRows(2) = u.topRows(2);
  Matrix cols(nx, ny + 4);
  cols.middleCols(2, ny) = u;
  cols.leftCols(2) = u.rightCols(2);
  cols.rightCols(2) = u.leftCols(2);

  const double wx = 1.0 / (12.0 * grid_.spacing(0));
  const double wy = 1.0 / (12.0 * grid_.spacing(1));
  const Matrix ux = wx * (rows.middleRows(0, nx) - 8.0 * rows.middleRows(1, nx) + 8.0 * rows.middleRows(3, nx) -
                          rows.middleRows(4, nx));
  const Matrix uy = wy * (cols.middleCols(0, ny) - 8.0 * cols.middleCols(1, ny) + 8.0 * cols.middleCols(3, ny) -
                          cols.middleCols(4, ny));
  return -(cx_.asDiagonal() * ux) - uy * cy_.asDiagonal();
}

void FdTransport::step(double h) {
  const Matrix k1 = rhs(u_);
  const Matrix k2 = rhs(u_ + 0.5 * h * k1);
  const Matrix k3 = rhs(u_ + 0.5 * h * k2);
  const Matrix k4 = rhs(u_ + h * k3);
  u_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  time_ += h;
}

void FdTransport::advance_to(double t) {
  if (t < time_) throw InputError("cannot integrate the reference backwards in time");
  const double slack = 1e-9 * cfg_.dt;
  while (t - time_ > slack) {
    const double h = std::min(cfg_.dt, t - time_);
    step(h);
  }
  time_ = t;
}

ReferenceField FdTransport::snapshot() const {
  return {grid_, time_, u_.reshaped(u_.size(), 1)};
}

std::vector<ReferenceField> fd_transport_reference(const ReferenceField& ic, const FdConfig& cfg,
                                                   const models::SeparableFlow& flow,
                                                   const std::vector<double>& times) {
  FdTransport solver(cfg, flow, ic.grid.lower.empty() ? -1.0 : ic.grid.lower[0],
                     ic.grid.upper.empty() ? 1.0 : ic.grid.upper[0]);
  solver.set_state(ic);
  std::vector<ReferenceField> out;
  out.reserve(times.size());
  for (double t : times) {
    solver.advance_to(t);
    out.push_back(solver.snapshot());
  }
  return out;
}

ReferenceField fd_transport_solution(const GaussianBump& ic, const FdConfig& cfg, const models::SeparableFlow& flow,
                                     double T) {
  const auto grid = UniformGrid::periodic_2d(cfg.nx, cfg.ny);
  return fd_transport_reference(ic.sample(grid), cfg, flow, {T}).front();
}

}  // namespace dfo::reference
