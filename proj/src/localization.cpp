#include "lbs/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

namespace lbs::loc {
namespace {

using Eigen::Matrix2d;
using Eigen::MatrixX2d;
using Eigen::VectorXd;

constexpr double kCoincidentAnchors = 1e-6;  // meters
constexpr double kAmbiguityCostRatio = 1.05;
constexpr double kAmbiguityCostFloor = 1e-12;

struct LmResult {
  Vec2 position;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-damped Gauss-Newton on a weighted residual vector. `eval`
/// fills residuals and their Jacobian at a point.
template <typename Eval>
LmResult levenberg(const Eval& eval, const Vec2& start, const SolverOptions& opts) {
  VectorXd r;
  MatrixX2d jac;
  eval(start, r, jac);
  LmResult out{start, r.squaredNorm(), 0, false};
  double lambda = opts.initial_damping;

  VectorXd r_next;
  MatrixX2d jac_next;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    out.iterations = it;
    const Matrix2d normal = jac.transpose() * jac + lambda * Matrix2d::Identity();
    const Vec2 gradient = jac.transpose() * r;
    const Vec2 step = normal.ldlt().solve(-gradient);
    if (!step.allFinite()) break;

    const Vec2 candidate = out.position + step;
    eval(candidate, r_next, jac_next);
    const double next_cost = r_next.squaredNorm();
    if (std::isfinite(next_cost) && next_cost < out.cost) {
      out.position = candidate;
      out.cost = next_cost;
      std::swap(r, r_next);
      std::swap(jac, jac_next);
      lambda = std::max(lambda / 10.0, 1e-12);
    } else {
      lambda *= 10.0;
    }
    if (step.norm() < opts.step_tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Vec2 unit_from(const Vec2& anchor, const Vec2& p, double& distance) {
  const Vec2 d = p - anchor;
  distance = d.norm();
  if (distance < 1e-12) return Vec2::Zero();
  return d / distance;
}

double gdop_of(const MatrixX2d& geometry) {
  const Matrix2d info = geometry.transpose() * geometry;
  if (std::abs(info.determinant()) < 1e-18) return std::numeric_limits<double>::infinity();
  return std::sqrt(info.inverse().trace());
}

struct Box {
  Vec2 lo, hi;
};

template <typename Range>
Box bounding_box(const Range& anchors) {
  Box b{Vec2::Constant(std::numeric_limits<double>::infinity()),
        Vec2::Constant(-std::numeric_limits<double>::infinity())};
  for (const Vec2& a : anchors) {
    b.lo = b.lo.cwiseMin(a);
    b.hi = b.hi.cwiseMax(a);
  }
  return b;
}

std::vector<Vec2> grid_seeds(const Box& box) {
  std::vector<Vec2> seeds;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      seeds.emplace_back(box.lo.x() + (box.hi.x() - box.lo.x()) * i / 2.0,
                         box.lo.y() + (box.hi.y() - box.lo.y()) * j / 2.0);
    }
  }
  return seeds;
}

void range_eval(std::span<const PlanarRange> ms, const Vec2& p, VectorXd& r, MatrixX2d& jac) {
  r.resize(static_cast<Eigen::Index>(ms.size()));
  jac.resize(static_cast<Eigen::Index>(ms.size()), 2);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    double dist = 0.0;
    const Vec2 u = unit_from(ms[i].anchor, p, dist);
    const auto row = static_cast<Eigen::Index>(i);
    r(row) = (dist - ms[i].range) / ms[i].sigma;
    jac.row(row) = u.transpose() / ms[i].sigma;
  }
}

void tdoa_eval(std::span<const PlanarTdoa> ms, const Vec2& p, VectorXd& r, MatrixX2d& jac) {
  r.resize(static_cast<Eigen::Index>(ms.size()));
  jac.resize(static_cast<Eigen::Index>(ms.size()), 2);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    double d_anchor = 0.0, d_ref = 0.0;
    const Vec2 u_anchor = unit_from(ms[i].anchor, p, d_anchor);
    const Vec2 u_ref = unit_from(ms[i].reference, p, d_ref);
    const auto row = static_cast<Eigen::Index>(i);
    r(row) = (d_anchor - d_ref - ms[i].range_difference) / ms[i].sigma;
    jac.row(row) = (u_anchor - u_ref).transpose() / ms[i].sigma;
  }
}

double tolerance_for(const SolverOptions& opts) { return opts.collinearity_tolerance; }

void require_measurement(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidMeasurement, what);
}

}  // namespace

std::string_view to_string(BeaconKind kind) {
  switch (kind) {
    case BeaconKind::GpsPseudo: return "GpsPseudo";
    case BeaconKind::CellTower: return "CellTower";
    case BeaconKind::WifiAp: return "WifiAp";
    case BeaconKind::BluetoothNode: return "BluetoothNode";
  }
  return "GpsPseudo";
}

std::string_view to_string(FixMethod method) {
  switch (method) {
    case FixMethod::Trilateration: return "Trilateration";
    case FixMethod::Tdoa: return "Tdoa";
    case FixMethod::Proximity: return "Proximity";
  }
  return "Proximity";
}

BeaconKind beacon_kind_from_string(std::string_view s) {
  for (auto k : {BeaconKind::GpsPseudo, BeaconKind::CellTower, BeaconKind::WifiAp,
                 BeaconKind::BluetoothNode}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidMeasurement, "unknown beacon kind: " + std::string(s));
}

FixMethod fix_method_from_string(std::string_view s) {
  for (auto m : {FixMethod::Trilateration, FixMethod::Tdoa, FixMethod::Proximity}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::BadRequest, "unknown fix method: " + std::string(s));
}

double accuracy_floor(BeaconKind kind) {
  switch (kind) {
    case BeaconKind::GpsPseudo: return 10.0;
    case BeaconKind::WifiAp: return 30.0;
    case BeaconKind::CellTower: return 500.0;
    case BeaconKind::BluetoothNode: return 1.0;
  }
  return 10.0;
}

void Beacon::validate() const {
  require_measurement(position.valid(), "beacon position invalid");
  require_measurement(std::isfinite(range_radius) && range_radius > 0.0,
                      "beacon range_radius must be positive");
}

double range_cost(std::span<const PlanarRange> ms, const Vec2& p) {
  double cost = 0.0;
  for (const auto& m : ms) {
    const double res = ((p - m.anchor).norm() - m.range) / m.sigma;
    cost += res * res;
  }
  return cost;
}

double tdoa_cost(std::span<const PlanarTdoa> ms, const Vec2& p) {
  double cost = 0.0;
  for (const auto& m : ms) {
    const double res =
        ((p - m.anchor).norm() - (p - m.reference).norm() - m.range_difference) / m.sigma;
    cost += res * res;
  }
  return cost;
}

void check_geometry(std::span<const Vec2> anchors, double tolerance) {
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      if ((anchors[i] - anchors[j]).norm() < kCoincidentAnchors) {
        throw Error(ErrorCode::DegenerateGeometry, "beacon positions are not pairwise distinct");
      }
    }
  }
  // Best-fit line through the anchors is the principal axis of their scatter.
  Vec2 mean = Vec2::Zero();
  for (const auto& a : anchors) mean += a;
  mean /= static_cast<double>(anchors.size());
  Matrix2d scatter = Matrix2d::Zero();
  for (const auto& a : anchors) scatter += (a - mean) * (a - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix2d> eig(scatter);
  const Vec2 normal = eig.eigenvectors().col(0);  // smallest eigenvalue
  double max_offset = 0.0;
  for (const auto& a : anchors) max_offset = std::max(max_offset, std::abs((a - mean).dot(normal)));
  if (max_offset <= tolerance) {
    throw Error(ErrorCode::DegenerateGeometry, "beacons are collinear");
  }
}

PlanarSolution solve_ranges(std::span<const PlanarRange> ms, const SolverOptions& opts) {
  if (ms.size() < 3) throw Error(ErrorCode::InsufficientBeacons, "need at least 3 ranges");
  std::vector<Vec2> anchors;
  for (const auto& m : ms) {
    require_measurement(std::isfinite(m.range) && m.range >= 0.0, "range must be finite and >= 0");
    require_measurement(std::isfinite(m.sigma) && m.sigma > 0.0, "sigma must be positive");
    anchors.push_back(m.anchor);
  }
  check_geometry(anchors, tolerance_for(opts));

  Vec2 centroid = Vec2::Zero();
  double weight_sum = 0.0;
  for (const auto& m : ms) {
    const double w = 1.0 / std::max(m.range, 1.0);
    centroid += w * m.anchor;
    weight_sum += w;
  }
  centroid /= weight_sum;

  std::vector<Vec2> seeds{centroid};
  for (const auto& s : grid_seeds(bounding_box(anchors))) seeds.push_back(s);

  auto eval = [&](const Vec2& p, VectorXd& r, MatrixX2d& j) { range_eval(ms, p, r, j); };
  std::optional<LmResult> best;
  for (const auto& seed : seeds) {
    const LmResult res = levenberg(eval, seed, opts);
    if (!res.converged) continue;
    if (!best || res.cost < best->cost) best = res;
  }
  if (!best) throw Error(ErrorCode::NoConvergence, "range solver hit its iteration cap");

  PlanarSolution sol;
  sol.position = best->position;
  sol.cost = best->cost;
  sol.iterations = best->iterations;
  MatrixX2d geometry(static_cast<Eigen::Index>(ms.size()), 2);
  double sq = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    double dist = 0.0;
    geometry.row(static_cast<Eigen::Index>(i)) = unit_from(ms[i].anchor, sol.position, dist).transpose();
    sq += (dist - ms[i].range) * (dist - ms[i].range);
  }
  sol.residual_rms = std::sqrt(sq / static_cast<double>(ms.size()));
  sol.gdop = gdop_of(geometry);
  return sol;
}

PlanarSolution solve_tdoa(std::span<const PlanarTdoa> ms, const SolverOptions& opts) {
  if (ms.size() < 2) throw Error(ErrorCode::InsufficientBeacons, "need at least 2 TDOA measurements");
  std::vector<Vec2> anchors{ms.front().reference};
  for (const auto& m : ms) {
    require_measurement((m.reference - ms.front().reference).norm() < kCoincidentAnchors,
                        "TDOA measurements must share one reference beacon");
    require_measurement(std::isfinite(m.range_difference), "range difference must be finite");
    require_measurement(std::isfinite(m.sigma) && m.sigma > 0.0, "sigma must be positive");
    anchors.push_back(m.anchor);
  }
  check_geometry(anchors, tolerance_for(opts));

  auto eval = [&](const Vec2& p, VectorXd& r, MatrixX2d& j) { tdoa_eval(ms, p, r, j); };
  std::vector<LmResult> minima;
  for (const auto& seed : grid_seeds(bounding_box(anchors))) {
    LmResult res = levenberg(eval, seed, opts);
    if (res.converged) minima.push_back(res);
  }
  if (minima.empty()) throw Error(ErrorCode::NoConvergence, "TDOA solver hit its iteration cap");
  std::sort(minima.begin(), minima.end(),
            [](const LmResult& a, const LmResult& b) { return a.cost < b.cost; });

  PlanarSolution sol;
  const LmResult& best = minima.front();
  sol.position = best.position;
  sol.cost = best.cost;
  sol.iterations = best.iterations;
  MatrixX2d geometry(static_cast<Eigen::Index>(ms.size()), 2);
  double sq = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    double d_anchor = 0.0, d_ref = 0.0;
    const Vec2 u_anchor = unit_from(ms[i].anchor, sol.position, d_anchor);
    const Vec2 u_ref = unit_from(ms[i].reference, sol.position, d_ref);
    geometry.row(static_cast<Eigen::Index>(i)) = (u_anchor - u_ref).transpose();
    const double res = d_anchor - d_ref - ms[i].range_difference;
    sq += res * res;
  }
  sol.residual_rms = std::sqrt(sq / static_cast<double>(ms.size()));
  sol.gdop = gdop_of(geometry);

  const double accuracy = std::max(
      opts.accuracy_floor, sol.residual_rms > 0.0 ? sol.residual_rms * sol.gdop : 0.0);
  for (std::size_t i = 1; i < minima.size(); ++i) {
    const bool similar_cost =
        minima[i].cost <= kAmbiguityCostRatio * best.cost + kAmbiguityCostFloor;
    if (similar_cost && (minima[i].position - best.position).norm() > 2.0 * accuracy) {
      throw Error(ErrorCode::AmbiguousSolution, "TDOA geometry admits two comparable solutions");
    }
  }
  return sol;
}

namespace {

double reported_accuracy(double floor, const PlanarSolution& sol) {
  const double model = sol.residual_rms > 0.0 ? sol.residual_rms * sol.gdop : 0.0;
  return std::isfinite(model) ? std::max(floor, model) : floor;
}

template <typename Range>
geo::GeoPoint frame_origin(const Range& beacons) {
  std::vector<geo::GeoPoint> points;
  for (const Beacon* b : beacons) points.push_back(b->position);
  return geo::centroid(points);
}

Vec2 project(const geo::GeoPoint& origin, const geo::GeoPoint& p) {
  const auto e = geo::to_enu(origin, p);
  return Vec2{e.east, e.north};
}

}  // namespace

Fix trilaterate(std::span<const RangeMeasurement> ms, Millis timestamp, const SolverOptions& opts) {
  if (ms.size() < 3) throw Error(ErrorCode::InsufficientBeacons, "need at least 3 ranges");
  std::vector<const Beacon*> beacons;
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& m : ms) {
    m.beacon.validate();
    beacons.push_back(&m.beacon);
    floor = std::min(floor, accuracy_floor(m.beacon.kind));
  }
  const geo::GeoPoint origin = frame_origin(beacons);
  std::vector<PlanarRange> planar;
  for (const auto& m : ms) planar.push_back({project(origin, m.beacon.position), m.range, m.sigma});

  SolverOptions o = opts;
  o.accuracy_floor = floor;
  const PlanarSolution sol = solve_ranges(planar, o);
  const auto pos = geo::from_enu(origin, {sol.position.x(), sol.position.y()});
  return Fix{geo::GeoPoint::make(pos.lat, pos.lon), reported_accuracy(floor, sol),
             FixMethod::Trilateration, sol.residual_rms, timestamp};
}

Fix multilaterate_tdoa(std::span<const TdoaMeasurement> ms, Millis timestamp,
                       const SolverOptions& opts) {
  if (ms.size() < 2) throw Error(ErrorCode::InsufficientBeacons, "need at least 2 TDOA measurements");
  std::vector<const Beacon*> beacons{&ms.front().reference};
  double floor = accuracy_floor(ms.front().reference.kind);
  for (const auto& m : ms) {
    m.reference.validate();
    m.beacon.validate();
    require_measurement(m.reference.id == ms.front().reference.id &&
                            m.reference.position == ms.front().reference.position,
                        "TDOA measurements must share one reference beacon");
    require_measurement(std::isfinite(m.delta_t), "delta_t must be finite");
    require_measurement(std::isfinite(m.sigma_t) && m.sigma_t > 0.0, "sigma_t must be positive");
    const double baseline = geo::haversine(m.reference.position, m.beacon.position);
    const double slack = std::max(1.0, 5.0 * kSpeedOfLight * m.sigma_t);
    require_measurement(std::abs(m.delta_t) * kSpeedOfLight <= baseline + slack,
                        "delta_t exceeds the beacon baseline");
    beacons.push_back(&m.beacon);
    floor = std::min(floor, accuracy_floor(m.beacon.kind));
  }
  const geo::GeoPoint origin = frame_origin(beacons);
  const Vec2 ref = project(origin, ms.front().reference.position);
  std::vector<PlanarTdoa> planar;
  for (const auto& m : ms) {
    planar.push_back({ref, project(origin, m.beacon.position), kSpeedOfLight * m.delta_t,
                      kSpeedOfLight * m.sigma_t});
  }

  SolverOptions o = opts;
  o.accuracy_floor = floor;
  const PlanarSolution sol = solve_tdoa(planar, o);
  const auto pos = geo::from_enu(origin, {sol.position.x(), sol.position.y()});
  return Fix{geo::GeoPoint::make(pos.lat, pos.lon), reported_accuracy(floor, sol), FixMethod::Tdoa,
             sol.residual_rms, timestamp};
}

Fix proximity_fix(const Beacon& beacon, Millis timestamp) {
  beacon.validate();
  return Fix{beacon.position, beacon.range_radius, FixMethod::Proximity, 0.0, timestamp};
}

Fix best_fix(std::span<const Fix> fixes) {
  if (fixes.empty()) throw Error(ErrorCode::EmptyInput, "no fixes to choose from");
  auto rank = [](FixMethod m) {
    switch (m) {
      case FixMethod::Trilateration: return 0;
      case FixMethod::Tdoa: return 1;
      case FixMethod::Proximity: return 2;
    }
    return 3;
  };
  const Fix* best = &fixes.front();
  for (const Fix& f : fixes.subspan(1)) {
    if (f.accuracy != best->accuracy) {
      if (f.accuracy < best->accuracy) best = &f;
    } else if (f.timestamp != best->timestamp) {
      if (f.timestamp > best->timestamp) best = &f;
    } else if (rank(f.method) < rank(best->method)) {
      best = &f;
    }
  }
  return *best;
}

}  // namespace lbs::loc
