#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lbs/error.hpp"
#include "lbs/geomath.hpp"

namespace lbs::loc {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

enum class BeaconKind { GpsPseudo, CellTower, WifiAp, BluetoothNode };
enum class FixMethod { Trilateration, Tdoa, Proximity };

std::string_view to_string(BeaconKind kind);
std::string_view to_string(FixMethod method);
BeaconKind beacon_kind_from_string(std::string_view s);
FixMethod fix_method_from_string(std::string_view s);

/// Lowest accuracy a solver may report for measurements from this kind of
/// beacon: GpsPseudo 10 m, WifiAp 30 m, CellTower 500 m, BluetoothNode 1 m.
double accuracy_floor(BeaconKind kind);

struct Beacon {
  std::string id;
  geo::GeoPoint position;
  BeaconKind kind = BeaconKind::GpsPseudo;
  double range_radius = 1.0;  // coverage radius, meters

  void validate() const;
};

struct RangeMeasurement {
  Beacon beacon;
  double range = 0.0;  // meters
  double sigma = 1.0;  // meters
};

/// Arrival-time difference of `beacon` minus `reference`.
struct TdoaMeasurement {
  Beacon reference;
  Beacon beacon;
  double delta_t = 0.0;  // seconds
  double sigma_t = 1e-8;  // seconds
};

struct Fix {
  geo::GeoPoint position;
  double accuracy = 0.0;  // 1-sigma radius, meters
  FixMethod method = FixMethod::Proximity;
  double residual_rms = 0.0;
  Millis timestamp = 0;

  friend bool operator==(const Fix&, const Fix&) = default;
};

// ---------------------------------------------------------------------------
// Planar solvers. These work in meters on a local tangent plane and are what
// the geographic entry points call after projecting beacons.

using Vec2 = Eigen::Vector2d;

struct PlanarRange {
  Vec2 anchor;
  double range = 0.0;
  double sigma = 1.0;
};

/// c * delta_t expressed directly in meters: |p - anchor| - |p - reference|.
struct PlanarTdoa {
  Vec2 reference;
  Vec2 anchor;
  double range_difference = 0.0;
  double sigma = 1.0;  // meters
};

struct SolverOptions {
  double initial_damping = 1e-3;
  double step_tolerance = 1e-8;  // meters
  int max_iterations = 100;
  double collinearity_tolerance = 1.0;  // meters
  /// Lower bound on reported accuracy; two TDOA minima count as distinct
  /// only when more than twice the accuracy apart.
  double accuracy_floor = 1.0;  // meters
};

struct PlanarSolution {
  Vec2 position = Vec2::Zero();
  double cost = 0.0;          // weighted sum of squared residuals
  double residual_rms = 0.0;  // unweighted, meters
  double gdop = 0.0;          // sqrt(trace((J^T J)^-1)), unit-vector geometry
  int iterations = 0;
};

double range_cost(std::span<const PlanarRange> ms, const Vec2& p);
double tdoa_cost(std::span<const PlanarTdoa> ms, const Vec2& p);

/// Throws DegenerateGeometry when anchors coincide or lie within
/// `tolerance` meters of a common line.
void check_geometry(std::span<const Vec2> anchors, double tolerance);

/// Damped Gauss-Newton range fit. Starts from the 1/r-weighted anchor
/// centroid and also from a 3x3 grid over the anchor bounding box, keeping
/// the lowest-cost converged minimum.
PlanarSolution solve_ranges(std::span<const PlanarRange> ms, const SolverOptions& opts = {});

/// Multi-start damped Gauss-Newton TDOA fit from a 3x3 grid of seeds over
/// the anchor bounding box. Throws AmbiguousSolution when two distinct minima
/// have costs within 5% of each other.
PlanarSolution solve_tdoa(std::span<const PlanarTdoa> ms, const SolverOptions& opts = {});

// ---------------------------------------------------------------------------
// Geographic entry points.

Fix trilaterate(std::span<const RangeMeasurement> ms, Millis timestamp,
                const SolverOptions& opts = {});
Fix multilaterate_tdoa(std::span<const TdoaMeasurement> ms, Millis timestamp,
                       const SolverOptions& opts = {});
Fix proximity_fix(const Beacon& beacon, Millis timestamp);

/// Smallest accuracy wins; ties go to the newest, then to
/// Trilateration > Tdoa > Proximity.
Fix best_fix(std::span<const Fix> fixes);

}  // namespace lbs::loc
