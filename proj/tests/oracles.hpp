#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing in here calls into the solver or index code it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace lbs::oracle {

/// Spherical law of cosines in extended precision.
inline long double law_of_cosines(double lat1, double lon1, double lat2, double lon2) {
  constexpr long double kR = 6'371'000.0L;
  const long double k = std::numbers::pi_v<long double> / 180.0L;
  const long double p1 = lat1 * k, p2 = lat2 * k, dl = (lon2 - lon1) * k;
  long double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
  c = std::clamp(c, -1.0L, 1.0L);
  return kR * std::acos(c);
}

struct Pt {
  double x = 0.0, y = 0.0;
};

struct RangeObs {
  Pt anchor;
  double range = 0.0, sigma = 1.0;
};

struct TdoaObs {
  Pt reference, anchor;
  double diff = 0.0, sigma = 1.0;
};

inline double dist(Pt a, Pt b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double range_cost(const std::vector<RangeObs>& obs, Pt p) {
  double c = 0.0;
  for (const auto& o : obs) {
    const double r = (dist(p, o.anchor) - o.range) / o.sigma;
    c += r * r;
  }
  return c;
}

inline double tdoa_cost(const std::vector<TdoaObs>& obs, Pt p) {
  double c = 0.0;
  for (const auto& o : obs) {
    const double r = (dist(p, o.anchor) - dist(p, o.reference) - o.diff) / o.sigma;
    c += r * r;
  }
  return c;
}

struct GridResult {
  Pt best;
  double cost = std::numeric_limits<double>::infinity();
};

/// Exhaustive grid over [lo, hi] at `coarse` spacing, then nested grids of
/// 10x finer spacing around the best few cells down to `finest` spacing.
template <typename Cost>
GridResult grid_search(const Cost& cost, Pt lo, Pt hi, double coarse = 1.0,
                       double finest = 0.01, int keep = 6) {
  struct Cand {
    Pt p;
    double c;
  };
  std::vector<Cand> cands;
  for (double x = lo.x; x <= hi.x + 1e-9; x += coarse) {
    for (double y = lo.y; y <= hi.y + 1e-9; y += coarse) {
      cands.push_back({{x, y}, cost(Pt{x, y})});
    }
  }
  double step = coarse;
  while (true) {
    const std::size_t n = std::min<std::size_t>(keep, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(n), cands.end(),
                      [](const Cand& a, const Cand& b) { return a.c < b.c; });
    cands.resize(n);
    if (step <= finest * 1.0001) break;
    const double fine = step / 10.0;
    std::vector<Cand> next;
    for (const auto& c : cands) {
      for (int i = -10; i <= 10; ++i) {
        for (int j = -10; j <= 10; ++j) {
          const Pt p{c.p.x + i * fine, c.p.y + j * fine};
          next.push_back({p, cost(p)});
        }
      }
    }
    cands = std::move(next);
    step = fine;
  }
  return {cands.front().p, cands.front().c};
}

/// Circumcenter of a triangle.
inline Pt circumcenter(Pt a, Pt b, Pt c) {
  const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
  const double a2 = a.x * a.x + a.y * a.y, b2 = b.x * b.x + b.y * b.y, c2 = c.x * c.x + c.y * c.y;
  return {(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
          (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d};
}

/// Signed area test: is `p` strictly inside the convex polygon `hull`
/// (counter-clockwise vertices)?
inline bool inside_convex(const std::vector<Pt>& hull, Pt p, double margin = 0.0) {
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Pt a = hull[i], b = hull[(i + 1) % hull.size()];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross <= margin * dist(a, b)) return false;
  }
  return true;
}

}  // namespace lbs::oracle
