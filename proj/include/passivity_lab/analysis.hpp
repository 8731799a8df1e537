#pragma once

#include <Eigen/Dense>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "passivity_lab/benchmark.hpp"
#include "passivity_lab/dictionary.hpp"
#include "passivity_lab/errors.hpp"
#include "passivity_lab/trajectory.hpp"

namespace passivity_lab {

// ---------------------------------------------------------------------------
// Derivative estimates along sampled trajectories

/// Forward difference (S(x_{i+1}) - S(x_i)) / T_s, length N-1.
inline Eigen::VectorXd estimate_sdot(const StorageEstimate& est, const Trajectory& traj) {
  const Eigen::Index n = traj.size();
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = eval_storage(est, traj.state(i));
  return (s.tail(n - 1) - s.head(n - 1)) / traj.sample_period;
}

enum class LfsMethod { autonomous_difference, input_corrected };

struct LfsSeries {
  Eigen::VectorXd times;   // left end of each sampling interval
  Eigen::VectorXd values;
  LfsMethod method = LfsMethod::autonomous_difference;
};

/// g(x), or a constant sign surrogate b.
using InputDirection = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline InputDirection constant_direction(Eigen::VectorXd b) {
  return [b = std::move(b)](const Eigen::VectorXd&) { return b; };
}

/// L_fS estimate: forward difference of S minus the two-sample average of
/// L_gS u. With an identically zero input this is exactly estimate_sdot and
/// g is not needed.
inline LfsSeries estimate_lfs(const StorageEstimate& est, const Trajectory& traj,
                              const std::optional<InputDirection>& g = std::nullopt) {
  const Eigen::Index n = traj.size();
  LfsSeries out;
  out.times = traj.sample_times.head(n - 1);
  out.values = estimate_sdot(est, traj);
  if ((traj.inputs.array() == 0.0).all()) {
    out.method = LfsMethod::autonomous_difference;
    return out;
  }
  if (!g) throw MissingPriorError("input is not identically zero: L_fS needs g(x) or its sign vector b");
  out.method = LfsMethod::input_corrected;
  Eigen::VectorXd lgs_u(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = traj.state(i);
    lgs_u(i) = storage_gradient(est, x).dot((*g)(x)) * traj.inputs(i);
  }
  out.values -= 0.5 * (lgs_u.head(n - 1) + lgs_u.tail(n - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Regions

namespace bg = boost::geometry;
using Point2 = bg::model::d2::point_xy<double>;
using Polygon2 = bg::model::polygon<Point2>;

enum class RegionKind { convex_hull, box, whole_space };

inline const char* region_tag(RegionKind k) {
  switch (k) {
    case RegionKind::convex_hull: return "convex_hull";
    case RegionKind::box: return "box";
    case RegionKind::whole_space: return "whole_space";
  }
  return "";
}

struct RegionDescriptor {
  RegionKind kind = RegionKind::whole_space;
  int state_dim = 2;
  Polygon2 hull;          // convex_hull only
  Eigen::VectorXd lower;  // bounding box; empty for whole_space
  Eigen::VectorXd upper;

  bool contains(const Eigen::VectorXd& x) const {
    switch (kind) {
      case RegionKind::whole_space: return true;
      case RegionKind::box:
        return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
      case RegionKind::convex_hull: return bg::covered_by(Point2(x(0), x(1)), hull);
    }
    return false;
  }

  std::vector<Eigen::Vector2d> vertices() const {
    std::vector<Eigen::Vector2d> v;
    for (const auto& p : hull.outer()) v.emplace_back(p.x(), p.y());
    return v;
  }
};

inline RegionDescriptor box_region(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw ArgumentError("box bounds have mismatched dimensions");
  if (!((lower.array() <= 0.0).all() && (upper.array() >= 0.0).all()))
    throw DegenerateError("box region does not contain the origin");
  RegionDescriptor r;
  r.kind = RegionKind::box;
  r.state_dim = static_cast<int>(lower.size());
  r.lower = std::move(lower);
  r.upper = std::move(upper);
  return r;
}

inline RegionDescriptor whole_space_region(int state_dim = 2) {
  RegionDescriptor r;
  r.kind = RegionKind::whole_space;
  r.state_dim = state_dim;
  return r;
}

/// Convex hull of 2-D points; must enclose the origin.
inline RegionDescriptor convex_hull_region(const std::vector<Eigen::Vector2d>& points) {
  bg::model::multi_point<Point2> mp;
  for (const auto& p : points) bg::append(mp, Point2(p(0), p(1)));
  RegionDescriptor r;
  r.kind = RegionKind::convex_hull;
  r.state_dim = 2;
  bg::convex_hull(mp, r.hull);
  if (r.hull.outer().size() < 4 || bg::area(r.hull) <= 0.0)
    throw DegenerateError("convex hull of the qualifying samples is degenerate");
  if (!bg::covered_by(Point2(0.0, 0.0), r.hull))
    throw DegenerateError("qualifying samples do not enclose the origin");
  r.lower = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  r.upper = -r.lower;
  for (const auto& p : r.hull.outer()) {
    r.lower = r.lower.cwiseMin(Eigen::Vector2d(p.x(), p.y()));
    r.upper = r.upper.cwiseMax(Eigen::Vector2d(p.x(), p.y()));
  }
  return r;
}

struct NegativeRegionOptions {
  double margin_tol = 0.0;
  bool whole_space_prior = false;
  RegionKind kind = RegionKind::convex_hull;
};

/// Data-supported estimate of the set where L_fS < 0. When every estimate is
/// below margin_tol the region is the hull of all visited states. Otherwise
/// only qualifying samples closer to the origin than the nearest
/// non-qualifying one are used, distances measured with each coordinate
/// divided by its largest visited magnitude.
inline RegionDescriptor negative_region(const LfsSeries& lfs, const Trajectory& traj,
                                        const NegativeRegionOptions& opt = {}) {
  const int n_states = static_cast<int>(traj.state_dim());
  if (opt.whole_space_prior) return whole_space_region(n_states);
  if (lfs.values.size() != traj.size() - 1)
    throw ArgumentError("L_fS series does not match the trajectory");
  if (opt.kind == RegionKind::convex_hull && n_states != 2)
    throw ArgumentError("convex hull regions need a 2-D state; use the box kind");

  const Eigen::Index m = lfs.values.size();
  std::vector<Eigen::Index> selected;
  if ((lfs.values.array() < opt.margin_tol).all()) {
    for (Eigen::Index i = 0; i < traj.size(); ++i) selected.push_back(i);
  } else {
    Eigen::VectorXd scale = traj.states.cwiseAbs().colwise().maxCoeff().transpose();
    for (Eigen::Index c = 0; c < scale.size(); ++c)
      if (scale(c) <= 0.0) scale(c) = 1.0;
    const auto radius = [&](Eigen::Index i) {
      return (traj.states.row(i).transpose().cwiseQuotient(scale)).norm();
    };
    double r_star = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i)
      if (!(lfs.values(i) < opt.margin_tol)) r_star = std::min(r_star, radius(i));
    for (Eigen::Index i = 0; i < m; ++i)
      if (lfs.values(i) < opt.margin_tol && radius(i) < r_star) selected.push_back(i);
  }
  if (selected.empty()) throw DegenerateError("no sample has L_fS below the margin tolerance");

  if (opt.kind == RegionKind::convex_hull) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(selected.size());
    for (auto i : selected) pts.emplace_back(traj.states(i, 0), traj.states(i, 1));
    return convex_hull_region(pts);
  }
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_states, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (auto i : selected) {
    lo = lo.cwiseMin(traj.states.row(i).transpose());
    hi = hi.cwiseMax(traj.states.row(i).transpose());
  }
  return box_region(lo, hi);
}

// ---------------------------------------------------------------------------
// Domain of attraction from sublevel sets

struct DoaOptions {
  int grid = 400;
  double c_tol = 0.01;
  double pad = 1.5;  // search box = pad x region bounding box
  // Required for whole-space regions, optional otherwise.
  std::optional<std::pair<Eigen::Vector2d, Eigen::Vector2d>> search_box;
};

struct DoAEstimate {
  double level = 0.0;
  StorageEstimate storage;
  RegionDescriptor region;
  bool boundedness_checked = false;
  bool limited_by_boundedness = false;
  double boundary_samples_inside = 0.0;
  int boundary_samples = 0;
  int grid_resolution = 0;
  Eigen::Vector2d box_lower = Eigen::Vector2d::Zero();
  Eigen::Vector2d box_upper = Eigen::Vector2d::Zero();
};

/// Storage values on a uniform grid over a 2-D box; point (i, j) is
/// (x1_i, x2_j) with i, j in [0, res).
class LevelGrid {
 public:
  LevelGrid(const StorageEstimate& est, Eigen::Vector2d lo, Eigen::Vector2d hi, int res)
      : lo_(lo), hi_(hi), res_(res), values_(res, res) {
    if (res < 3) throw ArgumentError("grid resolution must be >= 3");
    if (!((hi - lo).array() > 0.0).all()) throw ArgumentError("empty search box");
    for (int i = 0; i < res; ++i)
      for (int j = 0; j < res; ++j) values_(i, j) = eval_storage(est, point(i, j));
  }

  Eigen::Vector2d point(int i, int j) const {
    const double fx = static_cast<double>(i) / (res_ - 1);
    const double fy = static_cast<double>(j) / (res_ - 1);
    return {lo_(0) + fx * (hi_(0) - lo_(0)), lo_(1) + fy * (hi_(1) - lo_(1))};
  }
  double value(int i, int j) const { return values_(i, j); }
  int resolution() const { return res_; }

  // Grid node nearest to the origin.
  std::pair<int, int> origin_node() const {
    const auto idx = [&](int a) {
      const double f = -lo_(a) / (hi_(a) - lo_(a)) * (res_ - 1);
      return std::clamp(static_cast<int>(std::lround(f)), 0, res_ - 1);
    };
    return {idx(0), idx(1)};
  }

  // Connected component of {S < c} containing the origin node (4-neighbour).
  // Returns an empty mask if the origin node itself is not below c.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> component(double c, bool* touches_edge) const {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> in =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(res_, res_, false);
    *touches_edge = false;
    const auto [i0, j0] = origin_node();
    if (!(values_(i0, j0) < c)) return in;
    std::deque<std::pair<int, int>> queue{{i0, j0}};
    in(i0, j0) = true;
    while (!queue.empty()) {
      const auto [i, j] = queue.front();
      queue.pop_front();
      if (i == 0 || j == 0 || i == res_ - 1 || j == res_ - 1) *touches_edge = true;
      const int di[] = {1, -1, 0, 0};
      const int dj[] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k], b = j + dj[k];
        if (a < 0 || b < 0 || a >= res_ || b >= res_ || in(a, b) || !(values_(a, b) < c)) continue;
        in(a, b) = true;
        queue.emplace_back(a, b);
      }
    }
    return in;
  }

  /// Points where S crosses c along grid edges (linear interpolation).
  std::vector<Eigen::Vector2d> contour(double c) const {
    std::vector<Eigen::Vector2d> pts;
    const auto edge = [&](int i, int j, int a, int b) {
      const double v0 = values_(i, j) - c, v1 = values_(a, b) - c;
      if ((v0 < 0.0) == (v1 < 0.0)) return;
      const double t = v0 / (v0 - v1);
      pts.push_back(point(i, j) + t * (point(a, b) - point(i, j)));
    };
    for (int i = 0; i < res_; ++i)
      for (int j = 0; j < res_; ++j) {
        if (i + 1 < res_) edge(i, j, i + 1, j);
        if (j + 1 < res_) edge(i, j, i, j + 1);
      }
    return pts;
  }

 private:
  Eigen::Vector2d lo_, hi_;
  int res_;
  Eigen::MatrixXd values_;
};

namespace detail {

inline std::pair<Eigen::Vector2d, Eigen::Vector2d> doa_search_box(const RegionDescriptor& region,
                                                                  const DoaOptions& opt) {
  if (opt.search_box) return *opt.search_box;
  if (region.kind == RegionKind::whole_space)
    throw ArgumentError("whole-space regions need an explicit search box");
  return {opt.pad * region.lower.head<2>(), opt.pad * region.upper.head<2>()};
}

}  // namespace detail

/// Largest c (to within c_tol) such that the origin's component of {S < c}
/// stays off the search-box edge (boundedness) and inside the region
/// (containment), both tested on a res x res grid.
inline DoAEstimate doa_estimate(const StorageEstimate& est, const RegionDescriptor& region,
                                const DoaOptions& opt = {}) {
  if (est.dictionary.state_dim != 2 || region.state_dim != 2)
    throw ArgumentError("domain-of-attraction estimation is implemented for 2-D states");
  if (!(opt.c_tol > 0.0)) throw ArgumentError("c_tol must be positive");
  const auto [lo, hi] = detail::doa_search_box(region, opt);
  const LevelGrid grid(est, lo, hi, opt.grid);
  const int res = grid.resolution();

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> inside(res, res);
  const auto origin = grid.origin_node();
  double s_max = 0.0;
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      inside(i, j) = region.contains(grid.point(i, j));
      s_max = std::max(s_max, grid.value(i, j));
      if (inside(i, j) && std::make_pair(i, j) != origin && !(grid.value(i, j) > 0.0))
        throw DegenerateError("storage function is not positive on the region");
    }

  const auto test = [&](double c, bool* bounded) {
    bool edge = false;
    const auto comp = grid.component(c, &edge);
    *bounded = !edge;
    if (edge) return false;
    for (int i = 0; i < res; ++i)
      for (int j = 0; j < res; ++j)
        if (comp(i, j) && !inside(i, j)) return false;
    return true;
  };

  bool bounded = true;
  double c_lo = 0.0;
  double c_hi = s_max + 1.0;  // the component then covers the grid and touches the edge
  if (!test(opt.c_tol, &bounded))
    throw DegenerateError("no positive level set fits the region");
  c_lo = opt.c_tol;
  bool hi_unbounded = true;
  while (c_hi - c_lo > opt.c_tol) {
    const double mid = 0.5 * (c_lo + c_hi);
    if (test(mid, &bounded)) {
      c_lo = mid;
    } else {
      c_hi = mid;
      hi_unbounded = !bounded;
    }
  }

  DoAEstimate out;
  out.level = c_lo;
  out.storage = est;
  out.region = region;
  out.boundedness_checked = true;
  out.limited_by_boundedness = hi_unbounded;
  out.grid_resolution = res;
  out.box_lower = lo;
  out.box_upper = hi;
  bool edge = false;
  const auto comp = grid.component(c_lo, &edge);
  int total = 0, ok = 0;
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      if (!comp(i, j)) continue;
      const bool boundary = i == 0 || j == 0 || i == res - 1 || j == res - 1 || !comp(i + 1, j) ||
                            !comp(i - 1, j) || !comp(i, j + 1) || !comp(i, j - 1);
      if (!boundary) continue;
      ++total;
      if (inside(i, j)) ++ok;
    }
  out.boundary_samples = total;
  out.boundary_samples_inside = total > 0 ? static_cast<double>(ok) / total : 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Feedback certification and damping control

enum class Verdict { certified, not_certified };

/// OFP(rho) plant in feedback with an IFP(nu) system is stable if nu > -rho.
inline Verdict certify_feedback(double plant_margin, double other_margin) {
  return other_margin > -plant_margin ? Verdict::certified : Verdict::not_certified;
}

inline Controller damping_control(const StorageEstimate& est, const Eigen::VectorXd& b, double k) {
  if (!(k > 0.0)) throw ArgumentError("damping gain must be positive");
  if (b.size() != est.dictionary.state_dim) throw ArgumentError("b has wrong dimension");
  if ((b.array() == 0.0).all()) throw ArgumentError("b must have a nonzero entry");
  return Controller{k, b, est};
}

}  // namespace passivity_lab
