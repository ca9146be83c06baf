#include <cmath>
#include <numbers>
#include <optional>

#include "layoutprior/annotations.hpp"
#include "layoutprior/error.hpp"

namespace layoutprior {

double polygon_area(std::span<const Point> polygon) {
  if (polygon.size() < 3) return 0.0;
  long long twice = 0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % polygon.size()];
    twice += static_cast<long long>(a.x) * b.y - static_cast<long long>(b.x) * a.y;
  }
  return std::abs(static_cast<double>(twice)) / 2.0;
}

namespace {

struct Vec2 {
  double x, y;
};

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

constexpr double kEps = 1e-9;

// Farthest distance along the ray at which it meets the closed polyline.
std::optional<double> farthest_hit(std::span<const Point> polygon, Vec2 c, Vec2 d) {
  std::optional<double> best;
  auto consider = [&](double t) {
    if (t >= -kEps && (!best || t > *best)) best = std::max(t, 0.0);
  };
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % polygon.size()];
    const Vec2 p{a.x - c.x, a.y - c.y};
    const Vec2 e{static_cast<double>(b.x - a.x), static_cast<double>(b.y - a.y)};
    const double denom = cross(d, e);
    if (std::abs(denom) < kEps) {
      // Parallel; only a collinear segment can touch the ray.
      if (std::abs(cross(p, d)) < kEps) {
        consider(dot(p, d));
        consider(dot({p.x + e.x, p.y + e.y}, d));
      }
      continue;
    }
    const double t = cross(p, e) / denom;
    const double s = cross(p, d) / denom;
    if (s >= -kEps && s <= 1.0 + kEps) consider(t);
  }
  return best;
}

}  // namespace

std::vector<Point> polar_sample_mask(std::span<const Point> polygon, int n) {
  if (n < 3) throw Error(ErrorCode::DegeneratePolygon, "polar sampling needs at least 3 points");
  if (polygon_area(polygon) == 0.0) throw Error(ErrorCode::DegeneratePolygon, "polygon has zero area");

  Vec2 c{0.0, 0.0};
  for (const Point& p : polygon) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(polygon.size());
  c.y /= static_cast<double>(polygon.size());

  const auto count = static_cast<std::size_t>(n);
  std::vector<std::optional<double>> dist(count);
  std::vector<Vec2> dirs(count);
  bool any = false;
  for (std::size_t i = 0; i < count; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    dirs[i] = {std::cos(theta), std::sin(theta)};
    dist[i] = farthest_hit(polygon, c, dirs[i]);
    any = any || dist[i].has_value();
  }
  if (!any) throw Error(ErrorCode::DegeneratePolygon, "no ray meets the polygon boundary");

  std::vector<Point> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    double r = 0.0;
    for (std::size_t back = 0; back < count; ++back) {
      const std::size_t j = (i + count - back) % count;
      if (dist[j]) {
        r = *dist[j];
        break;
      }
    }
    out[i] = {quantize_coordinate(c.x + r * dirs[i].x), quantize_coordinate(c.y + r * dirs[i].y)};
  }
  return out;
}

}  // namespace layoutprior
