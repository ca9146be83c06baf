#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "layoutprior/annotations.hpp"
#include "layoutprior/error.hpp"

using namespace layoutprior;

namespace {

const std::filesystem::path kData = LAYOUTPRIOR_TEST_DATA;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Usage;
}

// Farthest crossing of the ray (c + t*d, t >= 0) with the closed polygon.
std::optional<double> ray_oracle(double cx, double cy, double angle, const std::vector<std::pair<double, double>>& poly) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  std::optional<double> best;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto [ax, ay] = poly[i];
    const auto [bx, by] = poly[(i + 1) % poly.size()];
    const double ex = bx - ax, ey = by - ay;
    const double den = dx * ey - dy * ex;
    if (std::abs(den) < 1e-12) continue;
    const double t = ((ax - cx) * ey - (ay - cy) * ex) / den;
    const double u = ((ax - cx) * dy - (ay - cy) * dx) / den;
    if (t >= 0 && u >= -1e-9 && u <= 1 + 1e-9 && (!best || t > *best)) best = t;
  }
  return best;
}

}  // namespace

TEST_CASE("canvas transform examples") {
  CanvasTransform t = compute_transform(1024, 768);
  CHECK(t.scale == doctest::Approx(0.5));
  CHECK(t.pad_x == 0);
  CHECK(t.pad_y == 64);
  t = compute_transform(512, 512);
  CHECK(t.scale == doctest::Approx(1.0));
  CHECK(t.pad_x == 0);
  CHECK(t.pad_y == 0);
  t = compute_transform(200, 100);
  CHECK(t.scale == doctest::Approx(2.56));
  CHECK(t.pad_y == 128);
  t = compute_transform(480, 640);
  CHECK(t.pad_y == 0);
  CHECK(t.pad_x == 64);
}

TEST_CASE("long side maps to exactly 512") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double w = 1 + static_cast<double>(rng() % 4000), h = 1 + static_cast<double>(rng() % 4000);
    const CanvasTransform t = compute_transform(w, h);
    const bool wide = std::lround(w * t.scale) == kCanvasSize;
    const bool tall = std::lround(h * t.scale) == kCanvasSize;
    CHECK((wide || tall));
    CHECK((t.pad_x == 0 || t.pad_y == 0));
  }
}

TEST_CASE("quantization rounds half away from zero and clamps") {
  CHECK(quantize_coordinate(2.5) == 3);
  CHECK(quantize_coordinate(2.4999) == 2);
  CHECK(quantize_coordinate(-3.0) == 0);
  CHECK(quantize_coordinate(600.0) == kCanvasSize);
}

TEST_CASE("quantize scene examples") {
  RawImageAnnotation raw;
  raw.width = 1024;
  raw.height = 768;
  raw.instances = {{"person", RawBox{100, 100, 300, 200}}};
  QuantizeResult q = quantize_scene(raw);
  REQUIRE(q.record);
  CHECK(std::get<Box>(q.record->instances[0].geometry) == Box{50, 114, 150, 164});

  raw.width = raw.height = 512;
  RawKeypoints k;
  k.joints.assign(14, RawKeypoint{256, 256, true});
  k.joints[3] = {0, 0, false};
  k.joints[4] = {300, 300, false};
  raw.instances = {{"person", k}};
  q = quantize_scene(raw);
  REQUIRE(q.record);
  CHECK(q.record->n_keypoints == 14);
  const auto& joints = std::get<Keypoints>(q.record->instances[0].geometry).joints;
  CHECK(joints[0] == Point{256, 256});
  CHECK(joints[3] == Point{0, 0});
  CHECK(joints[4] == Point{0, 0});
}

TEST_CASE("boxes collapsing after quantization are dropped and counted") {
  RawImageAnnotation raw;
  raw.width = 4096;
  raw.height = 4096;
  raw.instances = {{"kite", RawBox{10, 10, 11, 11}}, {"kite", RawBox{0, 0, 400, 400}}};
  const QuantizeResult q = quantize_scene(raw);
  REQUIRE(q.record);
  CHECK(q.record->instances.size() == 1);
  CHECK(q.dropped_degenerate == 1);
}

TEST_CASE("size classification boundaries") {
  CHECK(classify_size(1023.0) == SizeFlag::Small);
  CHECK(classify_size(1024.0) == SizeFlag::Medium);
  CHECK(classify_size(9215.0) == SizeFlag::Medium);
  CHECK(classify_size(9216.0) == SizeFlag::Large);
  CHECK(classify_size(0.0) == SizeFlag::Small);
  std::vector<Instance> none;
  CHECK(code_of([&] { classify_size(std::span<const Instance>(none)); }) == ErrorCode::EmptyScene);
  std::vector<Instance> two{{"a", Box{0, 0, 31, 33}}, {"b", Box{0, 0, 1, 1}}};
  CHECK(average_area(two) == doctest::Approx((31.0 * 33.0 + 1.0) / 2.0));
  std::vector<Instance> pose{{"person", Keypoints{{{0, 0}, {10, 20}, {50, 70}}}}};
  CHECK(area(bounding_box(pose[0].geometry)) == doctest::Approx(40.0 * 50.0));
}

TEST_CASE("five-image box fixture matches a hand count") {
  const DatasetRecords d = ingest_dataset(kData / "coco_boxes.json", AnnotationType::Box);
  CHECK(d.records.size() == 5);
  CHECK(d.stats.images_seen == 5);
  CHECK(d.stats.instances_seen == 9);
  CHECK(d.stats.dropped_crowd == 1);
  CHECK(d.stats.instances_kept == 8);
  CHECK(d.stats.instances_kept + d.stats.instances_dropped() == d.stats.instances_seen);
  const SceneRecord& first = d.records[0];
  REQUIRE(first.instances.size() == 2);
  CHECK(std::get<Box>(first.instances[0].geometry) == Box{50, 114, 150, 164});
  CHECK(std::get<Box>(first.instances[1].geometry) == Box{300, 89, 340, 109});
  CHECK(d.records[1].instances.size() == 1);
  CHECK(std::get<Box>(d.records[2].instances[0].geometry) == Box{51, 154, 179, 256});
}

TEST_CASE("images without instances are excluded and counted") {
  const std::string text = R"({"images": [{"id": 1, "width": 100, "height": 100}, {"id": 2, "width": 100, "height": 100}],
    "categories": [{"id": 1, "name": "cat"}],
    "annotations": [{"image_id": 1, "category_id": 1, "bbox": [1, 1, 50, 50]}]})";
  const LoadResult r = load_annotations_from_string(text, AnnotationType::Box);
  CHECK(r.images.size() == 1);
  CHECK(r.stats.images_without_instances == 1);
}

TEST_CASE("people with fewer than five labeled keypoints are dropped") {
  std::string four = "[";
  std::string five = "[";
  for (int j = 0; j < 17; ++j) {
    const char* sep = j ? ", " : "";
    four += std::string(sep) + (j < 4 ? "10, 20, 2" : "0, 0, 0");
    five += std::string(sep) + (j < 5 ? "10, 20, 2" : "0, 0, 0");
  }
  four += "]";
  five += "]";
  const std::string text = R"({"images": [{"id": 1, "width": 100, "height": 100}],
    "categories": [{"id": 1, "name": "person"}],
    "annotations": [{"image_id": 1, "category_id": 1, "keypoints": )" + four +
                           R"(}, {"image_id": 1, "category_id": 1, "keypoints": )" + five + "}]}";
  const LoadResult r = load_annotations_from_string(text, AnnotationType::Keypoint);
  REQUIRE(r.images.size() == 1);
  CHECK(r.images[0].instances.size() == 1);
  CHECK(r.stats.dropped_few_keypoints == 1);
  CHECK(std::get<RawKeypoints>(r.images[0].instances[0].geometry).joints.size() == 18);
}

TEST_CASE("neck is synthesized only when both shoulders are labeled") {
  std::string flat = "[";
  for (int j = 0; j < 17; ++j) {
    flat += std::string(j ? ", " : "") + (j == 5 ? "10, 40, 2" : j == 6 ? "30, 40, 2" : j < 7 ? "5, 5, 2" : "0, 0, 0");
  }
  flat += "]";
  const std::string text = R"({"images": [{"id": 1, "width": 100, "height": 100}],
    "categories": [{"id": 1, "name": "person"}],
    "annotations": [{"image_id": 1, "category_id": 1, "keypoints": )" + flat + "}]}";
  const LoadResult r = load_annotations_from_string(text, AnnotationType::Keypoint);
  const auto& joints = std::get<RawKeypoints>(r.images[0].instances[0].geometry).joints;
  CHECK(joints[1].visible);
  CHECK(joints[1].x == doctest::Approx(20.0));
  CHECK(joints[1].y == doctest::Approx(40.0));
}

TEST_CASE("loader error codes") {
  CHECK(code_of([] { load_annotations_from_string("{not json", AnnotationType::Box); }) == ErrorCode::MalformedFile);
  CHECK(code_of([] { load_annotations_from_string(R"({"images": []})", AnnotationType::Box); }) ==
        ErrorCode::SchemaViolation);
  CHECK(code_of([] {
          load_annotations_from_string(R"({"images": [], "annotations": [], "categories": []})", AnnotationType::Box);
        }) == ErrorCode::EmptyDataset);
  CHECK(code_of([] {
          load_annotations_from_string(R"({"images": [{"id": 1, "width": 10, "height": 10}],
            "categories": [{"id": 1, "name": "c"}],
            "annotations": [{"image_id": 1, "category_id": 1, "segmentation": {"counts": "x", "size": [10, 10]}}]})",
                                       AnnotationType::Mask);
        }) == ErrorCode::EmptyDataset);
}

TEST_CASE("polar sampling of a centered square hits the edge midpoints") {
  const std::vector<Point> square{{100, 100}, {300, 100}, {300, 300}, {100, 300}};
  const auto pts = polar_sample_mask(square, 4);
  REQUIRE(pts.size() == 4);
  CHECK(pts[0] == Point{300, 200});
  CHECK(pts[1] == Point{200, 300});
  CHECK(pts[2] == Point{100, 200});
  CHECK(pts[3] == Point{200, 100});
}

TEST_CASE("polar sampling of a circle stays at the radius") {
  std::vector<Point> circle;
  const double r = 150.0;
  for (int i = 0; i < 180; ++i) {
    const double a = 2 * std::numbers::pi * i / 180.0;
    circle.push_back({static_cast<int>(std::lround(256 + r * std::cos(a))), static_cast<int>(std::lround(256 + r * std::sin(a)))});
  }
  const auto pts = polar_sample_mask(circle, 36);
  REQUIRE(pts.size() == 36);
  for (const Point& p : pts) CHECK(std::hypot(p.x - 256.0, p.y - 256.0) == doctest::Approx(r).epsilon(0.01));
}

TEST_CASE("polar sampling agrees with a ray-casting oracle on random convex polygons") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 10);
    const double cx = 150 + static_cast<double>(rng() % 200), cy = 150 + static_cast<double>(rng() % 200);
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (double& a : angles) a = 2 * std::numbers::pi * static_cast<double>(rng() % 100000) / 100000.0;
    std::sort(angles.begin(), angles.end());
    std::vector<Point> poly;
    const double rad = 20 + static_cast<double>(rng() % 120);
    for (double a : angles) {
      poly.push_back({static_cast<int>(std::lround(cx + rad * std::cos(a))), static_cast<int>(std::lround(cy + rad * std::sin(a)))});
    }
    if (polygon_area(poly) < 50.0) continue;
    double mx = 0, my = 0;
    std::vector<std::pair<double, double>> exact;
    for (const Point& p : poly) {
      mx += p.x;
      my += p.y;
      exact.emplace_back(p.x, p.y);
    }
    mx /= n;
    my /= n;
    const int samples = 36;
    const auto pts = polar_sample_mask(poly, samples);
    REQUIRE(pts.size() == static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
      const double a = 2 * std::numbers::pi * i / samples;
      const auto t = ray_oracle(mx, my, a, exact);
      REQUIRE(t);
      const double ex = mx + *t * std::cos(a), ey = my + *t * std::sin(a);
      CHECK(std::abs(pts[static_cast<std::size_t>(i)].x - ex) <= 0.5 + 1e-6);
      CHECK(std::abs(pts[static_cast<std::size_t>(i)].y - ey) <= 0.5 + 1e-6);
    }
  }
}

TEST_CASE("zero-area polygons are rejected") {
  const std::vector<Point> line{{0, 0}, {10, 10}, {20, 20}};
  CHECK(code_of([&] { polar_sample_mask(line, 36); }) == ErrorCode::DegeneratePolygon);
}
