#include "layoutprior/layout_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "layoutprior/error.hpp"

namespace layoutprior {

using nlohmann::json;

namespace {

json points_json(const std::vector<Point>& pts) {
  json arr = json::array();
  for (const Point& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Point> points_from(const json& arr) {
  std::vector<Point> out;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::SchemaViolation, "point must be [x, y]");
    out.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  return out;
}

}  // namespace

std::string layout_to_json(const LayoutEntry& entry) {
  const SceneRecord& r = entry.record;
  json j;
  j["line"] = entry.line;
  j["annotation_type"] = to_string(r.annotation_type);
  j["data_type"] = to_string(r.data_type);
  j["size"] = to_string(r.size_flag);
  j["n_instances"] = r.n_instances();
  j["n_keypoints"] = r.n_keypoints;
  json insts = json::array();
  for (const Instance& inst : r.instances) {
    json i;
    i["category"] = inst.category;
    if (const auto* b = std::get_if<Box>(&inst.geometry)) {
      i["box"] = {b->xmin, b->ymin, b->xmax, b->ymax};
    } else if (const auto* k = std::get_if<Keypoints>(&inst.geometry)) {
      i["keypoints"] = points_json(k->joints);
    } else {
      i["mask"] = points_json(std::get<MaskContour>(inst.geometry).points);
    }
    insts.push_back(std::move(i));
  }
  j["instances"] = std::move(insts);
  return j.dump();
}

LayoutEntry layout_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("layout line: ") + e.what());
  }
  try {
    LayoutEntry e;
    e.line = j.value("line", std::size_t{0});
    const auto type = parse_annotation_type(j.at("annotation_type").get<std::string>());
    const auto data = parse_data_type(j.at("data_type").get<std::string>());
    const auto size = parse_size_flag(j.at("size").get<std::string>());
    if (!type || !data || !size) throw Error(ErrorCode::SchemaViolation, "layout line has an unknown flag value");
    e.record.annotation_type = *type;
    e.record.data_type = *data;
    e.record.size_flag = *size;
    e.record.n_keypoints = j.at("n_keypoints").get<int>();
    for (const auto& i : j.at("instances")) {
      Instance inst;
      inst.category = i.at("category").get<std::string>();
      if (i.contains("box")) {
        const auto& b = i["box"];
        if (!b.is_array() || b.size() != 4) throw Error(ErrorCode::SchemaViolation, "box must have 4 values");
        inst.geometry = Box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
      } else if (i.contains("keypoints")) {
        inst.geometry = Keypoints{points_from(i["keypoints"])};
      } else if (i.contains("mask")) {
        inst.geometry = MaskContour{points_from(i["mask"])};
      } else {
        throw Error(ErrorCode::SchemaViolation, "instance has no geometry");
      }
      e.record.instances.push_back(std::move(inst));
    }
    if (j.contains("n_instances") && j["n_instances"].get<std::size_t>() != e.record.n_instances()) {
      throw Error(ErrorCode::SchemaViolation, "n_instances does not match the instance list");
    }
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::SchemaViolation, std::string("layout line: ") + ex.what());
  }
}

void write_layout_file(const std::filesystem::path& path, const std::vector<LayoutEntry>& entries) {
  std::vector<std::string> lines;
  lines.reserve(entries.size());
  for (const auto& e : entries) lines.push_back(layout_to_json(e));
  write_lines(path, lines);
}

std::vector<LayoutEntry> read_layout_file(const std::filesystem::path& path) {
  std::vector<LayoutEntry> out;
  for (const auto& line : read_lines(path)) {
    if (!line.empty()) out.push_back(layout_from_json(line));
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace layoutprior
