#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "layoutprior/scene.hpp"

namespace layoutprior {

/// One JSON object per line:
///   {"line": N, "annotation_type": "box", "data_type": "multiple instances",
///    "size": "large", "n_instances": 2, "n_keypoints": 0,
///    "instances": [{"category": "person", "box": [xmin, ymin, xmax, ymax]},
///                  {"category": "person", "keypoints": [[x, y], ...]},
///                  {"category": "clock", "mask": [[x, y], ...]}]}
/// "line" is the 0-based source line of the decoded sequence.
struct LayoutEntry {
  std::size_t line = 0;
  SceneRecord record;
};

std::string layout_to_json(const LayoutEntry& entry);
/// Throws MalformedFile / SchemaViolation.
LayoutEntry layout_from_json(const std::string& line);

void write_layout_file(const std::filesystem::path& path, const std::vector<LayoutEntry>& entries);
std::vector<LayoutEntry> read_layout_file(const std::filesystem::path& path);

/// Reads a text file into lines without trailing newline characters.
std::vector<std::string> read_lines(const std::filesystem::path& path);
/// Writes each line followed by '\n'.
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

}  // namespace layoutprior
