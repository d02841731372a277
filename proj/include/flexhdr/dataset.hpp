#pragma once

#include <string>
#include <vector>

#include "flexhdr/scene.hpp"

namespace flexhdr {

// Loads a scene directory: ldr_000.ppm ... ldr_{n-1}.ppm, exposures.txt (one
// exposure time in seconds per line, same order), optional gt.pfm, optional
// reference.txt (single integer). Frames are sorted by filename.
Scene ingest_scene_dir(const std::string& path);

// Immediate subdirectories that look like scenes, sorted by name.
std::vector<std::string> list_scene_dirs(const std::string& path);

// Writes a scene in the layout above (for fixtures and synthetic exports).
void write_scene_dir(const std::string& path, const Scene& scene);

}  // namespace flexhdr
