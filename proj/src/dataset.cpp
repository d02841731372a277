#include "flexhdr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace flexhdr {

Scene ingest_scene_dir(const std::string& path) {
  if (!fs::is_directory(path)) throw DataError("scene: not a directory: " + path);

  std::vector<std::string> ldr_paths;
  for (const auto& e : fs::directory_iterator(path)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("ldr_", 0) == 0 && e.path().extension() == ".ppm")
      ldr_paths.push_back(e.path().string());
  }
  std::sort(ldr_paths.begin(), ldr_paths.end());
  if (ldr_paths.empty()) throw DataError("scene: no ldr_*.ppm frames in " + path);

  const std::string exp_path = (fs::path(path) / "exposures.txt").string();
  std::ifstream es(exp_path);
  if (!es) throw DataError("scene: missing exposures.txt in " + path);
  std::vector<float> times;
  std::string line;
  while (std::getline(es, line)) {
    std::istringstream ls(line);
    float t;
    if (ls >> t) times.push_back(t);
  }
  if (times.size() != ldr_paths.size())
    throw DataError("scene: " + std::to_string(ldr_paths.size()) + " frames but " +
                    std::to_string(times.size()) + " exposure lines in " + exp_path);

  Scene scene;
  for (size_t i = 0; i < ldr_paths.size(); ++i) {
    LdrFrame f;
    f.pixels = read_ppm(ldr_paths[i]);
    f.exposure_time = times[i];
    scene.frame_set.frames.push_back(std::move(f));
  }

  const fs::path ref_path = fs::path(path) / "reference.txt";
  if (fs::exists(ref_path)) {
    std::ifstream rs(ref_path);
    int r = -1;
    if (!(rs >> r)) throw DataError("scene: unreadable reference.txt in " + path);
    scene.frame_set.reference_index = r;
  }

  const fs::path gt_path = fs::path(path) / "gt.pfm";
  if (fs::exists(gt_path)) scene.ground_truth.radiance = read_pfm(gt_path.string());

  scene.frame_set.validate();
  if (scene.has_ground_truth()) {
    const Tensor<float>& gt = scene.ground_truth.radiance;
    const Tensor<float>& px = scene.frame_set.frames[0].pixels;
    if (gt.h() != px.h() || gt.w() != px.w())
      throw DataError("scene: gt.pfm size " + gt.shape().str() + " does not match frames in " + path);
  }
  return scene;
}

std::vector<std::string> list_scene_dirs(const std::string& path) {
  if (!fs::is_directory(path)) throw DataError("scenes: not a directory: " + path);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(path)) {
    if (!e.is_directory()) continue;
    if (fs::exists(e.path() / "exposures.txt")) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_scene_dir(const std::string& path, const Scene& scene) {
  fs::create_directories(path);
  char name[32];
  for (size_t i = 0; i < scene.frame_set.frames.size(); ++i) {
    std::snprintf(name, sizeof name, "ldr_%03zu.ppm", i);
    write_ppm((fs::path(path) / name).string(), scene.frame_set.frames[i].pixels);
  }
  std::ofstream es((fs::path(path) / "exposures.txt").string());
  for (const LdrFrame& f : scene.frame_set.frames) es << f.exposure_time << "\n";
  std::ofstream rs((fs::path(path) / "reference.txt").string());
  rs << scene.frame_set.reference_index << "\n";
  if (scene.has_ground_truth())
    write_pfm((fs::path(path) / "gt.pfm").string(), scene.ground_truth.radiance);
}

}  // namespace flexhdr
