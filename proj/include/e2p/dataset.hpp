#pragma once

#include <string>
#include <vector>

#include "e2p/synthdata.hpp"
#include "e2p/train.hpp"

namespace e2p {

/// Raw per-image tuple as stored on disk.
struct DatasetImage {
  DenseMap rgb;
  DenseMap target;  // depth / normal / alpha per task
  DenseMap prompt;  // matting conditioning mask
  std::string id;
};

inline std::vector<DatasetImage> load_images(const std::string& dir, Task task,
                                             int limit = -1) {
  auto entries = read_manifest(dir);
  std::vector<DatasetImage> out;
  for (const auto& e : entries) {
    if (limit >= 0 && int(out.size()) >= limit) break;
    DatasetImage img;
    img.rgb = read_dtf(e.rgb);
    switch (task) {
      case Task::Depth: img.target = read_dtf(e.depth); break;
      case Task::Normal: img.target = read_dtf(e.normal); break;
      case Task::Matting:
        img.target = read_dtf(e.alpha);
        img.prompt = read_dtf(e.prompt);
        break;
      default:
        fail(ErrorCategory::InvalidArgument, "unsupported dataset task");
    }
    auto slash = e.rgb.find_last_of('/');
    img.id = e.rgb.substr(slash + 1);
    if (auto dot = img.id.find('.'); dot != std::string::npos) img.id = img.id.substr(0, dot);
    out.push_back(std::move(img));
  }
  require(!out.empty(), ErrorCategory::InvalidArgument, "dataset is empty: " + dir);
  return out;
}

inline std::vector<PreparedSample> prepare_dataset(const std::vector<DatasetImage>& images,
                                                   const TrainerConfig& cfg) {
  std::vector<PreparedSample> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(prepare_sample(img.rgb, img.target, img.prompt, cfg));
  return out;
}

}  // namespace e2p
