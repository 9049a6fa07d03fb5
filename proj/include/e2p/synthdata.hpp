#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "e2p/dtf.hpp"
#include "e2p/encoding.hpp"
#include "e2p/rng.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// Procedural scene parameters. The camera is orthographic top-down, which
/// keeps depth an analytic heightfield and normals exact. Depth is measured
/// along the view axis and every rendered value stays inside depth_range.
struct SceneParams {
  int resolution = 64;
  int max_objects = 5;
  double y_min = 0.1;   // meters
  double y_max = 10.0;  // meters
  double world_extent = 8.0;  // meters covered by the image width
};

struct SceneSample {
  DenseMap rgb;     // [0,1], 3 channels, Lambert shading
  DenseMap depth;   // meters, 1 channel
  DenseMap normal;  // unit vectors, 3 channels
  DenseMap alpha;   // [0,1], 1 channel, soft silhouette
  PointPrompt prompt;
  DenseMap prompt_mask;  // rasterized prompt, [-1,1]
};

namespace scenedetail {

struct Primitive {
  bool is_sphere = true;
  double cy = 0, cx = 0;      // center, pixels
  double radius_px = 0;       // sphere radius / box half-extent
  double half_h = 0, half_w = 0;  // box half extents, pixels
  double z_ref = 0;           // sphere center depth / box face depth
  double radius_m = 0;        // sphere radius in meters
  double albedo[3] = {0.5, 0.5, 0.5};
};

/// Albedo carries the depth cue: nearer surfaces are brighter on a log
/// scale, with small per-channel jitter so the cue is informative but not
/// exact. rgb itself stays pure Lambert albedo * max(0, n . light).
inline void depth_tinted_albedo(double z, double y_min, double y_max, SeededRng& rng,
                                double out[3]) {
  double u = std::log(z / y_min) / std::log(y_max / y_min);
  double base = std::clamp(0.92 - 0.75 * u, 0.12, 0.92);
  for (int c = 0; c < 3; ++c) out[c] = base * (1.0 + 0.16 * (rng.next_unit() - 0.5));
}

/// Signed distance (pixels) to the silhouette edge, positive inside.
inline double silhouette_distance(const Primitive& p, double y, double x) {
  if (p.is_sphere) {
    double rho = std::hypot(y - p.cy, x - p.cx);
    return p.radius_px - rho;
  }
  double dy = p.half_h - std::abs(y - p.cy);
  double dx = p.half_w - std::abs(x - p.cx);
  return std::min(dy, dx);
}

}  // namespace scenedetail

/// Renders one scene: z-buffered depth, analytic normals, Lambert shading,
/// soft alpha, and a point prompt sampled from the solid foreground.
inline SceneSample generate(SeededRng rng, const SceneParams& params, int n_objects) {
  require(params.resolution >= 16, ErrorCategory::InvalidArgument, "resolution < 16");
  require(n_objects >= 1 && n_objects <= 8, ErrorCategory::InvalidArgument,
          "n_objects outside [1,8]");
  int res = params.resolution;
  double scale = params.world_extent / res;  // meters per pixel

  // directional light, camera-side
  double lx = 0.8 * (rng.next_unit() - 0.5);
  double ly = 0.8 * (rng.next_unit() - 0.5);
  double lz = std::sqrt(std::max(0.2, 1.0 - lx * lx - ly * ly));
  double ln = std::sqrt(lx * lx + ly * ly + lz * lz);
  lx /= ln;
  ly /= ln;
  lz /= ln;

  double z_plane = params.y_max * 0.98;
  double plane_albedo[3];
  scenedetail::depth_tinted_albedo(z_plane, params.y_min, params.y_max, rng, plane_albedo);

  double z_near = params.y_min * 1.1;
  double z_far_obj = z_plane * 0.5;
  std::vector<scenedetail::Primitive> prims;
  for (int i = 0; i < n_objects; ++i) {
    scenedetail::Primitive p;
    p.is_sphere = rng.next_unit() < 0.6;
    p.cy = res * (0.15 + 0.7 * rng.next_unit());
    p.cx = res * (0.15 + 0.7 * rng.next_unit());
    double z_top = z_near * std::exp(rng.next_unit() * std::log(z_far_obj / z_near));
    if (p.is_sphere) {
      p.radius_px = res * (0.10 + 0.15 * rng.next_unit());
      p.radius_m = p.radius_px * scale;
      p.z_ref = z_top + p.radius_m;  // center depth
    } else {
      p.half_h = res * (0.08 + 0.12 * rng.next_unit());
      p.half_w = res * (0.08 + 0.12 * rng.next_unit());
      p.z_ref = z_top;  // flat face depth
    }
    scenedetail::depth_tinted_albedo(z_top, params.y_min, params.y_max, rng, p.albedo);
    prims.push_back(p);
  }

  SceneSample s;
  s.rgb = DenseMap(res, res, 3, Task::RGB, {0.0, 1.0});
  s.depth = DenseMap(res, res, 1, Task::Depth, {params.y_min, params.y_max});
  s.normal = DenseMap(res, res, 3, Task::Normal, {-1.0, 1.0});
  s.alpha = DenseMap(res, res, 1, Task::Matting, {0.0, 1.0});

  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      double z = z_plane;
      double nx = 0.0, ny = 0.0, nz = 1.0;
      const double* albedo = plane_albedo;
      double alpha = 0.0;
      for (const auto& p : prims) {
        double d = scenedetail::silhouette_distance(p, y + 0.5, x + 0.5);
        alpha = std::max(alpha, std::clamp((d + 1.0) * 0.5, 0.0, 1.0));
        if (d < 0.0) continue;  // outside the solid silhouette
        double zp, pnx, pny, pnz;
        if (p.is_sphere) {
          double dy = (y + 0.5 - p.cy) * scale, dx = (x + 0.5 - p.cx) * scale;
          double rho2 = dy * dy + dx * dx;
          double root = std::sqrt(std::max(0.0, p.radius_m * p.radius_m - rho2));
          zp = p.z_ref - root;
          pnx = -dx / p.radius_m;
          pny = -dy / p.radius_m;
          pnz = root / p.radius_m;
          double nlen = std::sqrt(pnx * pnx + pny * pny + pnz * pnz);
          pnx /= nlen;
          pny /= nlen;
          pnz /= nlen;
        } else {
          zp = p.z_ref;
          pnx = 0.0;
          pny = 0.0;
          pnz = 1.0;
        }
        if (zp < z) {
          z = zp;
          nx = pnx;
          ny = pny;
          nz = pnz;
          albedo = p.albedo;
        }
      }
      double shade = std::max(0.0, nx * lx + ny * ly + nz * lz);
      s.depth.at(y, x, 0) = float(z);
      s.normal.at(y, x, 0) = float(nx);
      s.normal.at(y, x, 1) = float(ny);
      s.normal.at(y, x, 2) = float(nz);
      s.alpha.at(y, x, 0) = float(alpha);
      for (int c = 0; c < 3; ++c)
        s.rgb.at(y, x, c) = float(std::clamp(albedo[c] * shade, 0.0, 1.0));
    }

  // prompt points from the solid foreground (alpha > 0.9)
  std::vector<std::pair<int, int>> solid;
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      if (s.alpha.at(y, x, 0) > 0.9f) solid.emplace_back(y, x);
  s.prompt.sigma = 8.0 * res / 64.0;
  if (!solid.empty()) {
    int count = 1 + int(rng.next_u64() % 10);
    for (int i = 0; i < count; ++i)
      s.prompt.points.push_back(solid[size_t(rng.next_u64() % solid.size())]);
    s.prompt_mask = point_prompt_mask(s.prompt, res, res);
  } else {
    s.prompt.points.emplace_back(res / 2, res / 2);
    s.prompt_mask = point_prompt_mask(s.prompt, res, res);
  }
  return s;
}

/// Writes <root>/{train,val}/{rgb,depth,normal,alpha,prompt}/NNNNN.dtf plus
/// a manifest per split. Train and val derive from disjoint seed streams of
/// the same master generator.
inline void make_split(SeededRng master, int n_train, int n_val, const SceneParams& params,
                       const std::string& root) {
  namespace fs = std::filesystem;
  require(n_train >= 1 && n_val >= 1, ErrorCategory::InvalidArgument, "counts must be >= 1");
  if (fs::exists(root) && !fs::is_empty(root))
    fail(ErrorCategory::IoFailure, "output directory exists and is nonempty: " + root);

  auto write_split = [&](const std::string& split, int count, uint64_t stream_base) {
    fs::path base = fs::path(root) / split;
    for (const char* sub : {"rgb", "depth", "normal", "alpha", "prompt"})
      fs::create_directories(base / sub);
    std::ofstream manifest(base / "manifest.txt");
    require(bool(manifest), ErrorCategory::IoFailure, "cannot write manifest");
    for (int i = 0; i < count; ++i) {
      SeededRng scene_rng = master.split(stream_base + uint64_t(i));
      int n_objects = 1 + int(scene_rng.next_u64() % uint64_t(params.max_objects));
      SceneSample s = generate(scene_rng, params, n_objects);
      char name[32];
      std::snprintf(name, sizeof(name), "%05d.dtf", i);
      write_dtf(s.rgb, (base / "rgb" / name).string());
      write_dtf(s.depth, (base / "depth" / name).string());
      write_dtf(s.normal, (base / "normal" / name).string());
      write_dtf(s.alpha, (base / "alpha" / name).string());
      write_dtf(s.prompt_mask, (base / "prompt" / name).string());
      manifest << "rgb/" << name << " depth/" << name << " normal/" << name << " alpha/" << name
               << " prompt/" << name << "\n";
    }
  };
  write_split("train", n_train, 0x7A110000ull);
  write_split("val", n_val, 0x7A118000ull);
}

/// Loads the tuple paths listed in <dir>/manifest.txt.
struct ManifestEntry {
  std::string rgb, depth, normal, alpha, prompt;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& dir) {
  std::ifstream is(std::filesystem::path(dir) / "manifest.txt");
  require(bool(is), ErrorCategory::IoFailure, "cannot open manifest in " + dir);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    ls >> e.rgb >> e.depth >> e.normal >> e.alpha >> e.prompt;
    require(!e.prompt.empty(), ErrorCategory::Corrupt, "malformed manifest line");
    auto abs = [&](const std::string& rel) {
      return (std::filesystem::path(dir) / rel).string();
    };
    out.push_back({abs(e.rgb), abs(e.depth), abs(e.normal), abs(e.alpha), abs(e.prompt)});
  }
  return out;
}

}  // namespace e2p
