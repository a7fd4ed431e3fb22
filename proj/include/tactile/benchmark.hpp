#pragma once

// The reproduction harness: the default synthetic benchmark (five sphere
// presses plus four held-out test objects), its on-disk layout, and the
// four-way estimator ablation with report formatting.

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tactile/align.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/metrics.hpp"
#include "tactile/pipeline.hpp"
#include "tactile/png_io.hpp"
#include "tactile/scene_io.hpp"

namespace tactile {

enum class ItemRole { Train, Val, Test };

inline const char* to_string(ItemRole r) {
  switch (r) {
    case ItemRole::Train: return "train";
    case ItemRole::Val: return "val";
    default: return "test";
  }
}

inline ItemRole role_from_string(const std::string& s) {
  if (s == "train") return ItemRole::Train;
  if (s == "val") return ItemRole::Val;
  if (s == "test") return ItemRole::Test;
  throw std::invalid_argument("unknown item role '" + s + "'");
}

struct DatasetItem {
  std::string name;
  ItemRole role = ItemRole::Train;
  MultiModalFrame frame;
  NormalMap gt_normals;  // encoded01
  DepthMap gt_depth;
};

struct Dataset {
  int width = 0;
  int height = 0;
  float pitch_mm = 0.0f;
  uint32_t seed = 0;
  MultiModalFrame background;
  std::vector<DatasetItem> items;
};

/// Five sphere presses of varied radius/offset (4 train + 1 val) plus the
/// four held-out test objects: a shallow cap dome, a threaded screw shaft,
/// a hair-thin fiber and a fingerprint-like ridge grating.
inline SceneSet default_benchmark_scenes(int width = 160, int height = 120,
                                         float pitch_mm = 0.05f) {
  auto scene = [&](std::vector<PressPrimitive> prims) {
    return PressScene{width, height, pitch_mm, std::move(prims)};
  };
  float sx = static_cast<float>(width) / 160.0f;
  float sy = static_cast<float>(height) / 120.0f;
  SceneSet set;
  // Press depths are chosen so the contact rims reach 30..55 degree slopes;
  // that is where the side lights start self-shadowing and the coaxial NIR
  // channel carries information the RGB channels lost.
  set.items = {
      {"sphere0", "train", scene({SpherePress{3.0f, 0.70f, 80.0f * sx, 60.0f * sy}})},
      {"sphere1", "train", scene({SpherePress{2.5f, 0.85f, 64.0f * sx, 50.0f * sy}})},
      {"sphere2", "train", scene({SpherePress{4.0f, 0.55f, 96.0f * sx, 70.0f * sy}})},
      {"sphere3", "train", scene({SpherePress{2.2f, 0.95f, 86.0f * sx, 46.0f * sy}})},
      {"sphere4", "val", scene({SpherePress{3.2f, 0.75f, 74.0f * sx, 66.0f * sy}})},
      {"cap", "test", scene({SpherePress{12.0f, 0.35f, 80.0f * sx, 60.0f * sy}})},
      {"screw", "test",
       scene({ThreadedCylinder{2.0f, 0.8f, 0.35f, 40.0f * sx, 60.0f * sy, 120.0f * sx,
                               60.0f * sy}})},
      {"hair", "test",
       scene({CylinderPress{0.05f, 0.04f, 35.0f * sx, 35.0f * sy, 125.0f * sx, 85.0f * sy}})},
      {"grating", "test",
       scene({RidgeGrating{0.5f, 0.08f, 0.35f, 80.0f * sx, 60.0f * sy, 55.0f * sx, 40.0f * sy}})},
  };
  return set;
}

/// Renders every scene with a per-item seed derived from the dataset seed.
inline Dataset generate_dataset(const SceneSet& scenes, const LightingConfig& lighting,
                                uint32_t seed) {
  detail::require(!scenes.items.empty(), "generate_dataset: empty scene set");
  const PressScene& first = scenes.items.front().scene;
  Dataset ds;
  ds.width = first.width;
  ds.height = first.height;
  ds.pitch_mm = first.pitch_mm;
  ds.seed = seed;
  ds.background = background_frame(lighting, first.height, first.width);
  uint32_t item_seed = seed;
  for (const auto& item : scenes.items) {
    detail::require(item.scene.width == ds.width && item.scene.height == ds.height &&
                        item.scene.pitch_mm == ds.pitch_mm,
                    "generate_dataset: items must share resolution and pitch");
    DatasetItem out;
    out.name = item.name;
    out.role = role_from_string(item.role);
    out.gt_depth = depth_from_scene(item.scene);
    NormalMap unit = normals_from_depth(out.gt_depth);
    out.gt_normals = encode_normals(unit);
    out.frame = render_frame(unit, lighting, ++item_seed);
    ds.items.push_back(std::move(out));
  }
  return ds;
}

// --- On-disk layout ----------------------------------------------------------
//
//   <dir>/dataset.txt             resolution, pitch, seed, item list
//   <dir>/background.tsr          shared undeformed-gel frame (HxWx4)
//   <dir>/items/<name>/frame.tsr  (HxWx4), gt_normals.tsr (HxWx3, encoded01),
//                                 gt_depth.tsr (HxW) + PNG previews

namespace detail {

inline Tensor3D pack_frame(const MultiModalFrame& f) {
  Tensor3D t(f.height(), f.width(), 4);
  for (int i = 0; i < f.height(); ++i) {
    for (int j = 0; j < f.width(); ++j) {
      for (int c = 0; c < 4; ++c) t.at(i, j, c) = f.channel(i, j, c);
    }
  }
  return t;
}

inline MultiModalFrame unpack_frame(const Tensor3D& t) {
  require(t.channels == 4, "frame tensor must have 4 channels (R,G,B,NIR)");
  Tensor3D rgb(t.height, t.width, 3);
  Tensor3D nir(t.height, t.width, 1);
  for (int i = 0; i < t.height; ++i) {
    for (int j = 0; j < t.width; ++j) {
      for (int c = 0; c < 3; ++c) rgb.at(i, j, c) = t.at(i, j, c);
      nir.at(i, j, 0) = t.at(i, j, 3);
    }
  }
  return MultiModalFrame(std::move(rgb), std::move(nir));
}

inline Tensor2D nir_plane(const MultiModalFrame& f) {
  Tensor2D t(f.height(), f.width());
  for (int i = 0; i < f.height(); ++i) {
    for (int j = 0; j < f.width(); ++j) t.at(i, j) = f.nir.at(i, j, 0);
  }
  return t;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::string& dir, bool previews = true) {
  namespace fs = std::filesystem;
  fs::create_directories(dir + "/items");
  save_tensor(detail::pack_frame(ds.background), dir + "/background.tsr");
  std::ofstream manifest(dir + "/dataset.txt");
  if (!manifest) throw IoError("save_dataset: cannot open manifest in '" + dir + "'");
  manifest << "resolution = " << ds.width << " " << ds.height << "\n";
  manifest << "pitch = " << ds.pitch_mm << "\n";
  manifest << "seed = " << ds.seed << "\n";
  for (const auto& item : ds.items) {
    manifest << "item = " << item.name << " " << to_string(item.role) << "\n";
    std::string d = dir + "/items/" + item.name;
    fs::create_directories(d);
    save_tensor(detail::pack_frame(item.frame), d + "/frame.tsr");
    save_tensor(item.gt_normals.normals, d + "/gt_normals.tsr");
    save_tensor(item.gt_depth.depth, d + "/gt_depth.tsr");
    if (previews) {
      write_png_rgb8(item.frame.rgb, d + "/frame_rgb.png");
      write_png_gray8(detail::nir_plane(item.frame), d + "/frame_nir.png");
      write_normal_preview(item.gt_normals, d + "/gt_normals.png");
      write_depth_preview(item.gt_depth, d + "/gt_depth.png");
    }
  }
  if (previews) {
    write_png_rgb8(ds.background.rgb, dir + "/background_rgb.png");
    write_png_gray8(detail::nir_plane(ds.background), dir + "/background_nir.png");
  }
}

inline Dataset load_dataset(const std::string& dir) {
  std::ifstream manifest(dir + "/dataset.txt");
  if (!manifest) throw IoError("load_dataset: cannot open '" + dir + "/dataset.txt'");
  Dataset ds;
  std::string line;
  std::vector<std::pair<std::string, ItemRole>> entries;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    std::string key;
    std::vector<std::string> vals;
    if (!detail::split_kv(line, key, vals)) continue;
    if (key == "resolution" && vals.size() == 2) {
      ds.width = std::stoi(vals[0]);
      ds.height = std::stoi(vals[1]);
    } else if (key == "pitch" && vals.size() == 1) {
      ds.pitch_mm = std::stof(vals[0]);
    } else if (key == "seed" && vals.size() == 1) {
      ds.seed = static_cast<uint32_t>(std::stoul(vals[0]));
    } else if (key == "item" && vals.size() == 2) {
      entries.emplace_back(vals[0], role_from_string(vals[1]));
    } else {
      throw IoError(dir + "/dataset.txt:" + std::to_string(line_no) + ": malformed line");
    }
  }
  if (ds.width <= 0 || ds.height <= 0 || !(ds.pitch_mm > 0.0f) || entries.empty()) {
    throw IoError("load_dataset: incomplete manifest in '" + dir + "'");
  }
  ds.background = detail::unpack_frame(load_tensor3d(dir + "/background.tsr"));
  for (const auto& [name, role] : entries) {
    std::string d = dir + "/items/" + name;
    DatasetItem item;
    item.name = name;
    item.role = role;
    item.frame = detail::unpack_frame(load_tensor3d(d + "/frame.tsr"));
    item.gt_normals = NormalMap(load_tensor3d(d + "/gt_normals.tsr"), NormalEncoding::Encoded01);
    item.gt_depth = DepthMap(load_tensor2d(d + "/gt_depth.tsr"), ds.pitch_mm);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

// --- Misalignment utilities (stand-in for assembly error between cameras) ---

/// Applies `h` to the NIR plane of every frame and the background, leaving the
/// RGB planes (the reference camera) untouched.
inline Dataset misalign_nir(const Dataset& ds, const Homography& h) {
  Dataset out = ds;
  out.background = MultiModalFrame(ds.background.rgb, warp_image(ds.background.nir, h));
  for (size_t k = 0; k < ds.items.size(); ++k) {
    out.items[k].frame =
        MultiModalFrame(ds.items[k].frame.rgb, warp_image(ds.items[k].frame.nir, h));
  }
  return out;
}

/// Undoes an estimated NIR misalignment by warping the NIR plane back.
inline Dataset realign_nir(const Dataset& ds, const Homography& estimated) {
  return misalign_nir(ds, estimated.inverse());
}

/// Checkerboard-corner correspondences between the RGB view and a NIR view
/// displaced by `h`, with optional detection noise and spurious matches.
inline Correspondences checkerboard_correspondences(int width, int height, int nx, int ny,
                                                    const Homography& h, double noise_px,
                                                    double outlier_fraction, uint32_t seed) {
  detail::require(nx >= 2 && ny >= 2, "checkerboard_correspondences: need at least a 2x2 grid");
  std::mt19937 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 8) * (1.0 / 16777216.0));
  };
  detail::GaussianNoise gauss(seed * 7919u + 13u);
  Correspondences c;
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      double x = (gx + 1) * static_cast<double>(width) / (nx + 1);
      double y = (gy + 1) * static_cast<double>(height) / (ny + 1);
      auto [xp, yp] = h.apply(x, y);
      PointPair p{x, y, xp, yp};
      if (uniform(0.0, 1.0) < outlier_fraction) {
        p.xp = uniform(0.0, width - 1.0);
        p.yp = uniform(0.0, height - 1.0);
      } else if (noise_px > 0.0) {
        p.xp += noise_px * gauss.next();
        p.yp += noise_px * gauss.next();
      }
      c.pairs.push_back(p);
    }
  }
  return c;
}

// --- Four-way ablation -------------------------------------------------------

struct AblationOptions {
  TrainConfig train;       // seed doubles as the LUT/benchmark condition seed
  int lut_bins = 32;
  int border_margin = 0;   // evaluation mask inset, for warped datasets
  std::string out_dir;     // when set, writes previews + weights + tables
};

struct AblationReport {
  // Condition order matches the published table layout.
  std::array<ConditionResult, 4> conditions;
  std::vector<EpochRecord> history_rgb;
  std::vector<EpochRecord> history_rgbnir;
  MlpWeights weights_rgb;
  MlpWeights weights_rgbnir;
  double runtime_seconds = 0.0;
};

/// Published hardware results for the same four conditions, printed as a
/// reference row so synthetic runs are never mistaken for them.
inline constexpr std::array<double, 4> kReferenceMaeDeg = {9.292, 8.731, 6.057, 5.682};
inline constexpr std::array<const char*, 4> kConditionLabels = {
    "LUT w/o NIR", "LUT w. NIR", "PFSNN w/o NIR", "PFSNN w. NIR"};

namespace detail {

inline ConditionResult evaluate_condition(
    const Dataset& ds, const std::string& label, Modality modality,
    const std::function<NormalMap(const MultiModalFrame&, const MultiModalFrame&)>& estimate,
    int border_margin, const std::string& out_dir) {
  ConditionResult result;
  result.label = label;
  MultiModalFrame bg = apply_modality(ds.background, modality);
  Tensor2D interior = interior_mask(ds.height, ds.width, border_margin);
  std::vector<double> maes, maes_contact, rmses;
  for (const auto& item : ds.items) {
    if (item.role == ItemRole::Train) continue;
    MultiModalFrame frame = apply_modality(item.frame, modality);
    NormalMap estimate_enc = estimate(frame, bg);
    Reconstruction rec = depth_from_estimate(estimate_enc, ds.pitch_mm, 0.05f, true);
    Tensor2D contact = intersect_masks(contact_mask(item.gt_depth), interior);
    ItemResult ir;
    ir.item = item.name;
    ir.mae_deg = angular_mae(estimate_enc, item.gt_normals, &interior);
    ir.mae_contact_deg = angular_mae(estimate_enc, item.gt_normals, &contact);
    ir.depth_rmse_mm = depth_rmse(rec.depth, item.gt_depth, &interior);
    maes.push_back(ir.mae_deg);
    maes_contact.push_back(ir.mae_contact_deg);
    rmses.push_back(ir.depth_rmse_mm);
    result.items.push_back(ir);
    if (!out_dir.empty()) {
      std::string slug = label;
      for (char& ch : slug) {
        if (ch == ' ' || ch == '/' || ch == '.') ch = '_';
      }
      std::string d = out_dir + "/previews/" + slug;
      std::filesystem::create_directories(d);
      write_normal_preview(estimate_enc, d + "/" + item.name + "_normals.png");
      write_depth_preview(rec.depth, d + "/" + item.name + "_depth.png");
      save_tensor(rec.depth.depth, d + "/" + item.name + "_depth.tsr");
    }
  }
  result.mae_deg = pairwise_mean(maes);
  result.mae_contact_deg = pairwise_mean(maes_contact);
  result.depth_rmse_mm = pairwise_mean(rmses);
  return result;
}

}  // namespace detail

/// Builds both LUT variants, trains both network modalities with the same
/// seed, and evaluates all four estimators on the held-out items.
inline AblationReport run_ablation(const Dataset& ds, const AblationOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  detail::require(!ds.items.empty(), "run_ablation: empty dataset");

  std::vector<const DatasetItem*> train_items;
  for (const auto& item : ds.items) {
    if (item.role == ItemRole::Train) train_items.push_back(&item);
  }
  detail::require(!train_items.empty(), "run_ablation: dataset has no training items");

  AblationReport report;

  // LUT conditions. Tables are built from decoded ground-truth normals of the
  // training presses, per modality.
  std::vector<NormalMap> gt_unit;
  gt_unit.reserve(train_items.size());
  for (const auto* item : train_items) gt_unit.push_back(decode_normals(item->gt_normals));

  for (int cond = 0; cond < 2; ++cond) {
    Modality modality = cond == 0 ? Modality::Rgb : Modality::RgbNir;
    MultiModalFrame bg = apply_modality(ds.background, modality);
    std::vector<MultiModalFrame> frames;
    frames.reserve(train_items.size());
    for (const auto* item : train_items) frames.push_back(apply_modality(item->frame, modality));
    std::vector<LutSample> samples;
    for (size_t k = 0; k < train_items.size(); ++k) {
      samples.push_back({&frames[k], &bg, &gt_unit[k]});
    }
    LutTable table = build_lut(samples, modality == Modality::Rgb ? 3 : 4, opt.lut_bins);
    if (!opt.out_dir.empty()) {
      save_lut(table, opt.out_dir + (cond == 0 ? "/lut_rgb" : "/lut_rgbnir"));
    }
    report.conditions[cond] = detail::evaluate_condition(
        ds, kConditionLabels[cond], modality,
        [&table](const MultiModalFrame& f, const MultiModalFrame& b) {
          return lut_lookup(table, f, b);
        },
        opt.border_margin, opt.out_dir);
  }

  // Network conditions, trained from scratch per modality with the same seed.
  for (int cond = 2; cond < 4; ++cond) {
    Modality modality = cond == 2 ? Modality::Rgb : Modality::RgbNir;
    MultiModalFrame bg = apply_modality(ds.background, modality);
    std::vector<MultiModalFrame> frames;
    frames.reserve(ds.items.size());
    std::vector<TrainSample> train_samples, val_samples;
    for (const auto& item : ds.items) frames.push_back(apply_modality(item.frame, modality));
    for (size_t k = 0; k < ds.items.size(); ++k) {
      TrainSample s{&frames[k], &bg, &ds.items[k].gt_normals};
      if (ds.items[k].role == ItemRole::Train) train_samples.push_back(s);
      if (ds.items[k].role == ItemRole::Val) val_samples.push_back(s);
    }
    TrainState state = train(train_samples, val_samples, opt.train);
    (cond == 2 ? report.history_rgb : report.history_rgbnir) = state.history;
    (cond == 2 ? report.weights_rgb : report.weights_rgbnir) = state.weights;
    if (!opt.out_dir.empty()) {
      std::string d = opt.out_dir + (cond == 2 ? "/pfsnn_rgb" : "/pfsnn_rgbnir");
      save_mlp(state.weights, opt.train.relu_before_tanh, to_string(modality), d);
      write_loss_csv(state.history, d + "/loss.csv");
    }
    const MlpWeights& w = state.weights;
    bool relu_flag = opt.train.relu_before_tanh;
    report.conditions[cond] = detail::evaluate_condition(
        ds, kConditionLabels[cond], modality,
        [&w, relu_flag](const MultiModalFrame& f, const MultiModalFrame& b) {
          return forward(w, f, b, relu_flag);
        },
        opt.border_margin, opt.out_dir);
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// Aligned four-column text table with the published reference row footer.
inline std::string format_ablation_table(const AblationReport& report) {
  std::ostringstream out;
  char buf[256];
  out << "condition            ";
  for (const auto& c : report.conditions) {
    std::snprintf(buf, sizeof(buf), " | %13s", c.label.c_str());
    out << buf;
  }
  out << "\n";
  out << "MAE(deg), full image ";
  for (const auto& c : report.conditions) {
    std::snprintf(buf, sizeof(buf), " | %13.3f", c.mae_deg);
    out << buf;
  }
  out << "\n";
  out << "MAE(deg), contact    ";
  for (const auto& c : report.conditions) {
    std::snprintf(buf, sizeof(buf), " | %13.3f", c.mae_contact_deg);
    out << buf;
  }
  out << "\n";
  out << "depth RMSE (mm)      ";
  for (const auto& c : report.conditions) {
    std::snprintf(buf, sizeof(buf), " | %13.4f", c.depth_rmse_mm);
    out << buf;
  }
  out << "\n";
  out << "---\n";
  out << "reference MAE(deg), physical RGB+NIR sensor (published; not reproduced here):\n";
  out << "                     ";
  for (double v : kReferenceMaeDeg) {
    std::snprintf(buf, sizeof(buf), " | %13.3f", v);
    out << buf;
  }
  out << "\n";
  return out.str();
}

inline void write_ablation_csv(const AblationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_ablation_csv: cannot open '" + path + "'");
  out << "condition,item,mae_deg,mae_contact_deg,depth_rmse_mm\n";
  char buf[256];
  for (const auto& c : report.conditions) {
    for (const auto& item : c.items) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f\n", c.label.c_str(),
                    item.item.c_str(), item.mae_deg, item.mae_contact_deg, item.depth_rmse_mm);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,mean,%.6f,%.6f,%.6f\n", c.label.c_str(), c.mae_deg,
                  c.mae_contact_deg, c.depth_rmse_mm);
    out << buf;
  }
  for (size_t k = 0; k < report.conditions.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "reference (published),%s,%.3f,,\n",
                  kConditionLabels[k], kReferenceMaeDeg[k]);
    out << buf;
  }
}

}  // namespace tactile
