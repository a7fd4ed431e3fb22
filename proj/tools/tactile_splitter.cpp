// tactile-splitter: simulation, training, reconstruction and benchmarking for
// split-prism RGB+NIR tactile sensing, without the hardware.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "tactile/benchmark.hpp"

namespace {

using namespace tactile;

TrainConfig parse_train_config(const std::string& path) {
  TrainConfig cfg;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::string line, key;
  std::vector<std::string> vals;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_kv(line, key, vals)) continue;
    auto one = [&]() -> float {
      if (vals.size() != 1) {
        throw IoError(path + ":" + std::to_string(line_no) + ": expected a single value");
      }
      return detail::parse_float(vals[0], line_no, path);
    };
    if (key == "learning_rate") {
      cfg.learning_rate = one();
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(one());
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(one());
    } else if (key == "beta1") {
      cfg.beta1 = one();
    } else if (key == "beta2") {
      cfg.beta2 = one();
    } else if (key == "adam_eps") {
      cfg.adam_eps = one();
    } else if (key == "seed") {
      cfg.seed = static_cast<uint32_t>(one());
    } else if (key == "relu_before_tanh") {
      cfg.relu_before_tanh = one() != 0.0f;
    } else {
      throw IoError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

void collect_samples(const Dataset& ds, Modality modality,
                     std::vector<MultiModalFrame>& frames, MultiModalFrame& bg,
                     std::vector<TrainSample>& train_samples,
                     std::vector<TrainSample>& val_samples) {
  bg = apply_modality(ds.background, modality);
  frames.clear();
  frames.reserve(ds.items.size());
  for (const auto& item : ds.items) frames.push_back(apply_modality(item.frame, modality));
  for (size_t k = 0; k < ds.items.size(); ++k) {
    TrainSample s{&frames[k], &bg, &ds.items[k].gt_normals};
    if (ds.items[k].role == ItemRole::Train) train_samples.push_back(s);
    if (ds.items[k].role == ItemRole::Val) val_samples.push_back(s);
  }
}

int cmd_simulate(const std::string& scene_path, const std::string& lighting_path, uint32_t seed,
                 const std::string& out_dir, int width, int height, float pitch, bool previews) {
  SceneSet scenes = scene_path.empty() ? default_benchmark_scenes(width, height, pitch)
                                       : parse_scene_file(scene_path);
  LightingConfig lighting =
      lighting_path.empty() ? default_lighting() : parse_lighting_file(lighting_path);
  Dataset ds = generate_dataset(scenes, lighting, seed);
  save_dataset(ds, out_dir, previews);
  write_scene_file(scenes, out_dir + "/scenes.txt");
  std::printf("wrote %zu items (%dx%d, pitch %.3f mm/px) to %s\n", ds.items.size(), ds.width,
              ds.height, ds.pitch_mm, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& mode, const std::string& out_dir, int seed_override) {
  Dataset ds = load_dataset(data_dir);
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : parse_train_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<uint32_t>(seed_override);
  Modality modality = modality_from_string(mode);

  std::vector<MultiModalFrame> frames;
  MultiModalFrame bg;
  std::vector<TrainSample> train_samples, val_samples;
  collect_samples(ds, modality, frames, bg, train_samples, val_samples);
  if (train_samples.empty()) throw IoError("dataset has no items with role 'train'");

  TrainState state = train(train_samples, val_samples, cfg);
  std::filesystem::create_directories(out_dir);
  save_mlp(state.weights, cfg.relu_before_tanh, to_string(modality), out_dir);
  write_loss_csv(state.history, out_dir + "/loss.csv");
  if (!state.history.empty()) {
    const auto& first = state.history.front();
    const auto& last = state.history.back();
    std::printf("trained %d epochs (%s): val L1 %.6f -> %.6f\n", cfg.epochs, mode.c_str(),
                first.val_l1, last.val_l1);
  }
  return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& out_dir, int seed_override,
               int border_margin) {
  Dataset ds = load_dataset(data_dir);
  AblationOptions opt;
  if (seed_override >= 0) opt.train.seed = static_cast<uint32_t>(seed_override);
  opt.border_margin = border_margin;
  opt.out_dir = out_dir;
  std::filesystem::create_directories(out_dir);
  AblationReport report = run_ablation(ds, opt);
  std::string table = format_ablation_table(report);
  std::fputs(table.c_str(), stdout);
  std::printf("ablation wall time: %.1f s\n", report.runtime_seconds);
  std::ofstream table_file(out_dir + "/ablation_table.txt");
  table_file << table;
  write_ablation_csv(report, out_dir + "/ablation.csv");
  return 0;
}

int cmd_reconstruct(const std::string& frame_path, const std::string& background_path,
                    const std::string& weights_dir, const std::string& lut_dir,
                    const std::string& mode, float pitch, const std::string& out_dir) {
  if (weights_dir.empty() == lut_dir.empty()) {
    throw std::invalid_argument("exactly one of --weights or --lut is required");
  }
  MultiModalFrame frame = detail::unpack_frame(load_tensor3d(frame_path));
  MultiModalFrame background = detail::unpack_frame(load_tensor3d(background_path));

  Reconstruction rec;
  if (!weights_dir.empty()) {
    LoadedMlp loaded = load_mlp(weights_dir);
    if (!mode.empty() && mode != loaded.modality) {
      throw IoError("requested mode '" + mode + "' but the weights manifest says '" +
                    loaded.modality + "'");
    }
    Modality modality = modality_from_string(loaded.modality);
    rec = reconstruct(frame, background, loaded.weights, loaded.relu_before_tanh, modality, pitch);
  } else {
    LutTable table = load_lut(lut_dir);
    std::string table_mode = table.channels == 3 ? "rgb" : "rgb+nir";
    if (!mode.empty() && mode != table_mode) {
      throw IoError("requested mode '" + mode + "' but the LUT was built for '" + table_mode +
                    "'");
    }
    rec = reconstruct(frame, background, table, pitch);
  }

  std::filesystem::create_directories(out_dir);
  save_tensor(rec.normals.normals, out_dir + "/normals.tsr");
  save_tensor(rec.depth.depth, out_dir + "/depth.tsr");
  write_normal_preview(rec.normals, out_dir + "/normals.png");
  write_depth_preview(rec.depth, out_dir + "/depth.png");
  float peak = 0.0f;
  for (float v : rec.depth.depth.data) peak = std::max(peak, v);
  std::printf("reconstructed %dx%d depth map, peak %.4f mm\n", rec.depth.width(),
              rec.depth.height(), peak);
  return 0;
}

int cmd_align(const std::string& corr_path, double threshold, int iterations, uint32_t seed,
              const std::string& out_dir, const std::string& apply_path) {
  Correspondences corr = load_correspondences(corr_path);
  RansacResult result = ransac_homography(corr, threshold, iterations, seed);
  std::filesystem::create_directories(out_dir);
  save_homography(result.homography, out_dir + "/homography.tsr");
  std::printf("estimated homography with %d/%zu inliers (threshold %.2f px)\n",
              result.inlier_count, corr.pairs.size(), threshold);
  for (int i = 0; i < 3; ++i) {
    std::printf("  [% .6f % .6f % .6f]\n", result.homography.h(i, 0), result.homography.h(i, 1),
                result.homography.h(i, 2));
  }
  if (!apply_path.empty()) {
    MultiModalFrame frame = detail::unpack_frame(load_tensor3d(apply_path));
    // The estimate maps reference coordinates to the misaligned view;
    // warping by the inverse brings the view back into register.
    MultiModalFrame warped = warp_frame(frame, result.homography.inverse());
    save_tensor(detail::pack_frame(warped), out_dir + "/aligned_frame.tsr");
    write_png_rgb8(warped.rgb, out_dir + "/aligned_frame_rgb.png");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile reconstruction toolkit for split-prism RGB+NIR sensors"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "worker threads (processing is deterministic; 1 = default)")
      ->check(CLI::PositiveNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "render a synthetic press dataset");
  std::string sim_scene, sim_lighting, sim_out;
  uint32_t sim_seed = 42;
  int sim_width = 160, sim_height = 120;
  float sim_pitch = 0.05f;
  bool sim_no_previews = false;
  sim->add_option("--scene", sim_scene, "scene file (omit for the built-in benchmark)");
  sim->add_option("--lighting", sim_lighting, "lighting file (omit for defaults)");
  sim->add_option("--seed", sim_seed, "render seed");
  sim->add_option("--out", sim_out, "output dataset directory")->required();
  sim->add_option("--width", sim_width, "benchmark width in pixels");
  sim->add_option("--height", sim_height, "benchmark height in pixels");
  sim->add_option("--pitch", sim_pitch, "benchmark pixel pitch in mm");
  sim->add_flag("--no-previews", sim_no_previews, "skip PNG previews");

  // train
  auto* tr = app.add_subcommand("train", "train the fusion network on a dataset");
  std::string tr_data, tr_config, tr_mode = "rgb+nir", tr_out;
  int tr_seed = -1;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--config", tr_config, "key=value training config file");
  tr->add_option("--mode", tr_mode, "input modality: rgb or rgb+nir")
      ->check(CLI::IsMember({"rgb", "rgb+nir"}));
  tr->add_option("--out", tr_out, "output weights directory")->required();
  tr->add_option("--seed", tr_seed, "seed override");

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the four-way estimator comparison");
  std::string ab_data, ab_out;
  int ab_seed = -1, ab_margin = 0;
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--out", ab_out, "output report directory")->required();
  ab->add_option("--seed", ab_seed, "training seed override");
  ab->add_option("--border-margin", ab_margin, "evaluation mask inset in pixels")
      ->check(CLI::NonNegativeNumber);

  // reconstruct
  auto* rc = app.add_subcommand("reconstruct", "normal map + depth from one frame");
  std::string rc_frame, rc_bg, rc_weights, rc_lut, rc_mode, rc_out;
  float rc_pitch = 0.05f;
  rc->add_option("--frame", rc_frame, "input frame tensor (HxWx4)")->required();
  rc->add_option("--background", rc_bg, "background frame tensor (HxWx4)")->required();
  rc->add_option("--weights", rc_weights, "trained network weights directory");
  rc->add_option("--lut", rc_lut, "LUT directory");
  rc->add_option("--mode", rc_mode, "expected modality (checked against the estimator)")
      ->check(CLI::IsMember({"rgb", "rgb+nir"}));
  rc->add_option("--pitch", rc_pitch, "pixel pitch in mm");
  rc->add_option("--out", rc_out, "output directory")->required();

  // align
  auto* al = app.add_subcommand("align", "estimate a homography from correspondences");
  std::string al_corr, al_out, al_apply;
  double al_threshold = 1.0;
  int al_iterations = 1000;
  uint32_t al_seed = 0;
  al->add_option("--correspondences", al_corr, "text file of 'x y x_prime y_prime' rows")
      ->required();
  al->add_option("--threshold", al_threshold, "inlier threshold in pixels");
  al->add_option("--iterations", al_iterations, "RANSAC iterations");
  al->add_option("--seed", al_seed, "RANSAC seed");
  al->add_option("--out", al_out, "output directory")->required();
  al->add_option("--apply", al_apply, "optional frame tensor to re-align");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_scene, sim_lighting, sim_seed, sim_out, sim_width, sim_height,
                          sim_pitch, !sim_no_previews);
    }
    if (tr->parsed()) return cmd_train(tr_data, tr_config, tr_mode, tr_out, tr_seed);
    if (ab->parsed()) return cmd_ablate(ab_data, ab_out, ab_seed, ab_margin);
    if (rc->parsed()) {
      return cmd_reconstruct(rc_frame, rc_bg, rc_weights, rc_lut, rc_mode, rc_pitch, rc_out);
    }
    if (al->parsed()) {
      return cmd_align(al_corr, al_threshold, al_iterations, al_seed, al_out, al_apply);
    }
  } catch (const tactile::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
