#pragma once

// Command-line front end. Needs CLI11 on the include path.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "soilpick/contour.hpp"
#include "soilpick/control.hpp"
#include "soilpick/dataset_io.hpp"
#include "soilpick/experiment.hpp"
#include "soilpick/json_io.hpp"
#include "soilpick/planner.hpp"
#include "soilpick/scenario.hpp"
#include "soilpick/terrain.hpp"
#include "soilpick/vision.hpp"

namespace soilpick::cli {

namespace fs = std::filesystem;

/// Set by SIGINT; every running pick polls it at state boundaries.
inline std::atomic<int> g_interrupt{0};

extern "C" inline void on_sigint(int) { g_interrupt.store(static_cast<int>(InterruptSignal::User)); }

/// Failure that should end the process with status 1.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> trials;
  std::optional<int> workers;
  std::vector<double> start;
  std::vector<double> goal;
  bool retry_on_grip = false;
  std::string model;
  std::string data;
  std::string image;
  std::string report;
  std::size_t trial = 0;
  std::optional<int> count;
  std::optional<int> size;
  std::optional<double> rock_fraction;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  bool no_augment = false;
  std::vector<std::string> toggles;
};

inline std::vector<Scenario> scenarios_for(const Options& o) {
  if (o.config.empty()) return {Scenario{}};
  return load_scenarios(o.config);
}

inline Scenario single_scenario(const Options& o) {
  auto all = scenarios_for(o);
  if (all.size() != 1) throw ConfigError("this command takes a config with exactly one scenario");
  return all.front();
}

inline Vec3 vec3_of(const std::vector<double>& v) { return Vec3{v.at(0), v.at(1), v.at(2)}; }

/// Model from --model, else the scenario's model_path (relative to the config
/// file), else trained in-process from the scenario's synthetic dataset.
inline SegmenterModel segmenter_for(const Scenario& s, const Options& o) {
  if (!o.model.empty()) return model_from(read_json_file(o.model));
  if (!s.segmenter.model_path.empty()) {
    fs::path p = s.segmenter.model_path;
    if (p.is_relative() && !o.config.empty()) p = fs::path(o.config).parent_path() / p;
    return model_from(read_json_file(p));
  }
  const TrainConfig& tc = s.segmenter.train;
  return train(synthesize_split(s, derive_seed(tc.seed, 0x5e6d)), tc).model;
}

inline json cmd_gen_terrain(const Options& o) {
  Scenario s = single_scenario(o);
  if (o.rock_fraction) s.terrain.rock_fraction = *o.rock_fraction;
  const std::uint64_t seed = o.seed.value_or(s.base_seed);
  const TerrainGrid t = generate_terrain(s.terrain, seed);
  write_json_file(fs::path(o.out) / "terrain.json", to_json(t));
  const Frame f = render_frame(t, compose(s.camera.capture_pose, s.camera.hand_eye), s.camera.intrinsics(), s.render);
  write_ppm(fs::path(o.out) / "view.ppm", f.rgb);
  write_pgm(fs::path(o.out) / "truth.pgm", f.truth);
  return {{"cells", t.cell_count()},
          {"rock_fraction", t.fraction_of(MaterialClass::Rock)},
          {"min_height", t.min_height()},
          {"max_height", t.max_height()}};
}

inline json cmd_gen_dataset(const Options& o) {
  Scenario s = single_scenario(o);
  DatasetConfig dc = s.segmenter.dataset;
  if (o.count) dc.count = *o.count;
  if (o.size) dc.size = *o.size;
  const std::uint64_t seed = o.seed.value_or(s.base_seed);
  const auto imgs = synthesize_dataset(s.terrain, s.render, s.camera.hfov, dc, derive_seed(seed, 0));
  const DatasetSplit d = split_dataset(imgs, dc.ratios, derive_seed(seed, 1));
  save_dataset(o.out, d);
  return {{"train", d.train.size()}, {"validation", d.validation.size()}, {"test", d.test.size()}, {"size", dc.size}};
}

inline TrainConfig train_config_for(const Options& o) {
  TrainConfig tc = o.config.empty() ? SegmenterConfig{}.train : single_scenario(o).segmenter.train;
  if (o.seed) tc.seed = *o.seed;
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.learning_rate) tc.learning_rate = *o.learning_rate;
  if (o.no_augment) tc.augment = false;
  tc.validate();
  return tc;
}

inline json cmd_train(const Options& o) {
  const TrainConfig tc = train_config_for(o);
  const DatasetSplit d = load_dataset(o.data);
  TrainResult r;
  try {
    r = train(d, tc);
  } catch (const TrainingDiverged& e) {
    throw RuntimeFailure(e.what());
  }
  write_json_file(fs::path(o.out) / "model.json", to_json(r.model));
  write_json_file(fs::path(o.out) / "training.json", {{"config", to_json(tc)},
                                                      {"initial_loss", r.initial_loss},
                                                      {"final_loss", r.final_loss},
                                                      {"steps", r.steps},
                                                      {"augmented_samples", r.augmented_samples},
                                                      {"step_losses", r.step_losses}});
  return {{"steps", r.steps}, {"initial_loss", r.initial_loss}, {"final_loss", r.final_loss}};
}

inline json cmd_eval(const Options& o) {
  const DatasetSplit d = load_dataset(o.data);
  const LogisticSegmenter seg(model_from(read_json_file(o.model)));
  const VisionEval e = run_vision_eval(d, seg);
  write_json_file(fs::path(o.out) / "vision.json", to_json(e));
  write_vision_csv(fs::path(o.out) / "vision.csv", e);
  return {{"validation", to_json(e.validation)}, {"test", to_json(e.test)}};
}

inline json cmd_segment(const Options& o) {
  const LogisticSegmenter seg(model_from(read_json_file(o.model)));
  const Mask m = seg.segment(read_ppm(o.image));
  write_pgm(fs::path(o.out) / "mask.pgm", m);
  json regions = json::array();
  for (const auto& r : find_regions(m)) regions.push_back(to_json(r));
  write_json_file(fs::path(o.out) / "regions.json", regions);
  return {{"pickable_pixels", count_ones(m)}, {"regions", regions.size()}};
}

inline json cmd_plan(const Options& o) {
  const Scenario s = single_scenario(o);
  PlannerConfig pc = s.planner;
  if (o.seed) pc.seed = *o.seed;
  const Vec3 start = o.start.empty() ? s.camera.capture_pose.translation() : vec3_of(o.start);
  const Vec3 goal = vec3_of(o.goal);
  PlanResult r;
  try {
    r = plan_rrt_star_detailed(start, goal, s.workspace, pc);
  } catch (const PlanningError& e) {
    throw RuntimeFailure(e.what());
  }
  json curve = json::array();
  for (double c : r.cost_curve) curve.push_back(number_or_null(c));
  json out = to_json(r.path);
  out["cost_curve"] = curve;
  out["tree_size"] = r.tree.size();
  write_json_file(fs::path(o.out) / "path.json", out);
  return {{"cost", r.path.cost}, {"waypoints", r.path.waypoints.size()}, {"straight_line", (goal - start).norm()}};
}

inline PickLimits limits_for(const Scenario& s, const Options& o) {
  PickLimits l = s.limits;
  if (o.retry_on_grip) l.retry_on_grip = true;
  l.interrupt = &g_interrupt;
  return l;
}

inline json cmd_pick(const Options& o) {
  Scenario s = single_scenario(o);
  if (o.seed) s.base_seed = *o.seed;
  s.limits = limits_for(s, o);
  const LogisticSegmenter seg(segmenter_for(s, o));
  const TrialRecord t = run_trial(s, s.systems(seg), 0);
  write_json_file(fs::path(o.out) / "report.json",
                  {{"scenario", s.name}, {"base_seed", s.base_seed}, {"trial", t.index}, {"seed", t.seed},
                   {"report", to_json(t.report)}});
  return {{"scenario", s.name}, {"outcome", outcome_label(t.report)}, {"retries", t.report.retries_used}};
}

inline json cmd_experiment(const Options& o) {
  auto scenarios = scenarios_for(o);
  std::map<std::string, SegmenterModel> models;  // keyed by segmenter config
  json reports = json::array();
  json summary = json::array();
  for (auto& s : scenarios) {
    if (o.seed) s.base_seed = *o.seed;
    if (o.trials) s.n_trials = *o.trials;
    if (o.workers) s.workers = *o.workers;
    if (s.n_trials < 1) throw ConfigError("--trials must be >= 1");
    s.limits = limits_for(s, o);
    const std::string key = to_json(s.segmenter).dump();
    if (!models.contains(key)) models.emplace(key, segmenter_for(s, o));
    const LogisticSegmenter seg(models.at(key));
    const ExperimentReport rep = run_experiment(s, seg);
    write_counts_csv(fs::path(o.out) / ("counts_" + s.name + ".csv"), rep);
    reports.push_back(to_json(rep));
    json counts = json::object();
    for (const auto& [k, v] : rep.counts) counts[k] = v;
    summary.push_back({{"scenario", s.name},
                       {"n_trials", rep.n_trials()},
                       {"counts", counts},
                       {"wilson", {{"center", rep.success_interval.center},
                                   {"half_width", rep.success_interval.half_width}}}});
  }
  write_json_file(fs::path(o.out) / "report.json", {{"experiments", reports}});
  return {{"experiments", summary}};
}

/// Toggle syntax: name:key=value[,key=value...]
inline TrainConfigDelta parse_toggle(const std::string& text) {
  TrainConfigDelta d;
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0) throw CLI::ValidationError("--toggle", "expected name:key=value,...");
  d.name = text.substr(0, colon);
  std::stringstream ss(text.substr(colon + 1));
  std::string kv;
  while (std::getline(ss, kv, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--toggle", "bad entry '" + kv + "'");
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    try {
      if (k == "epochs") d.epochs = std::stoi(v);
      else if (k == "batch_size") d.batch_size = std::stoi(v);
      else if (k == "learning_rate") d.learning_rate = std::stod(v);
      else if (k == "pixels_per_image") d.pixels_per_image = std::stoi(v);
      else if (k == "seed") d.seed = std::stoull(v);
      else if (k == "augment") {
        if (v != "on" && v != "off" && v != "true" && v != "false") throw std::invalid_argument(v);
        d.augment = v == "on" || v == "true";
      } else {
        throw CLI::ValidationError("--toggle", "unknown key '" + k + "'");
      }
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--toggle", "bad value in '" + kv + "'");
    }
  }
  return d;
}

inline json cmd_ablate(const Options& o) {
  const TrainConfig tc = train_config_for(o);
  std::vector<TrainConfigDelta> toggles;
  for (const auto& t : o.toggles) toggles.push_back(parse_toggle(t));
  if (o.toggles.empty()) toggles.push_back(parse_toggle("no_augmentation:augment=off"));
  const DatasetSplit d = load_dataset(o.data);
  const auto rows = run_ablation(d, tc, toggles);
  write_json_file(fs::path(o.out) / "ablation.json", to_json(rows));
  write_ablation_csv(fs::path(o.out) / "ablation.csv", rows);
  json summary = json::array();
  for (const auto& r : rows) {
    json row = {{"name", r.name}};
    if (r.eval) row["validation_accuracy_delta"] = r.validation_delta.accuracy;
    else row["error"] = r.error;
    summary.push_back(row);
  }
  return {{"rows", summary}};
}

/// Rebuilds the trial's world and re-renders every captured frame, applying
/// the recorded excavations in order.
inline json cmd_replay(const Options& o) {
  const json doc = read_json_file(o.report);
  std::uint64_t seed = 0;
  json report;
  std::string name;
  if (doc.contains("experiments")) {
    bool found = false;
    for (const auto& e : doc["experiments"]) {
      if (!found && o.trial < e.at("trials").size()) {
        const auto& t = e["trials"][o.trial];
        seed = t.at("seed").get<std::uint64_t>();
        report = t.at("report");
        name = e.at("scenario").get<std::string>();
        found = true;
      }
    }
    if (!found) throw RuntimeFailure("trial index out of range");
  } else {
    seed = doc.at("seed").get<std::uint64_t>();
    report = doc.at("report");
    name = doc.at("scenario").get<std::string>();
  }
  Scenario s;
  for (const auto& c : scenarios_for(o))
    if (c.name == name || o.config.empty()) s = c;
  TerrainGrid world = generate_terrain(s.terrain, derive_seed(seed, 0));
  const auto& digs = report.at("excavations");
  std::size_t applied = 0;
  std::size_t frames = 0;
  for (const auto& c : report.at("captures")) {
    const auto before = c.at("excavations_before").get<std::size_t>();
    for (; applied < before && applied < digs.size(); ++applied) {
      const auto& e = digs[applied];
      excavate(world, e.at("x").get<double>(), e.at("y").get<double>(), e.at("radius").get<double>(),
               e.at("depth").get<double>());
    }
    const Frame f = render_frame(world, pose_from(c.at("camera")), s.camera.intrinsics(), s.render);
    const std::string stem = "capture_" + detail::image_stem(frames++);
    write_ppm(fs::path(o.out) / (stem + ".ppm"), f.rgb);
    write_pgm(fs::path(o.out) / (stem + "_truth.pgm"), f.truth);
  }
  return {{"scenario", name}, {"frames", frames}, {"outcome", report.at("outcome")}};
}

/// Parses argv, runs one subcommand and prints a single JSON summary line.
/// Returns 0 on success, 1 on runtime failure, 2 on usage error.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"soilpick: terrain sampling pick pipeline simulator"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&o](CLI::App* c, bool config = true) {
    if (config) c->add_option("--config", o.config, "Scenario JSON file")->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "Seed for all randomness");
    c->add_option("--out", o.out, "Output directory");
  };

  auto* gen_terrain = app.add_subcommand("gen-terrain", "Generate a terrain grid and a capture view");
  add_common(gen_terrain);
  gen_terrain->add_option("--rock-fraction", o.rock_fraction)->check(CLI::Range(0.0, 1.0));

  auto* gen_dataset = app.add_subcommand("gen-dataset", "Synthesize a labelled image dataset");
  add_common(gen_dataset);
  gen_dataset->add_option("--count", o.count)->check(CLI::PositiveNumber);
  gen_dataset->add_option("--size", o.size)->check(CLI::PositiveNumber);

  auto* train_cmd = app.add_subcommand("train", "Train the pixel segmenter");
  add_common(train_cmd);
  train_cmd->add_option("--data", o.data)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", o.learning_rate)->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--no-augment", o.no_augment);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--data", o.data)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--model", o.model)->required()->check(CLI::ExistingFile);

  auto* segment_cmd = app.add_subcommand("segment", "Segment one PPM image");
  add_common(segment_cmd, false);
  segment_cmd->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  segment_cmd->add_option("--image", o.image)->required()->check(CLI::ExistingFile);

  auto* plan_cmd = app.add_subcommand("plan", "Plan an RRT* path");
  add_common(plan_cmd);
  plan_cmd->add_option("--start", o.start, "x,y,z")->delimiter(',')->expected(3);
  plan_cmd->add_option("--goal", o.goal, "x,y,z")->delimiter(',')->expected(3)->required();

  auto* pick_cmd = app.add_subcommand("pick", "Run one pick");
  add_common(pick_cmd);
  pick_cmd->add_option("--model", o.model)->check(CLI::ExistingFile);
  pick_cmd->add_flag("--retry-on-grip", o.retry_on_grip);

  auto* exp_cmd = app.add_subcommand("experiment", "Run a multi-trial experiment");
  add_common(exp_cmd);
  exp_cmd->add_option("--model", o.model)->check(CLI::ExistingFile);
  exp_cmd->add_option("--trials", o.trials)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
  exp_cmd->add_flag("--retry-on-grip", o.retry_on_grip);

  auto* ablate_cmd = app.add_subcommand("ablate", "Training ablation");
  add_common(ablate_cmd);
  ablate_cmd->add_option("--data", o.data)->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--lr", o.learning_rate)->check(CLI::NonNegativeNumber);
  ablate_cmd->add_option("--toggle", o.toggles, "name:key=value,... (default no_augmentation:augment=off)");

  auto* replay_cmd = app.add_subcommand("replay", "Re-render the captures of a recorded pick");
  add_common(replay_cmd);
  replay_cmd->add_option("--report", o.report)->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--trial", o.trial);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    if (name == "ablate")
      for (const auto& t : o.toggles) parse_toggle(t);
  } catch (const CLI::ValidationError& e) {
    err << e.what() << '\n';
    return 2;
  }

  g_interrupt.store(0);
  const auto previous = std::signal(SIGINT, on_sigint);
  int status = 0;
  try {
    fs::create_directories(o.out);
    json summary;
    if (name == "gen-terrain") summary = cmd_gen_terrain(o);
    else if (name == "gen-dataset") summary = cmd_gen_dataset(o);
    else if (name == "train") summary = cmd_train(o);
    else if (name == "eval") summary = cmd_eval(o);
    else if (name == "segment") summary = cmd_segment(o);
    else if (name == "plan") summary = cmd_plan(o);
    else if (name == "pick") summary = cmd_pick(o);
    else if (name == "experiment") summary = cmd_experiment(o);
    else if (name == "ablate") summary = cmd_ablate(o);
    else summary = cmd_replay(o);
    json line = {{"command", name}, {"status", "ok"}, {"out", o.out}};
    line.update(summary);
    out << line.dump() << '\n';
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    out << json{{"command", name}, {"status", "error"}, {"error", e.what()}}.dump() << '\n';
    status = 1;
  }
  std::signal(SIGINT, previous);
  return status;
}

}  // namespace soilpick::cli
