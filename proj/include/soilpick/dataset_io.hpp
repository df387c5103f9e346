#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "soilpick/experiment.hpp"
#include "soilpick/image.hpp"
#include "soilpick/json_io.hpp"
#include "soilpick/vision.hpp"

namespace soilpick {

namespace detail {

inline std::string image_stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

inline constexpr std::array<const char*, 3> kSplitNames{"train", "validation", "test"};

inline std::vector<LabeledImage>& split_part(DatasetSplit& d, std::size_t k) {
  return k == 0 ? d.train : (k == 1 ? d.validation : d.test);
}

inline const std::vector<LabeledImage>& split_part(const DatasetSplit& d, std::size_t k) {
  return k == 0 ? d.train : (k == 1 ? d.validation : d.test);
}

}  // namespace detail

/// Writes `<dir>/<split>/NNNN.ppm` (RGB) and `NNNN.pgm` (mask) plus
/// `<dir>/manifest.json`.
inline void save_dataset(const std::filesystem::path& dir, const DatasetSplit& data) {
  json manifest = {{"format", "soilpick-dataset/1"}, {"splits", json::object()}};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto sub = dir / detail::kSplitNames[k];
    std::filesystem::create_directories(sub);
    json names = json::array();
    const auto& imgs = detail::split_part(data, k);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      const std::string stem = detail::image_stem(i);
      write_ppm(sub / (stem + ".ppm"), imgs[i].rgb);
      write_pgm(sub / (stem + ".pgm"), imgs[i].mask);
      names.push_back(stem);
    }
    manifest["splits"][detail::kSplitNames[k]] = names;
  }
  write_json_file(dir / "manifest.json", manifest);
}

inline DatasetSplit load_dataset(const std::filesystem::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  DatasetSplit d;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto sub = dir / detail::kSplitNames[k];
    for (const auto& name : manifest.at("splits").at(detail::kSplitNames[k])) {
      const auto stem = name.get<std::string>();
      LabeledImage img{read_ppm(sub / (stem + ".ppm")), read_pgm(sub / (stem + ".pgm"))};
      img.validate();
      detail::split_part(d, k).push_back(std::move(img));
    }
  }
  return d;
}

// --- CSV tables ------------------------------------------------------------

/// Counts table with the outcome categories used in the pie charts, followed
/// by the remaining causes.
inline void write_counts_csv(const std::filesystem::path& p, const ExperimentReport& e) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  const auto n = static_cast<double>(e.n_trials());
  const auto row = [&](const char* label, std::size_t c) {
    out << label << ',' << c << ',' << json(100.0 * static_cast<double>(c) / n).dump() << '\n';
  };
  out << "category,count,percent\n";
  row("Success", e.count("Success"));
  row("Thread/Deadlock", e.count("Deadlock"));
  row("Grip", e.count("GripFail"));
  row("Dive", e.count("DiveFail"));
  row("NoTargets", e.count("NoTargets"));
  row("Unreachable", e.count("Unreachable"));
  row("Interrupted", e.count("Interrupted(MaxTime)") + e.count("Interrupted(User)") +
                         e.count("Interrupted(LowBattery)"));
}

inline void write_metrics_row(std::ostream& out, const std::string& label, const Metrics& m) {
  out << label << ',' << json(m.accuracy).dump() << ',' << json(m.precision).dump() << ','
      << json(m.iou).dump() << ',' << json(m.recall).dump() << '\n';
}

/// Validation and test rows: accuracy, precision, IoU, recall.
inline void write_vision_csv(const std::filesystem::path& p, const VisionEval& e) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << "split,accuracy,precision,iou,recall\n";
  write_metrics_row(out, "Validation", e.validation);
  write_metrics_row(out, "Test", e.test);
}

/// Absolute rows per configuration, then signed delta rows against the base.
inline void write_ablation_csv(const std::filesystem::path& p, const std::vector<AblationRow>& rows) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << "config,split,accuracy,precision,iou,recall\n";
  for (const auto& r : rows) {
    if (!r.eval) {
      out << r.name << ",error,,,,\n";
      continue;
    }
    write_metrics_row(out, r.name + ",Validation", r.eval->validation);
    write_metrics_row(out, r.name + ",Test", r.eval->test);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!rows[i].eval) continue;
    write_metrics_row(out, "delta:" + rows[i].name + ",Validation", rows[i].validation_delta);
    write_metrics_row(out, "delta:" + rows[i].name + ",Test", rows[i].test_delta);
  }
}

}  // namespace soilpick
