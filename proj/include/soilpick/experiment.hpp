#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "soilpick/control.hpp"
#include "soilpick/scenario.hpp"
#include "soilpick/vision.hpp"

namespace soilpick {

struct WilsonInterval {
  double center = 0.0;
  double half_width = 0.0;
  double lower() const noexcept { return center - half_width; }
  double upper() const noexcept { return center + half_width; }
};

/// Two-sided standard normal quantile for a confidence level in (0, 1).
inline double normal_quantile_two_sided(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + confidence / 2.0);
}

/// Wilson score interval for a binomial proportion.
inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t n, double confidence = 0.95) {
  if (n == 0) throw std::invalid_argument("wilson_interval: n must be >= 1");
  if (successes > n) throw std::invalid_argument("wilson_interval: successes exceed trials");
  const double z = normal_quantile_two_sided(confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  return {(p + z2 / (2.0 * nn)) / denom, (z / denom) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn))};
}

// ---------------------------------------------------------------------------
// Pick experiments

/// Outcome label used for counting: "Success" or a failure cause.
inline std::string outcome_label(const PickReport& r) {
  if (r.success) return "Success";
  return r.cause ? to_string(*r.cause) : "Unknown";
}

inline std::vector<std::string> outcome_categories() {
  std::vector<std::string> c{"Success"};
  for (auto f : kAllFailureCauses) c.emplace_back(to_string(f));
  return c;
}

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  PickReport report;
};

struct ExperimentReport {
  std::string scenario;
  std::uint64_t base_seed = 0;
  double confidence = 0.95;
  std::vector<TrialRecord> trials;
  std::vector<std::pair<std::string, std::size_t>> counts;  // fixed category order
  WilsonInterval success_interval;

  std::size_t n_trials() const noexcept { return trials.size(); }
  std::size_t count(const std::string& label) const {
    for (const auto& [k, v] : counts)
      if (k == label) return v;
    return 0;
  }
  double fraction(const std::string& label) const {
    return static_cast<double>(count(label)) / static_cast<double>(n_trials());
  }
};

/// Seed of trial `index`; terrain and pick streams are derived from it.
inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t index) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

inline TrialRecord run_trial(const Scenario& s, const PickSystems& sys, std::size_t index) {
  const std::uint64_t seed = trial_seed(s.base_seed, index);
  TerrainGrid world = generate_terrain(s.terrain, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  return TrialRecord{index, seed, run_pick(world, sys, s.limits, rng)};
}

/// Runs `s.n_trials` independent picks, each on a fresh bed. Trials may run on
/// several workers; results are folded in trial order.
inline ExperimentReport run_experiment(const Scenario& s, const Segmenter& seg) {
  if (s.n_trials < 1) throw std::invalid_argument("run_experiment: n_trials must be >= 1");
  const PickSystems sys = s.systems(seg);
  std::vector<TrialRecord> trials(static_cast<std::size_t>(s.n_trials));
  const auto workers = static_cast<std::size_t>(std::max(1, s.workers));
  if (workers == 1) {
    for (std::size_t i = 0; i < trials.size(); ++i) trials[i] = run_trial(s, sys, i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < trials.size(); i = next++) trials[i] = run_trial(s, sys, i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ExperimentReport rep;
  rep.scenario = s.name;
  rep.base_seed = s.base_seed;
  rep.confidence = s.confidence;
  for (const auto& c : outcome_categories()) rep.counts.emplace_back(c, 0);
  for (const auto& t : trials) {
    const std::string label = outcome_label(t.report);
    for (auto& [k, v] : rep.counts)
      if (k == label) ++v;
  }
  rep.trials = std::move(trials);
  rep.success_interval = wilson_interval(rep.count("Success"), rep.n_trials(), s.confidence);
  return rep;
}

// ---------------------------------------------------------------------------
// Vision evaluation and ablation

struct VisionEval {
  Confusion validation_counts;
  Confusion test_counts;
  Metrics validation;
  Metrics test;
};

/// Pools confusion counts over each split, then computes metrics.
inline Confusion pooled_confusion(const std::vector<LabeledImage>& imgs, const Segmenter& seg) {
  Confusion c;
  for (const auto& img : imgs) c += confusion(seg.segment(img.rgb), img.mask);
  return c;
}

inline VisionEval run_vision_eval(const DatasetSplit& data, const Segmenter& seg) {
  if (data.validation.empty() || data.test.empty()) throw std::invalid_argument("run_vision_eval: empty split");
  VisionEval e;
  e.validation_counts = pooled_confusion(data.validation, seg);
  e.test_counts = pooled_confusion(data.test, seg);
  e.validation = metrics_from(e.validation_counts);
  e.test = metrics_from(e.test_counts);
  return e;
}

/// Named override of a subset of TrainConfig fields.
struct TrainConfigDelta {
  std::string name;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<bool> augment;
  std::optional<std::uint64_t> seed;
  std::optional<int> pixels_per_image;

  TrainConfig apply(TrainConfig c) const {
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (learning_rate) c.learning_rate = *learning_rate;
    if (augment) c.augment = *augment;
    if (seed) c.seed = *seed;
    if (pixels_per_image) c.pixels_per_image = *pixels_per_image;
    return c;
  }
};

inline Metrics metric_delta(const Metrics& a, const Metrics& base) {
  return {a.accuracy - base.accuracy, a.precision - base.precision, a.recall - base.recall, a.iou - base.iou};
}

struct AblationRow {
  std::string name;
  TrainConfig config;
  std::optional<VisionEval> eval;  // empty when training failed
  Metrics validation_delta;
  Metrics test_delta;
  std::string error;
};

/// Trains the base configuration and one model per toggle, evaluates each and
/// reports signed metric deltas against the base row (row 0).
inline std::vector<AblationRow> run_ablation(const DatasetSplit& data, const TrainConfig& base,
                                             const std::vector<TrainConfigDelta>& toggles) {
  std::vector<AblationRow> rows;
  const auto train_row = [&data](std::string name, const TrainConfig& cfg) {
    AblationRow row{std::move(name), cfg, std::nullopt, {}, {}, {}};
    try {
      cfg.validate();
      const LogisticSegmenter seg(train(data, cfg).model);
      row.eval = run_vision_eval(data, seg);
    } catch (const TrainingDiverged& e) {
      row.error = e.what();
    }
    return row;
  };
  rows.push_back(train_row("base", base));
  for (const auto& t : toggles) rows.push_back(train_row(t.name, t.apply(base)));
  if (rows.front().eval) {
    for (auto& r : rows) {
      if (!r.eval) continue;
      r.validation_delta = metric_delta(r.eval->validation, rows.front().eval->validation);
      r.test_delta = metric_delta(r.eval->test, rows.front().eval->test);
    }
  }
  return rows;
}

}  // namespace soilpick
