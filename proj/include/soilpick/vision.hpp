#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "soilpick/image.hpp"
#include "soilpick/rng.hpp"

namespace soilpick {

struct LabeledImage {
  RgbImage rgb;
  Mask mask;

  void validate() const {
    if (rgb.width() != mask.width() || rgb.height() != mask.height())
      throw std::invalid_argument("LabeledImage: rgb and mask dimensions differ");
    for (auto p : mask.pixels())
      if (p > 1) throw std::invalid_argument("LabeledImage: mask is not binary");
  }
  friend bool operator==(const LabeledImage&, const LabeledImage&) = default;
};

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear resample with pixel-center alignment; same-size input is returned
/// unchanged.
inline RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  if (src.empty() || width < 1 || height < 1) throw std::invalid_argument("resize: zero-sized image");
  if (src.width() == width && src.height() == height) return src;
  RgbImage out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int v = 0; v < height; ++v) {
    const double y = std::clamp((v + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const auto fy = static_cast<float>(y - y0);
    for (int u = 0; u < width; ++u) {
      const double x = std::clamp((u + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const auto fx = static_cast<float>(x - x0);
      Rgb c;
      for (int ch = 0; ch < 3; ++ch) {
        const float top = src(x0, y0)[ch] * (1 - fx) + src(x1, y0)[ch] * fx;
        const float bot = src(x0, y1)[ch] * (1 - fx) + src(x1, y1)[ch] * fx;
        c[ch] = top * (1 - fy) + bot * fy;
      }
      out(u, v) = c;
    }
  }
  return out;
}

inline Mask resize_nearest(const Mask& src, int width, int height) {
  if (src.empty() || width < 1 || height < 1) throw std::invalid_argument("resize: zero-sized image");
  if (src.width() == width && src.height() == height) return src;
  Mask out(width, height);
  for (int v = 0; v < height; ++v) {
    const int y = std::min(static_cast<int>((v + 0.5) * src.height() / height), src.height() - 1);
    for (int u = 0; u < width; ++u) {
      const int x = std::min(static_cast<int>((u + 0.5) * src.width() / width), src.width() - 1);
      out(u, v) = src(x, y);
    }
  }
  return out;
}

inline LabeledImage resize(const LabeledImage& img, int width, int height) {
  img.validate();
  return {resize_bilinear(img.rgb, width, height), resize_nearest(img.mask, width, height)};
}

inline constexpr int kModelInputSize = 512;

inline LabeledImage resize_to_512(const LabeledImage& img) {
  return resize(img, kModelInputSize, kModelInputSize);
}

// ---------------------------------------------------------------------------
// Dataset split

struct DatasetSplit {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> validation;
  std::vector<LabeledImage> test;
};

/// Integer sizes for `n` items under `ratios` by largest-remainder rounding;
/// ties go to the earlier bucket.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split_dataset: ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw std::invalid_argument("split_dataset: negative ratio");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    rem[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  return sizes;
}

inline DatasetSplit split_dataset(std::vector<LabeledImage> imgs, const std::array<double, 3>& ratios,
                                  std::uint64_t seed) {
  const auto sizes = split_sizes(imgs.size(), ratios);
  std::vector<std::size_t> idx(imgs.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  DatasetSplit out;
  std::size_t k = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) out.train.push_back(std::move(imgs[idx[k++]]));
  for (std::size_t i = 0; i < sizes[1]; ++i) out.validation.push_back(std::move(imgs[idx[k++]]));
  for (std::size_t i = 0; i < sizes[2]; ++i) out.test.push_back(std::move(imgs[idx[k++]]));
  return out;
}

// ---------------------------------------------------------------------------
// Dihedral augmentation

/// Element e of the order-8 dihedral group on a square: horizontal flip when
/// e >= 4, then (e % 4) clockwise quarter turns. Returns the source pixel that
/// lands on (u, v).
inline std::array<int, 2> dihedral_source(int e, int n, int u, int v) {
  // Undo the rotation first, then the flip.
  for (int k = 0; k < e % 4; ++k) {
    // inverse of clockwise turn (x, y) -> (n-1-y, x)
    const int x = v, y = n - 1 - u;
    u = x;
    v = y;
  }
  if (e >= 4) u = n - 1 - u;
  return {u, v};
}

/// Read-only view of a square image under a dihedral element.
template <typename T>
class DihedralView {
 public:
  DihedralView(const Image<T>& src, int element) : src_(&src), element_(element) {
    if (src.width() != src.height()) throw std::invalid_argument("dihedral transform needs a square image");
  }
  int width() const noexcept { return src_->width(); }
  int height() const noexcept { return src_->height(); }
  const T& operator()(int u, int v) const {
    const auto s = dihedral_source(element_, src_->width(), u, v);
    return (*src_)(s[0], s[1]);
  }
  const T& clamped(int u, int v) const {
    return (*this)(std::clamp(u, 0, width() - 1), std::clamp(v, 0, height() - 1));
  }

 private:
  const Image<T>* src_;
  int element_;
};

template <typename T>
Image<T> apply_dihedral(const Image<T>& img, int element) {
  const DihedralView<T> view(img, element);
  Image<T> out(img.width(), img.height());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) out(u, v) = view(u, v);
  return out;
}

inline LabeledImage apply_dihedral(const LabeledImage& img, int element) {
  return {apply_dihedral(img.rgb, element), apply_dihedral(img.mask, element)};
}

/// Uniformly random rotation/flip, applied identically to image and mask.
inline LabeledImage augment(const LabeledImage& img, Rng& rng) {
  if (img.rgb.width() != img.rgb.height()) throw std::invalid_argument("augment: image must be square");
  return apply_dihedral(img, static_cast<int>(rng.below(8)));
}

// ---------------------------------------------------------------------------
// Per-pixel logistic segmenter

inline constexpr std::size_t kFeatureCount = 13;
inline constexpr const char* kFeatureVersion = "rgb+mean3x3+std3x3+lumgrad/v1";
using Features = std::array<double, kFeatureCount>;

/// R, G, B; 3x3 mean per channel; 3x3 std per channel; luminance gradient
/// along u, along v, and its magnitude; constant bias. Borders replicate.
template <typename Img>
Features pixel_features(const Img& img, int u, int v) {
  Features f{};
  const Rgb& c = img(u, v);
  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du) {
      const Rgb& p = img.clamped(u + du, v + dv);
      for (int ch = 0; ch < 3; ++ch) {
        sum[ch] += p[ch];
        sq[ch] += static_cast<double>(p[ch]) * p[ch];
      }
    }
  for (int ch = 0; ch < 3; ++ch) {
    f[ch] = c[ch];
    const double mean = sum[ch] / 9.0;
    f[3 + ch] = mean;
    f[6 + ch] = std::sqrt(std::max(0.0, sq[ch] / 9.0 - mean * mean));
  }
  const auto lum = [](const Rgb& p) { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; };
  f[9] = 0.5 * (lum(img.clamped(u + 1, v)) - lum(img.clamped(u - 1, v)));
  f[10] = 0.5 * (lum(img.clamped(u, v + 1)) - lum(img.clamped(u, v - 1)));
  f[11] = std::hypot(f[9], f[10]);
  f[12] = 1.0;
  return f;
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct SegmenterModel {
  Features weights{};
  double threshold = 0.5;
  std::string feature_version = kFeatureVersion;

  double probability(const Features& f) const {
    double z = 0.0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += weights[i] * f[i];
    return sigmoid(z);
  }

  friend bool operator==(const SegmenterModel&, const SegmenterModel&) = default;
};

/// Pixel is pickable iff probability >= threshold (ties are pickable).
inline Mask segment(const SegmenterModel& m, const RgbImage& img) {
  Mask out(img.width(), img.height());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      out(u, v) = m.probability(pixel_features(img, u, v)) >= m.threshold ? 1 : 0;
  return out;
}

/// Anything that turns an RGB frame into a pickable mask.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual Mask segment(const RgbImage& img) const = 0;
};

class LogisticSegmenter final : public Segmenter {
 public:
  explicit LogisticSegmenter(SegmenterModel model) : model_(std::move(model)) {}
  Mask segment(const RgbImage& img) const override { return soilpick::segment(model_, img); }
  const SegmenterModel& model() const noexcept { return model_; }

 private:
  SegmenterModel model_;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 4;
  double learning_rate = 0.001;
  bool augment = true;
  std::uint64_t seed = 0;
  int pixels_per_image = 256;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || pixels_per_image < 1)
      throw std::invalid_argument("TrainConfig: epochs, batch_size, pixels_per_image must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: negative learning rate");
  }
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  SegmenterModel model;
  std::vector<double> step_losses;  // mini-batch loss before each update
  double initial_loss = 0.0;        // on a fixed probe sample
  double final_loss = 0.0;
  std::size_t augmented_samples = 0;
  std::size_t steps = 0;
};

namespace detail {

struct Sample {
  Features x;
  double y;
};

inline double bce(double p, double y) {
  constexpr double eps = 1e-12;
  p = std::clamp(p, eps, 1.0 - eps);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

inline double mean_loss(const Features& w, const std::vector<Sample>& s) {
  double total = 0.0;
  for (const auto& e : s) {
    double z = 0.0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += w[i] * e.x[i];
    total += bce(sigmoid(z), e.y);
  }
  return total / static_cast<double>(s.size());
}

}  // namespace detail

/// Mini-batch gradient descent on mean per-pixel binary cross-entropy.
/// Features are standardized internally from a fixed probe sample; the
/// returned weights act on raw features.
inline TrainResult train(const DatasetSplit& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  for (const auto& img : data.train) img.validate();
  if (cfg.augment)
    for (const auto& img : data.train)
      if (img.rgb.width() != img.rgb.height()) throw std::invalid_argument("train: augmentation needs square images");

  Rng probe_rng(derive_seed(cfg.seed, 0));
  Rng rng(derive_seed(cfg.seed, 1));

  // Probe sample: fixed pixels of un-augmented training images.
  std::vector<detail::Sample> probe;
  for (const auto& img : data.train) {
    for (int k = 0; k < cfg.pixels_per_image; ++k) {
      const int u = static_cast<int>(probe_rng.below(static_cast<std::uint64_t>(img.rgb.width())));
      const int v = static_cast<int>(probe_rng.below(static_cast<std::uint64_t>(img.rgb.height())));
      probe.push_back({pixel_features(img.rgb, u, v), static_cast<double>(img.mask(u, v))});
    }
  }
  Features mean{}, scale{};
  for (const auto& s : probe)
    for (std::size_t i = 0; i + 1 < kFeatureCount; ++i) mean[i] += s.x[i];
  for (std::size_t i = 0; i + 1 < kFeatureCount; ++i) mean[i] /= static_cast<double>(probe.size());
  for (const auto& s : probe)
    for (std::size_t i = 0; i + 1 < kFeatureCount; ++i) scale[i] += (s.x[i] - mean[i]) * (s.x[i] - mean[i]);
  for (std::size_t i = 0; i + 1 < kFeatureCount; ++i) {
    scale[i] = std::sqrt(scale[i] / static_cast<double>(probe.size()));
    if (!(scale[i] > 1e-12)) scale[i] = 1.0;
  }
  mean[kFeatureCount - 1] = 0.0;
  scale[kFeatureCount - 1] = 1.0;
  const auto standardize = [&](Features x) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) x[i] = (x[i] - mean[i]) / scale[i];
    return x;
  };
  for (auto& s : probe) s.x = standardize(s.x);

  TrainResult result;
  Features w{};
  result.initial_loss = detail::mean_loss(w, probe);

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<detail::Sample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t b = start; b < stop; ++b) {
        const LabeledImage& img = data.train[order[b]];
        const int element = cfg.augment ? static_cast<int>(rng.below(8)) : 0;
        if (cfg.augment) ++result.augmented_samples;
        const int n_u = img.rgb.width(), n_v = img.rgb.height();
        for (int k = 0; k < cfg.pixels_per_image; ++k) {
          const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_u)));
          const int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_v)));
          if (cfg.augment) {
            const DihedralView<Rgb> view(img.rgb, element);
            const DihedralView<std::uint8_t> mview(img.mask, element);
            batch.push_back({standardize(pixel_features(view, u, v)), static_cast<double>(mview(u, v))});
          } else {
            batch.push_back({standardize(pixel_features(img.rgb, u, v)), static_cast<double>(img.mask(u, v))});
          }
        }
      }
      Features grad{};
      double loss = 0.0;
      for (const auto& s : batch) {
        double z = 0.0;
        for (std::size_t i = 0; i < kFeatureCount; ++i) z += w[i] * s.x[i];
        const double p = sigmoid(z);
        loss += detail::bce(p, s.y);
        for (std::size_t i = 0; i < kFeatureCount; ++i) grad[i] += (p - s.y) * s.x[i];
      }
      const auto bn = static_cast<double>(batch.size());
      loss /= bn;
      if (!std::isfinite(loss)) throw TrainingDiverged("train: loss became non-finite at step " +
                                                       std::to_string(result.steps));
      result.step_losses.push_back(loss);
      for (std::size_t i = 0; i < kFeatureCount; ++i) w[i] -= cfg.learning_rate * grad[i] / bn;
      for (double wi : w)
        if (!std::isfinite(wi)) throw TrainingDiverged("train: weights became non-finite");
      ++result.steps;
    }
  }
  result.final_loss = detail::mean_loss(w, probe);

  // Fold the standardization into raw-feature weights.
  Features raw{};
  double bias = w[kFeatureCount - 1];
  for (std::size_t i = 0; i + 1 < kFeatureCount; ++i) {
    raw[i] = w[i] / scale[i];
    bias -= w[i] * mean[i] / scale[i];
  }
  raw[kFeatureCount - 1] = bias;
  result.model.weights = raw;
  return result;
}

// ---------------------------------------------------------------------------
// Metrics

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Confusion confusion(const Mask& pred, const Mask& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height())
    throw std::invalid_argument("evaluate: mask dimensions differ");
  Confusion c;
  const auto p = pred.pixels();
  const auto t = truth.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && t[i]) ++c.tp;
    else if (p[i]) ++c.fp;
    else if (t[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// Zero-denominator ratios are 1 when no positive pixel exists in either mask,
/// 0 otherwise.
inline Metrics metrics_from(const Confusion& c) {
  const bool no_positives = c.tp + c.fp + c.fn == 0;
  const auto ratio = [no_positives](std::uint64_t num, std::uint64_t den) {
    if (den == 0) return no_positives ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.accuracy = c.total() ? static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()) : 1.0;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  return m;
}

inline Metrics evaluate(const Mask& pred, const Mask& truth) { return metrics_from(confusion(pred, truth)); }

}  // namespace soilpick
