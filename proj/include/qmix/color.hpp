#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qmix/classical_em.hpp"
#include "qmix/engine.hpp"
#include "qmix/gaussian.hpp"
#include "qmix/quantum_em.hpp"

namespace qmix {

struct Lab {
  double L, a, b;
};

// sRGB channels in [0, 255] to CIE L*a*b* under D65.
Lab srgb_to_lab(double r, double g, double b);

struct SrgbResult {
  std::array<std::uint8_t, 3> rgb;
  bool clamped;  // some channel fell outside the sRGB gamut
};
SrgbResult lab_to_srgb(const Lab& lab);

struct RgbImage {
  int width = 0, height = 0;
  int bit_depth = 8;
  std::vector<std::uint8_t> data;  // interleaved RGB
};

struct BinaryMask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> values;  // 1 = white, 0 = black
  long count_white() const;
};

// 1 where every channel is strictly above the threshold.
BinaryMask binarize(const RgbImage& img, int threshold = 100);

class LabImage {
 public:
  LabImage(int width, int height, std::vector<double> lab);
  int width() const { return width_; }
  int height() const { return height_; }
  long pixels() const { return static_cast<long>(width_) * height_; }
  const std::vector<double>& lab() const { return lab_; }
  Dataset as_dataset() const;

 private:
  int width_, height_;
  std::vector<double> lab_;
};

LabImage rgb_to_lab_image(const RgbImage& img);

struct ColoredImage {
  LabImage image;
  std::vector<std::uint8_t> truth;  // per pixel, 1 = white
  long n_white = 0, n_black = 0;
};

// Each white pixel drawn from `white`, each black pixel from `black`.
ColoredImage colorize(const BinaryMask& mask, const GaussianClass& black, const GaussianClass& white,
                      std::uint64_t seed);

// Synthetic skyline: black buildings rising from the bottom edge under a
// white sky, with exactly n_black black pixels. Deterministic per seed.
BinaryMask skyline_mask(int width, int height, long n_black, std::uint64_t seed);

struct ColorTruth {
  GaussianClass black, white;
  std::vector<std::uint8_t> labels;  // 1 = white
  long n_white = 0, n_black = 0;
};

struct SegmentConfig {
  int trials = 1;  // random restarts; the run with the median final objective is kept
  ConvergenceConfig convergence;
};

struct ClassEstimate {
  Eigen::Vector3d mu;
  Eigen::Vector3d var;  // diagonal of the fitted covariance
  double count = 0.0;   // sum of responsibilities
};

struct SegmentationResult {
  BinaryMask mask;
  ClassEstimate black, white;
  double objective = 0.0;
  bool converged = false;
  // Filled when ground truth is supplied.
  double err_mu_black = 0.0, err_mu_white = 0.0;
  double err_var_black = 0.0, err_var_white = 0.0;
  double err_n_black = 0.0, err_n_white = 0.0;
  long misassigned = 0;
};

// Fits the engine to the pixel colors and assigns black where Q_black > Q_white.
// With truth, fitted classes are matched to ground truth by minimal combined
// center error; without it, black is the class with the lower mean L*.
SegmentationResult segment(const LabImage& img, Engine engine, std::uint64_t seed, const ColorTruth* truth = nullptr,
                           const SegmentConfig& cfg = {});

}  // namespace qmix
