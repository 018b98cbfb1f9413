#include "qmix/color.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "qmix/error.hpp"
#include "qmix/kernels.hpp"
#include "qmix/rng.hpp"

namespace qmix {

namespace {

// IEC 61966-2-1 linear sRGB to XYZ; the D65 white point is the image of
// (1, 1, 1) so reference white maps to a* = b* = 0 exactly.
const Eigen::Matrix3d& rgb_to_xyz() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.4124564, 0.3575761, 0.1804375,  //
                                    0.2126729, 0.7151522, 0.0721750,                       //
                                    0.0193339, 0.1191920, 0.9503041)
                                       .finished();
  return m;
}

const Eigen::Matrix3d& xyz_to_rgb() {
  static const Eigen::Matrix3d m = rgb_to_xyz().inverse();
  return m;
}

const Eigen::Vector3d& white() {
  static const Eigen::Vector3d w = rgb_to_xyz() * Eigen::Vector3d::Ones();
  return w;
}

constexpr double kDelta = 6.0 / 29.0;

double decode(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double encode(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055; }
double f(double t) { return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0; }
double f_inv(double t) { return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0); }

}  // namespace

Lab srgb_to_lab(double r, double g, double b) {
  Eigen::Vector3d lin(decode(r / 255.0), decode(g / 255.0), decode(b / 255.0));
  Eigen::Vector3d xyz = rgb_to_xyz() * lin;
  const double fx = f(xyz(0) / white()(0)), fy = f(xyz(1) / white()(1)), fz = f(xyz(2) / white()(2));
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

SrgbResult lab_to_srgb(const Lab& lab) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  Eigen::Vector3d xyz(white()(0) * f_inv(fx), white()(1) * f_inv(fy), white()(2) * f_inv(fz));
  Eigen::Vector3d lin = xyz_to_rgb() * xyz;
  SrgbResult out{{0, 0, 0}, false};
  for (int c = 0; c < 3; ++c) {
    double v = 255.0 * encode(std::max(lin(c), 0.0));
    if (lin(c) < -1e-9 || v > 255.5) out.clamped = true;
    out.rgb[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

long BinaryMask::count_white() const { return std::count(values.begin(), values.end(), std::uint8_t{1}); }

BinaryMask skyline_mask(int width, int height, long n_black, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
  const long total = static_cast<long>(width) * height;
  if (n_black < 0 || n_black > total) throw Error(ErrorCode::InvalidArgument, "black pixel count exceeds the mask");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> span(std::max(1, width / 24), std::max(1, width / 8));
  std::uniform_real_distribution<double> rise(0.2, 1.0);
  std::vector<double> h(static_cast<std::size_t>(width));
  for (int x = 0; x < width;) {
    const int w = span(rng);
    const double v = rise(rng);
    for (int j = 0; j < w && x < width; ++j, ++x) h[static_cast<std::size_t>(x)] = v;
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  std::vector<long> cols(h.size());
  long placed = 0;
  for (std::size_t x = 0; x < h.size(); ++x) {
    cols[x] = std::min<long>(height, std::lround(h[x] / sum * static_cast<double>(n_black)));
    placed += cols[x];
  }
  // Spread the rounding residual one pixel per column.
  for (std::size_t x = 0; placed != n_black; x = (x + 1) % cols.size()) {
    if (placed < n_black && cols[x] < height) {
      ++cols[x];
      ++placed;
    } else if (placed > n_black && cols[x] > 0) {
      --cols[x];
      --placed;
    }
  }
  BinaryMask m{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(total), 1)};
  for (int x = 0; x < width; ++x)
    for (long y = height - cols[static_cast<std::size_t>(x)]; y < height; ++y)
      m.values[static_cast<std::size_t>(y * width + x)] = 0;
  return m;
}

BinaryMask binarize(const RgbImage& img, int threshold) {
  if (img.bit_depth != 8) throw Error(ErrorCode::UnsupportedFormat, "binarize expects 8-bit RGB input");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (img.data.size() != 3 * n) throw Error(ErrorCode::LengthMismatch, "image buffer does not match its dimensions");
  BinaryMask m{img.width, img.height, std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = &img.data[3 * i];
    m.values[i] = (p[0] > threshold && p[1] > threshold && p[2] > threshold) ? 1 : 0;
  }
  return m;
}

LabImage::LabImage(int width, int height, std::vector<double> lab)
    : width_(width), height_(height), lab_(std::move(lab)) {
  if (width_ <= 0 || height_ <= 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  if (lab_.size() != 3 * static_cast<std::size_t>(pixels()))
    throw Error(ErrorCode::LengthMismatch, "Lab buffer does not match image dimensions");
  for (double v : lab_)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "Lab image has non-finite values");
}

Dataset LabImage::as_dataset() const {
  Points p(pixels(), 3);
  std::copy(lab_.begin(), lab_.end(), p.data());
  return Dataset(std::move(p));
}

LabImage rgb_to_lab_image(const RgbImage& img) {
  if (img.bit_depth != 8) throw Error(ErrorCode::UnsupportedFormat, "expected 8-bit RGB input");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<double> lab(3 * n);
  kernels::srgb_to_lab(img.data.data(), n, lab.data());
  return LabImage(img.width, img.height, std::move(lab));
}

ColoredImage colorize(const BinaryMask& mask, const GaussianClass& black, const GaussianClass& white,
                      std::uint64_t seed) {
  if (black.dim() != 3 || white.dim() != 3) throw Error(ErrorCode::InvalidArgument, "color classes must be 3D");
  std::mt19937_64 rng = make_rng(seed, 0);
  std::normal_distribution<double> z;
  const std::size_t n = mask.values.size();
  std::vector<double> lab(3 * n);
  long nw = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const GaussianClass& c = mask.values[i] ? white : black;
    nw += mask.values[i] ? 1 : 0;
    Eigen::Vector3d e(z(rng), z(rng), z(rng));
    Eigen::Vector3d x = c.mu() + c.chol() * e;
    for (int k = 0; k < 3; ++k) lab[3 * i + k] = x(k);
  }
  return {LabImage(mask.width, mask.height, std::move(lab)), mask.values, nw, static_cast<long>(n) - nw};
}

namespace {

struct EngineRun {
  GaussianClass c[2];
  Eigen::MatrixXd q;
  double objective;
  bool converged;
};

EngineRun run_engine(const Dataset& data, Engine engine, std::mt19937_64& rng, const ConvergenceConfig& conv) {
  if (engine == Engine::Classical) {
    auto r = classical_fit(data, random_classical_init(data, 2, rng), conv);
    return {{r.params_final.classes[0], r.params_final.classes[1]},
            r.responsibilities.q(),
            r.objective_trace.back(),
            r.converged};
  }
  QuantumFitConfig qc;
  qc.convergence = conv;
  auto r = quantum_fit(data, random_quantum_init(data, rng), qc);
  return {{r.params_final.class1, r.params_final.class2}, r.responsibilities.q(), r.objective_trace.back(),
          r.converged};
}

}  // namespace

SegmentationResult segment(const LabImage& img, Engine engine, std::uint64_t seed, const ColorTruth* truth,
                           const SegmentConfig& cfg) {
  if (img.pixels() < 2) throw Error(ErrorCode::InvalidArgument, "segmentation needs at least two pixels");
  Dataset data = img.as_dataset();
  std::vector<EngineRun> runs;
  std::optional<Error> last_error;
  for (int t = 0; t < std::max(1, cfg.trials); ++t) {
    std::mt19937_64 rng = make_rng(seed, static_cast<std::uint64_t>(t));
    try {
      runs.push_back(run_engine(data, engine, rng, cfg.convergence));
    } catch (const Error& e) {
      last_error = e;
    }
  }
  if (runs.empty()) throw *last_error;
  std::vector<std::size_t> order(runs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return runs[a].objective < runs[b].objective; });
  const EngineRun& run = runs[order[(order.size() - 1) / 2]];

  // Index of the fitted class that plays "black".
  int black = 0;
  if (truth) {
    const double straight = (run.c[0].mu() - truth->black.mu()).norm() + (run.c[1].mu() - truth->white.mu()).norm();
    const double swapped = (run.c[1].mu() - truth->black.mu()).norm() + (run.c[0].mu() - truth->white.mu()).norm();
    black = swapped < straight ? 1 : 0;
  } else {
    black = run.c[1].mu()(0) < run.c[0].mu()(0) ? 1 : 0;
  }
  const int white = 1 - black;

  SegmentationResult res;
  res.mask = BinaryMask{img.width(), img.height(), std::vector<std::uint8_t>(img.pixels())};
  for (long i = 0; i < img.pixels(); ++i) res.mask.values[i] = run.q(i, black) - run.q(i, white) > 0.0 ? 0 : 1;
  auto estimate = [&](int k) {
    return ClassEstimate{run.c[k].mu(), run.c[k].cov().diagonal(), run.q.col(k).sum()};
  };
  res.black = estimate(black);
  res.white = estimate(white);
  res.objective = run.objective;
  res.converged = run.converged;
  if (truth) {
    if (truth->labels.size() != static_cast<std::size_t>(img.pixels()))
      throw Error(ErrorCode::LengthMismatch, "truth labels do not match the image");
    res.err_mu_black = (res.black.mu - truth->black.mu()).norm();
    res.err_mu_white = (res.white.mu - truth->white.mu()).norm();
    res.err_var_black = (res.black.var - truth->black.cov().diagonal()).norm();
    res.err_var_white = (res.white.var - truth->white.cov().diagonal()).norm();
    res.err_n_black = std::abs(res.black.count - static_cast<double>(truth->n_black));
    res.err_n_white = std::abs(res.white.count - static_cast<double>(truth->n_white));
    for (long i = 0; i < img.pixels(); ++i) res.misassigned += res.mask.values[i] != truth->labels[i] ? 1 : 0;
  }
  return res;
}

}  // namespace qmix
