#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fieldshift/data_types.hpp"
#include "fieldshift/imageops.hpp"
#include "fieldshift/rng.hpp"
#include "fieldshift/tensor.hpp"

namespace fieldshift {

// Metric conventions: images live on [0,1]; MAE is the SUM of absolute
// differences over all pixels (the scale clinical evaluation tables use),
// MSE is the per-pixel mean, PSNR is 10*log10(1/MSE) with max_value 1.

/// Sum over pixels of |a-b|.
inline double mae_sum(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size())
    throw DimensionError("mae_sum: pixel count mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return acc;
}

/// Mean over pixels of (a-b)^2.
inline double mse(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size())
    throw DimensionError("mse: pixel count mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// 10*log10(max_value^2 / mse); +inf when the images match exactly.
inline double psnr(const std::vector<float>& a, const std::vector<float>& b,
                   double max_value = 1.0) {
  if (!(max_value > 0.0)) throw ParameterError("psnr: max_value must be positive");
  const double err = mse(a, b);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / err);
}

inline double psnr_from_mse(double err, double max_value = 1.0) {
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / err);
}

struct MetricSample {
  int pair_id = 0;
  double mae_sum = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;  // +inf when mse == 0
};

struct MetricStat {
  double mean = 0.0;
  double sd = 0.0;  // sample SD (n-1 denominator)
};

struct MetricsReport {
  std::string model_label;
  int n_samples = 0;
  int n_infinite_psnr = 0;
  MetricStat mae;
  MetricStat mse_stat;
  MetricStat psnr_stat;  // over the finite samples only
  double mae_mean_per_pixel = 0.0;
  std::vector<MetricSample> samples;
};

namespace detail {

/// Two-pass mean and sample SD.
inline MetricStat aggregate(const std::vector<double>& values) {
  MetricStat stat;
  if (values.empty()) {
    stat.mean = stat.sd = std::numeric_limits<double>::quiet_NaN();
    return stat;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  stat.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    stat.sd = 0.0;
    return stat;
  }
  double sq = 0.0;
  for (double v : values) {
    const double d = v - stat.mean;
    sq += d * d;
  }
  stat.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return stat;
}

}  // namespace detail

/// Fills the aggregate fields of a report from its samples.
inline void aggregate_report(MetricsReport& report, size_t pixel_count) {
  std::vector<double> maes, mses, psnrs;
  report.n_infinite_psnr = 0;
  for (const auto& s : report.samples) {
    maes.push_back(s.mae_sum);
    mses.push_back(s.mse);
    if (std::isinf(s.psnr_db))
      ++report.n_infinite_psnr;
    else
      psnrs.push_back(s.psnr_db);
  }
  report.n_samples = static_cast<int>(report.samples.size());
  report.mae = detail::aggregate(maes);
  report.mse_stat = detail::aggregate(mses);
  report.psnr_stat = detail::aggregate(psnrs);
  report.mae_mean_per_pixel =
      pixel_count > 0 && !report.samples.empty()
          ? report.mae.mean / static_cast<double>(pixel_count)
          : 0.0;
}

/// Any image-to-image map, e.g. a trained generator bound to its state.
using Translator = std::function<std::vector<float>(const std::vector<float>&, int, int)>;

/// Reconstruction quality of the cycle, sampled uniformly WITH replacement
/// from the test split (n is usually far larger than the split). Forward
/// compares x against F(G(x)); backward compares y against G(F(y)).
inline MetricsReport evaluate_cycle(const Translator& g, const Translator& f,
                                    const SliceDataset& test_set, bool forward_direction,
                                    int n, uint64_t seed,
                                    const std::string& model_label = "") {
  if (test_set.test.empty())
    throw DatasetError("evaluate_cycle: empty test split");
  if (n < 1) throw ParameterError("evaluate_cycle: n must be >= 1");
  MetricsReport report;
  report.model_label = model_label;
  Rng rng(seed);
  size_t pixel_count = 0;
  for (int i = 0; i < n; ++i) {
    const SliceImage& img = test_set.test[rng.bounded(test_set.test.size())];
    pixel_count = img.pixels.size();
    std::vector<float> translated, reconstructed;
    if (forward_direction) {
      translated = g(img.pixels, img.height, img.width);
      reconstructed = f(translated, img.height, img.width);
    } else {
      translated = f(img.pixels, img.height, img.width);
      reconstructed = g(translated, img.height, img.width);
    }
    MetricSample s;
    s.pair_id = i;
    s.mae_sum = mae_sum(img.pixels, reconstructed);
    s.mse = mse(img.pixels, reconstructed);
    s.psnr_db = psnr_from_mse(s.mse);
    report.samples.push_back(s);
  }
  aggregate_report(report, pixel_count);
  return report;
}

/// A latent-conditioned image source, e.g. a DCGAN generator.
using Synthesizer = std::function<std::vector<float>(Rng&, int&, int&)>;

/// Quality of pure synthesis: n generated images, each upsampled to the
/// reference resolution and paired with a uniformly random real test image.
inline MetricsReport evaluate_synthesis(const Synthesizer& generate,
                                        const SliceDataset& test_set, int n,
                                        uint64_t seed,
                                        const std::string& model_label = "") {
  if (test_set.test.empty())
    throw DatasetError("evaluate_synthesis: empty test split");
  if (n < 1) throw ParameterError("evaluate_synthesis: n must be >= 1");
  MetricsReport report;
  report.model_label = model_label;
  Rng rng(seed);
  size_t pixel_count = 0;
  for (int i = 0; i < n; ++i) {
    int gh = 0, gw = 0;
    std::vector<float> fake = generate(rng, gh, gw);
    const SliceImage& real = test_set.test[rng.bounded(test_set.test.size())];
    if (gh != real.height || gw != real.width)
      fake = resize_bilinear(fake, gh, gw, real.height, real.width);
    pixel_count = real.pixels.size();
    MetricSample s;
    s.pair_id = i;
    s.mae_sum = mae_sum(real.pixels, fake);
    s.mse = mse(real.pixels, fake);
    s.psnr_db = psnr_from_mse(s.mse);
    report.samples.push_back(s);
  }
  aggregate_report(report, pixel_count);
  return report;
}

// ---------------------------------------------------------------------------
// reporting
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt2(double v) {
  if (std::isnan(v)) return "-";
  if (std::isinf(v)) return "inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_full(double v) {
  if (std::isnan(v)) return "";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string pad(const std::string& s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/// Aligned text table: one row per
/// model, columns MAE +/- SD, MSE +/- SD, PSNR (dB) +/- SD.
inline std::string format_report_text(const std::vector<MetricsReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model", "MAE +/- SD", "MSE +/- SD", "PSNR (dB) +/- SD"});
  for (const auto& r : reports) {
    if (r.n_samples == 0) {
      rows.push_back({r.model_label, "-", "-", "- (n=0)"});
      continue;
    }
    std::string psnr_cell;
    if (r.n_infinite_psnr == r.n_samples)
      psnr_cell = "inf (" + std::to_string(r.n_infinite_psnr) + " infinite)";
    else
      psnr_cell = detail::fmt2(r.psnr_stat.mean) + " +/- " + detail::fmt2(r.psnr_stat.sd);
    rows.push_back({r.model_label,
                    detail::fmt2(r.mae.mean) + " +/- " + detail::fmt2(r.mae.sd),
                    detail::fmt2(r.mse_stat.mean) + " +/- " + detail::fmt2(r.mse_stat.sd),
                    psnr_cell});
  }
  std::vector<size_t> widths(4, 0);
  for (const auto& row : rows)
    for (size_t c = 0; c < 4; ++c) widths[c] = std::max(widths[c], row[c].size());
  std::string out;
  for (size_t ri = 0; ri < rows.size(); ++ri) {
    for (size_t c = 0; c < 4; ++c) {
      out += c + 1 < 4 ? detail::pad(rows[ri][c], widths[c]) + "  " : rows[ri][c];
    }
    out += '\n';
    if (ri == 0) {
      for (size_t c = 0; c < 4; ++c) {
        out += std::string(widths[c], '-');
        if (c + 1 < 4) out += "  ";
      }
      out += '\n';
    }
  }
  return out;
}

inline constexpr const char* kReportCsvHeader =
    "model,mae_mean,mae_sd,mse_mean,mse_sd,psnr_mean,psnr_sd,n,n_infinite_psnr,"
    "mae_mean_per_pixel";

/// Full-precision CSV companion to the text table.
inline std::string format_report_csv(const std::vector<MetricsReport>& reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : reports) {
    out += r.model_label + ',';
    if (r.n_samples == 0) {
      out += ",,,,,,0,0,\n";
      continue;
    }
    out += detail::fmt_full(r.mae.mean) + ',' + detail::fmt_full(r.mae.sd) + ',';
    out += detail::fmt_full(r.mse_stat.mean) + ',' + detail::fmt_full(r.mse_stat.sd) + ',';
    out += detail::fmt_full(r.psnr_stat.mean) + ',' + detail::fmt_full(r.psnr_stat.sd) + ',';
    out += std::to_string(r.n_samples) + ',' + std::to_string(r.n_infinite_psnr) + ',';
    out += detail::fmt_full(r.mae_mean_per_pixel) + '\n';
  }
  return out;
}

}  // namespace fieldshift
