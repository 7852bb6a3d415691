#pragma once

#include <string>
#include <vector>

#include "s2sr/raster.hpp"
#include "s2sr/tensor.hpp"

namespace s2sr {

struct BandMetrics {
  std::string band_id;
  double rmse = 0.0;
  double sre_db = 0.0;  // +infinity marks perfect reconstruction
  double uiq = 0.0;
};

struct MetricsReport {
  std::vector<BandMetrics> bands;
  double sam_deg = 0.0;
  int64_t sam_excluded = 0;  // zero-norm pixels left out of the SAM mean
  double rmse_avg = 0.0;
  double sre_avg = 0.0;  // mean over finite per-band values
  int sre_sentinel_count = 0;
  double uiq_avg = 0.0;
};

// Root mean squared error in raw reflectance-times-1e4 units.
double rmse(const BandImage& pred, const BandImage& truth);

// Signal-to-reconstruction-error ratio 10*log10(mean(truth)^2 / mse), dB.
// Zero mse returns +infinity; a zero-mean truth is an error.
double sre(const BandImage& pred, const BandImage& truth);

// Mean per-pixel angle between the spectral vectors, degrees. Pixels where
// either spectrum has zero norm are excluded (and counted).
double sam_degrees(const Tensor& pred, const Tensor& truth,
                   int64_t* excluded = nullptr);

// Universal image quality index over 8x8 sliding windows (stride 1),
// averaged; windows with zero variance in either image are skipped.
double uiq(const BandImage& pred, const BandImage& truth);

inline constexpr int kUiqWindow = 8;

MetricsReport evaluate(const std::vector<BandImage>& pred,
                       const std::vector<BandImage>& truth);

std::string format_table(const MetricsReport& report);
std::string format_kv(const MetricsReport& report);
MetricsReport parse_kv(const std::string& text);

}  // namespace s2sr
