#include "s2sr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace s2sr {
namespace {

void check_same_shape(const BandImage& a, const BandImage& b) {
  require(a.width == b.width && a.height == b.height, ErrorCode::ShapeMismatch,
          "images must share dimensions (" + a.band_id + " vs " + b.band_id + ")");
}

std::string fmt(double v, const char* spec = "%.17g") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

double rmse(const BandImage& pred, const BandImage& truth) {
  check_same_shape(pred, truth);
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - truth.data[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.data.size()));
}

double sre(const BandImage& pred, const BandImage& truth) {
  check_same_shape(pred, truth);
  const double n = static_cast<double>(truth.data.size());
  double mean = 0.0;
  for (const float v : truth.data) mean += v;
  mean /= n;
  require(mean != 0.0, ErrorCode::DegenerateTruth,
          "truth has zero mean; SRE is undefined");

  double sq = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - truth.data[i];
    sq += d * d;
  }
  if (sq == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mean * mean / (sq / n));
}

double sam_degrees(const Tensor& pred, const Tensor& truth, int64_t* excluded) {
  require(pred.same_shape(truth), ErrorCode::ShapeMismatch,
          "spectral stacks must share shape");
  require(pred.channels >= 2, ErrorCode::ShapeMismatch,
          "spectral angle needs at least 2 bands");

  const int64_t pixels = pred.plane_size();
  const int c = pred.channels;
  double angle_sum = 0.0;
  int64_t skipped = 0, used = 0;
  for (int64_t i = 0; i < pixels; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double a = pred.data[static_cast<size_t>(ch) * pixels + i];
      const double b = truth.data[static_cast<size_t>(ch) * pixels + i];
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    if (na == 0.0 || nb == 0.0) {
      ++skipped;
      continue;
    }
    const double cosv = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
    angle_sum += std::acos(cosv);
    ++used;
  }
  if (excluded) *excluded = skipped;
  if (used == 0) return 0.0;
  return angle_sum / static_cast<double>(used) * (180.0 / std::numbers::pi);
}

double uiq(const BandImage& pred, const BandImage& truth) {
  check_same_shape(pred, truth);
  require(pred.width >= kUiqWindow && pred.height >= kUiqWindow,
          ErrorCode::ShapeMismatch, "images smaller than the 8x8 quality window");

  const int n = kUiqWindow * kUiqWindow;
  double q_sum = 0.0;
  int64_t windows = 0;
  for (int wy = 0; wy + kUiqWindow <= pred.height; ++wy) {
    for (int wx = 0; wx + kUiqWindow <= pred.width; ++wx) {
      double sx = 0.0, sy = 0.0;
      for (int y = 0; y < kUiqWindow; ++y) {
        const float* pr = &pred.at(wy + y, wx);
        const float* tr = &truth.at(wy + y, wx);
        for (int x = 0; x < kUiqWindow; ++x) {
          sx += pr[x];
          sy += tr[x];
        }
      }
      const double mx = sx / n, my = sy / n;
      double vxx = 0.0, vyy = 0.0, vxy = 0.0;
      for (int y = 0; y < kUiqWindow; ++y) {
        const float* pr = &pred.at(wy + y, wx);
        const float* tr = &truth.at(wy + y, wx);
        for (int x = 0; x < kUiqWindow; ++x) {
          const double dx = pr[x] - mx;
          const double dy = tr[x] - my;
          vxx += dx * dx;
          vyy += dy * dy;
          vxy += dx * dy;
        }
      }
      if (vxx == 0.0 || vyy == 0.0) continue;  // zero variance: skip
      // correlation * contrast collapses to 2*cov/(varx+vary); the luminance
      // term is 1 when both means vanish (matched luminance).
      const double structure = 2.0 * vxy / (vxx + vyy);
      const double mden = mx * mx + my * my;
      const double luminance = mden == 0.0 ? 1.0 : 2.0 * mx * my / mden;
      q_sum += structure * luminance;
      ++windows;
    }
  }
  require(windows > 0, ErrorCode::AllWindowsDegenerate,
          "every quality window has zero variance");
  return q_sum / static_cast<double>(windows);
}

MetricsReport evaluate(const std::vector<BandImage>& pred,
                       const std::vector<BandImage>& truth) {
  require(!pred.empty() && pred.size() == truth.size(), ErrorCode::BandMismatch,
          "prediction and truth band lists differ in length");

  // match truth bands to predictions by id
  std::vector<const BandImage*> matched;
  for (const auto& p : pred) {
    const BandImage* hit = nullptr;
    for (const auto& t : truth)
      if (t.band_id == p.band_id) {
        hit = &t;
        break;
      }
    require(hit != nullptr, ErrorCode::BandMismatch,
            "truth is missing band " + p.band_id);
    matched.push_back(hit);
  }

  MetricsReport report;
  double rmse_sum = 0.0, uiq_sum = 0.0, sre_sum = 0.0;
  int finite_sre = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    BandMetrics bm;
    bm.band_id = pred[i].band_id;
    bm.rmse = rmse(pred[i], *matched[i]);
    bm.sre_db = sre(pred[i], *matched[i]);
    bm.uiq = uiq(pred[i], *matched[i]);
    rmse_sum += bm.rmse;
    uiq_sum += bm.uiq;
    if (std::isinf(bm.sre_db)) {
      ++report.sre_sentinel_count;
    } else {
      sre_sum += bm.sre_db;
      ++finite_sre;
    }
    report.bands.push_back(bm);
  }

  report.rmse_avg = rmse_sum / static_cast<double>(pred.size());
  report.uiq_avg = uiq_sum / static_cast<double>(pred.size());
  report.sre_avg = finite_sre > 0 ? sre_sum / finite_sre
                                  : std::numeric_limits<double>::infinity();

  if (pred.size() >= 2) {
    const int h = pred[0].height, w = pred[0].width;
    Tensor sp(h, w, static_cast<int>(pred.size()));
    Tensor st(h, w, static_cast<int>(pred.size()));
    for (size_t c = 0; c < pred.size(); ++c) {
      require(pred[c].height == h && pred[c].width == w, ErrorCode::BandMismatch,
              "bands must share dimensions for the spectral stack");
      std::copy(pred[c].data.begin(), pred[c].data.end(), sp.plane(static_cast<int>(c)));
      std::copy(matched[c]->data.begin(), matched[c]->data.end(),
                st.plane(static_cast<int>(c)));
    }
    report.sam_deg = sam_degrees(sp, st, &report.sam_excluded);
  }
  return report;
}

std::string format_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %14s %12s %10s\n", "band", "rmse",
                "sre_db", "uiq");
  out << line;
  auto row = [&](const std::string& name, double r, double s, double u) {
    std::snprintf(line, sizeof(line), "%-8s %14.6f %12s %10.6f\n", name.c_str(), r,
                  fmt(s, "%.6f").c_str(), u);
    out << line;
  };
  for (const auto& b : report.bands) row(b.band_id, b.rmse, b.sre_db, b.uiq);
  row("average", report.rmse_avg, report.sre_avg, report.uiq_avg);
  std::snprintf(line, sizeof(line), "%-8s %14.6f   (excluded_pixels %lld)\n",
                "sam_deg", report.sam_deg,
                static_cast<long long>(report.sam_excluded));
  out << line;
  return out.str();
}

std::string format_kv(const MetricsReport& report) {
  std::ostringstream out;
  out << "report_version: 1\n";
  out << "bands:";
  for (const auto& b : report.bands) out << " " << b.band_id;
  out << "\n";
  for (const auto& b : report.bands) {
    out << "rmse." << b.band_id << ": " << fmt(b.rmse) << "\n";
    out << "sre." << b.band_id << ": " << fmt(b.sre_db) << "\n";
    out << "uiq." << b.band_id << ": " << fmt(b.uiq) << "\n";
  }
  out << "rmse.avg: " << fmt(report.rmse_avg) << "\n";
  out << "sre.avg: " << fmt(report.sre_avg) << "\n";
  out << "sre.sentinels: " << report.sre_sentinel_count << "\n";
  out << "uiq.avg: " << fmt(report.uiq_avg) << "\n";
  out << "sam.degrees: " << fmt(report.sam_deg) << "\n";
  out << "sam.excluded: " << report.sam_excluded << "\n";
  return out.str();
}

MetricsReport parse_kv(const std::string& text) {
  MetricsReport report;
  std::istringstream in(text);
  std::string line;
  auto to_double = [](const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
  };
  auto band_ref = [&](const std::string& id) -> BandMetrics& {
    for (auto& b : report.bands)
      if (b.band_id == id) return b;
    fail(ErrorCode::BandMismatch, "report references unlisted band " + id);
  };

  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t colon = line.find(':');
    require(colon != std::string::npos, ErrorCode::CorruptHeader,
            "report line without key: " + line);
    const std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(" \t"));

    if (key == "report_version") {
      require(std::stoi(value) == 1, ErrorCode::VersionUnsupported,
              "report version " + value);
    } else if (key == "bands") {
      std::istringstream ids(value);
      std::string id;
      while (ids >> id) report.bands.push_back(BandMetrics{id, 0, 0, 0});
    } else if (key.rfind("rmse.", 0) == 0) {
      const std::string id = key.substr(5);
      if (id == "avg") report.rmse_avg = to_double(value);
      else band_ref(id).rmse = to_double(value);
    } else if (key.rfind("sre.", 0) == 0) {
      const std::string id = key.substr(4);
      if (id == "avg") report.sre_avg = to_double(value);
      else if (id == "sentinels") report.sre_sentinel_count = std::stoi(value);
      else band_ref(id).sre_db = to_double(value);
    } else if (key.rfind("uiq.", 0) == 0) {
      const std::string id = key.substr(4);
      if (id == "avg") report.uiq_avg = to_double(value);
      else band_ref(id).uiq = to_double(value);
    } else if (key == "sam.degrees") {
      report.sam_deg = to_double(value);
    } else if (key == "sam.excluded") {
      report.sam_excluded = std::stoll(value);
    } else {
      fail(ErrorCode::CorruptHeader, "unknown report key: " + key);
    }
  }
  require(!report.bands.empty(), ErrorCode::CorruptHeader, "report lists no bands");
  return report;
}

}  // namespace s2sr
