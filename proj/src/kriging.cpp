#include "ltgeo/kriging.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ltgeo/errors.hpp"

namespace ltgeo {

double VariogramModel::operator()(double h) const {
  if (h <= 0.0) return 0.0;
  return nugget + sill * (1.0 - std::exp(-h / range_deg));
}

VariogramModel fit_variogram(const std::vector<GeoCoord>& coords,
                             const Vec& values) {
  const index_t n = index_t(coords.size());
  if (n != values.size()) throw InputError("fit_variogram: size mismatch");
  if (n < 2) return {1.0, 1.0, 0.0};

  // Empirical variogram: bin pairwise (h, (dv)^2/2).
  double h_max = 0.0;
  for (index_t i = 0; i < n; ++i)
    for (index_t j = i + 1; j < n; ++j)
      h_max = std::max(h_max, coord_euclid_deg(coords[i], coords[j]));
  if (h_max <= 0.0) return {1.0, 1.0, 0.0};

  constexpr int kBins = 12;
  Arr gamma_sum = Arr::Zero(kBins);
  Arr h_sum = Arr::Zero(kBins);
  ArrX<index_t> count = ArrX<index_t>::Zero(kBins);
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = i + 1; j < n; ++j) {
      const double h = coord_euclid_deg(coords[i], coords[j]);
      if (h <= 0.0) continue;
      int b = std::min(kBins - 1, int(h / h_max * kBins));
      gamma_sum[b] += 0.5 * (values[i] - values[j]) * (values[i] - values[j]);
      h_sum[b] += h;
      count[b] += 1;
    }
  }

  std::vector<double> hs, gs, ws;
  for (int b = 0; b < kBins; ++b) {
    if (count[b] == 0) continue;
    hs.push_back(h_sum[b] / double(count[b]));
    gs.push_back(gamma_sum[b] / double(count[b]));
    ws.push_back(double(count[b]));
  }

  // Flat field: no variance to fit; fall back to geometric weighting.
  double g_peak = 0.0;
  for (double g : gs) g_peak = std::max(g_peak, g);
  const double mean_h = [&] {
    double s = 0.0, w = 0.0;
    for (std::size_t b = 0; b < hs.size(); ++b) s += hs[b] * ws[b], w += ws[b];
    return s / w;
  }();
  if (g_peak <= 0.0) return {1.0, mean_h, 0.0};

  // Grid over range; closed-form weighted LS sill for each candidate.
  double best_sse = std::numeric_limits<double>::infinity();
  VariogramModel best{g_peak, mean_h, 0.0};
  for (int k = 0; k < 48; ++k) {
    const double rho =
        h_max * std::pow(10.0, -2.0 + 2.5 * double(k) / 47.0);  // h_max/100..~3 h_max
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < hs.size(); ++b) {
      const double x = 1.0 - std::exp(-hs[b] / rho);
      num += ws[b] * gs[b] * x;
      den += ws[b] * x * x;
    }
    if (den <= 0.0) continue;
    const double s = num / den;
    if (s <= 0.0) continue;
    double sse = 0.0;
    for (std::size_t b = 0; b < hs.size(); ++b) {
      const double r = gs[b] - s * (1.0 - std::exp(-hs[b] / rho));
      sse += ws[b] * r * r;
    }
    if (sse < best_sse) {
      best_sse = sse;
      best = {s, rho, 0.0};
    }
  }
  return best;
}

Vec kriging_weights(const std::vector<GeoCoord>& coords,
                    const VariogramModel& vg, const GeoCoord& target) {
  const index_t k = index_t(coords.size());
  if (k == 0) throw InputError("kriging_weights: no samples");
  if (k == 1) return Vec::Ones(1);

  Mat a = Mat::Zero(k + 1, k + 1);
  Vec b = Vec::Zero(k + 1);
  for (index_t i = 0; i < k; ++i) {
    for (index_t j = i + 1; j < k; ++j) {
      const double g = vg(coord_euclid_deg(coords[i], coords[j]));
      a(i, j) = g;
      a(j, i) = g;
    }
    a(i, k) = 1.0;
    a(k, i) = 1.0;
    b[i] = vg(coord_euclid_deg(coords[i], target));
  }
  b[k] = 1.0;

  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible())
    throw NumericalError("kriging system is singular");
  Vec w = lu.solve(b).head(k);
  if (!w.allFinite()) throw NumericalError("kriging weights are not finite");
  return w;
}

double kriging_interpolate(const std::vector<GeoCoord>& coords,
                           const Vec& values, const GeoCoord& target) {
  const index_t n = index_t(coords.size());
  if (n == 0) throw InputError("kriging_interpolate: no samples");
  if (n != values.size())
    throw InputError("kriging_interpolate: size mismatch");
  if (!values.allFinite())
    throw InputError("kriging_interpolate: non-finite sample value");
  if (n == 1) return values[0];

  // Average duplicate coordinates so the system stays nonsingular.
  std::vector<GeoCoord> pts;
  std::vector<double> sums;
  std::vector<int> hits;
  for (index_t i = 0; i < n; ++i) {
    bool merged = false;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (coord_euclid_deg(coords[i], pts[j]) < 1e-9) {
        sums[j] += values[i];
        hits[j] += 1;
        merged = true;
        break;
      }
    }
    if (!merged) {
      pts.push_back(coords[i]);
      sums.push_back(values[i]);
      hits.push_back(1);
    }
  }
  Vec vals(index_t(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) vals[index_t(j)] = sums[j] / hits[j];
  if (pts.size() == 1) return vals[0];

  VariogramModel vg = fit_variogram(pts, vals);
  Vec w = kriging_weights(pts, vg, target);
  return w.dot(vals);
}

}  // namespace ltgeo
