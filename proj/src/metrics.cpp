#include "cohnet/metrics.hpp"

#include <cmath>

namespace cohnet {

Mask joint_mask(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask) {
  if (!pred.same_shape(ref)) fail(ErrorKind::ShapeMismatch, "prediction and reference differ");
  Mask m = pred.valid() && ref.valid();
  if (mask) {
    if (mask->rows() != m.rows() || mask->cols() != m.cols())
      fail(ErrorKind::ShapeMismatch, "mask shape differs from rasters");
    m = m && *mask;
  }
  return m;
}

double rmse(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask) {
  const Mask m = joint_mask(pred, ref, mask);
  const auto n = m.count();
  if (n == 0) fail(ErrorKind::NoValidPixels, "RMSE over zero valid pixels");
  const auto diff = pred.values().cast<double>() - ref.values().cast<double>();
  return std::sqrt(m.select(diff.square(), 0.0).sum() / static_cast<double>(n));
}

double r_squared(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask) {
  const Mask m = joint_mask(pred, ref, mask);
  const auto n = m.count();
  if (n < 2) fail(ErrorKind::NoValidPixels, "R^2 needs at least two valid pixels");
  const Grid<double> y = ref.values().cast<double>();
  const Grid<double> yhat = pred.values().cast<double>();
  const double mean = m.select(y, 0.0).sum() / static_cast<double>(n);
  const double ss_tot = m.select((y - mean).square(), 0.0).sum();
  if (ss_tot == 0.0) fail(ErrorKind::Undefined, "R^2 undefined for a constant reference");
  const double ss_res = m.select((y - yhat).square(), 0.0).sum();
  return 1.0 - ss_res / ss_tot;
}

MetricReport evaluate(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask) {
  MetricReport r;
  const Mask m = joint_mask(pred, ref, mask);
  r.n_valid = m.count();
  r.rmse = rmse(pred, ref, mask);
  const auto diff = pred.values().cast<double>() - ref.values().cast<double>();
  r.bias = m.select(diff, 0.0).sum() / static_cast<double>(r.n_valid);
  try {
    r.r2 = r_squared(pred, ref, mask);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Undefined && e.kind() != ErrorKind::NoValidPixels) throw;
  }
  return r;
}

void to_json(nlohmann::json& j, const MetricReport& m) {
  j = nlohmann::json{{"rmse", m.rmse}, {"n_valid", m.n_valid}, {"bias", m.bias}};
  j["r2"] = m.r2 ? nlohmann::json(*m.r2) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, MetricReport& m) {
  m.rmse = j.at("rmse").get<double>();
  m.n_valid = j.at("n_valid").get<std::int64_t>();
  m.bias = j.at("bias").get<double>();
  if (j.at("r2").is_null())
    m.r2.reset();
  else
    m.r2 = j.at("r2").get<double>();
}

}  // namespace cohnet
