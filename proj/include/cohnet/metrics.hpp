#pragma once

#include <optional>

#include <json.hpp>

#include "cohnet/raster.hpp"

namespace cohnet {

struct MetricReport {
  double rmse = 0.0;  // m
  std::optional<double> r2;  // absent when the reference is constant
  std::int64_t n_valid = 0;
  double bias = 0.0;  // mean(pred - ref), m
};

/// Pixels valid in pred, ref and (if given) mask.
Mask joint_mask(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask);

double rmse(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask = nullptr);
double r_squared(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask = nullptr);
MetricReport evaluate(const ScalarRaster& pred, const ScalarRaster& ref,
                      const Mask* mask = nullptr);

void to_json(nlohmann::json& j, const MetricReport& m);
void from_json(const nlohmann::json& j, MetricReport& m);

}  // namespace cohnet
