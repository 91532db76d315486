#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "photocov/evaluation.hpp"
#include "photocov/mvs_pipeline.hpp"
#include "photocov/mvs_uncertainty.hpp"

namespace photocov {

/// One row per bin: pair_id,cost_min,cost_max,bin,cost_center,sigma,count.
std::string c_sigma_tables_to_csv(std::span<const CSigmaTable> tables);
/// Throws MalformedHeader.
std::vector<CSigmaTable> c_sigma_tables_from_csv(const std::string& text);

void write_c_sigma_tables(const std::filesystem::path& path, std::span<const CSigmaTable> tables);
std::vector<CSigmaTable> read_c_sigma_tables(const std::filesystem::path& path);

/// point_id,reference_camera_id,col,row,x,y,z,view_count,agree_mask,pair_ids
/// with pair ids separated by ';'. Doubles use the shortest round-trip form.
std::string dense_points_to_csv(std::span<const DensePoint> points);
/// Throws MalformedHeader.
std::vector<DensePoint> dense_points_from_csv(const std::string& text);

void write_dense_points(const std::filesystem::path& path, std::span<const DensePoint> points);
std::vector<DensePoint> read_dense_points(const std::filesystem::path& path);

/// pair_id,point_id,view_count,cost,residual.
std::string samples_to_csv(std::span<const NViewSample> samples);

/// Single-row metric table with a leading label column.
std::string metric_report_to_csv(const MetricReport& report, const std::string& label);

/// scale,bounding_rate,mean_err,rmse rows; gnuplot reads the same file with
/// `set datafile separator ','`.
std::string auc_curve_to_csv(const AucCurve& curve);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace photocov
