#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "valvekit/metrics/evaluate.hpp"
#include "valvekit/morphometry/landmarks.hpp"

namespace valvekit {

struct OrientationRecord {
    std::string scan_id;
    int frame = 0;
    double offset_angle = 0.0;  // degrees
    bool flipped = false;
};

std::vector<OrientationResult> orientation_results(std::span<const OrientationRecord> records);

// CSV: comma-separated, header row, '.' decimals. Columns are matched by
// header name, so extra columns are ignored and order is free.
std::string metric_records_csv(std::span<const MetricRecord> records);
std::string measurement_records_csv(std::span<const MeasurementRecord> records);
std::string orientation_records_csv(std::span<const OrientationRecord> records);

std::vector<MetricRecord> parse_metric_records_csv(const std::string& text, const std::string& origin = "input");
std::vector<MeasurementRecord> parse_measurement_records_csv(const std::string& text,
                                                             const std::string& origin = "input");
std::vector<OrientationRecord> parse_orientation_records_csv(const std::string& text,
                                                             const std::string& origin = "input");

std::string metric_records_json(std::span<const MetricRecord> records);
std::string measurement_records_json(std::span<const MeasurementRecord> records);
std::string orientation_records_json(std::span<const OrientationRecord> records);

std::vector<MetricRecord> parse_metric_records_json(const std::string& text, const std::string& origin = "input");
std::vector<MeasurementRecord> parse_measurement_records_json(const std::string& text,
                                                              const std::string& origin = "input");
std::vector<OrientationRecord> parse_orientation_records_json(const std::string& text,
                                                              const std::string& origin = "input");

/// File helpers choosing JSON for a .json extension and CSV otherwise.
void save_metric_records(const std::filesystem::path& path, std::span<const MetricRecord> records);
void save_measurement_records(const std::filesystem::path& path, std::span<const MeasurementRecord> records);
void save_orientation_records(const std::filesystem::path& path, std::span<const OrientationRecord> records);
std::vector<MetricRecord> load_metric_records(const std::filesystem::path& path);
std::vector<MeasurementRecord> load_measurement_records(const std::filesystem::path& path);
std::vector<OrientationRecord> load_orientation_records(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace valvekit
