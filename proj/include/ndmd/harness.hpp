#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ndmd/dense.hpp"
#include "ndmd/inr.hpp"
#include "ndmd/trajectory.hpp"

namespace ndmd {

/// Relative error of one predicted trajectory against the truth.
struct RmseSeries {
  /// Per step: ||pred - truth||^2 / ||truth||^2 over unmasked cells. Steps
  /// where the truth norm vanishes fall back to the absolute mean squared
  /// error and are flagged below.
  std::vector<double> per_step;
  std::vector<bool> absolute;
  double mean = 0.0;  // over steps
};

/// Per-step relative squared error. prediction and truth are T x N; a
/// non-empty solid mask (1 = solid) drops those cells from both.
RmseSeries rmse(const RealMat& prediction, const RealMat& truth,
                const RealMat& solid = RealMat());

/// Mean of the per-trajectory means.
double aggregate_rmse(const std::vector<RmseSeries>& series);

/// Middle order statistic; mean of the central pair for even sizes.
double median(std::vector<double> values);

/// Median over repeats of (one projection + a rollout of `frames` steps),
/// divided by the frame count, in milliseconds. Bank and spectrum are
/// evaluated once outside the timed section, as deployment amortizes them.
double time_per_frame(const InrModel& model, const Trajectory& traj,
                      int frames, int repeats);

/// A trained model plus the configuration that produced it.
struct Checkpoint {
  InrModel model;
  TrainConfig config;
};

/// Binary trajectory container: magic "NDMD", version, JSON metadata, then
/// 64-bit little-endian frame payloads laid out [trajectory][time][channel]
/// [row-major space], each followed by one mask byte per cell when that
/// trajectory carries a solid mask. Writes go to a temporary file renamed
/// into place. Malformed input throws IoError with the byte offset.
void save_dataset(const std::string& path, const TrajectorySet& set);
TrajectorySet load_dataset(const std::string& path);

/// Model container: magic "NDMK", version, JSON metadata (config, network
/// shapes, normalization, loss curves), then every stage's parameters as
/// 64-bit little-endian floats in declaration order. load(save(m)) is
/// bit-exact.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// One row per grid point: coordinates, then Re/Im of every bank column at
/// the given code, printed so a re-parse reproduces the doubles exactly.
void export_modes(const InrModel& model, const std::vector<double>& code,
                  const std::string& path);

/// One row per code: the code entries, then growth rate and angular
/// frequency of every pair.
void export_spectrum(const InrModel& model,
                     const std::vector<std::vector<double>>& codes,
                     const std::string& path);

/// Evaluation summary written by `eval`: rMSE per held-out trajectory,
/// aggregate, timing, parameter count, and the config echo.
struct RunReport {
  std::string benchmark;
  long param_count = 0;
  double aggregate = 0.0;
  std::vector<std::vector<double>> codes;  // per evaluated trajectory
  std::vector<RmseSeries> series;
  double ms_per_frame = 0.0;
  double wall_seconds = 0.0;
  nlohmann::json config;
};

nlohmann::json report_to_json(const RunReport& report);
void save_report(const std::string& path, const RunReport& report);

/// Writes bytes through a temp file + rename so readers never observe a
/// partially written target.
void write_text_atomic(const std::string& path, const std::string& bytes);

/// Structural validator for the subset of JSON Schema the report schema
/// uses: type, properties, required, items. On failure returns false and
/// writes the offending path into `why`.
bool validate_json(const nlohmann::json& doc, const nlohmann::json& schema,
                   std::string* why = nullptr);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace ndmd
