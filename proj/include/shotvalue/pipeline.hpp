#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "shotvalue/dpgmm.hpp"
#include "shotvalue/esv.hpp"
#include "shotvalue/outcome.hpp"
#include "shotvalue/synth.hpp"
#include "shotvalue/tracking.hpp"
#include "shotvalue/trajectory.hpp"

namespace shotvalue {

// Everything a pipeline run needs. Loaded from a flat "key = value" file;
// see config_keys() for the accepted keys.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string tracking;   // empty: <out_dir>/tracking.csv
  std::string metadata;   // empty: <out_dir>/metadata.csv
  std::string model_dir;  // empty: <out_dir>/models
  double split_fraction = 0.2;  // held-out share, chosen by hashing shot ids
  bool timestamp = true;        // "# generated ..." first line in CSV outputs
  int threads = 0;              // metrics workers; 0 uses every core

  CourtGeometry geometry;
  std::size_t n_shots = 2000;
  SynthConfig synth;  // geometry and seed are taken from the fields above
  ParseOptions parse;
  TrajectoryConfig trajectory;

  double gmm_alpha = 1.0;
  FitConfig gmm{.truncation = 12, .restarts = 2};
  OutcomeConfig outcome;

  McConfig mc;
  ReceiverMarginal marginal = ReceiverMarginal::conditional;
  double esv_noise_var = kDefaultObservationNoise;

  std::string heatmap_metric = "vast";
  GridSpec grid;

  std::string tracking_path() const;
  std::string metadata_path() const;
  std::string model_path() const;

  // Applies one key. Throws ConfigError for unknown keys and bad values.
  void set(std::string_view key, std::string_view value);
  // Throws ConfigError when any value is out of range.
  void validate() const;
};

const std::vector<std::string>& config_keys();

// Throws ConfigError (with the line number) for malformed or unknown keys.
PipelineConfig load_pipeline_config(std::istream& in);
// Throws IoError when the file cannot be opened.
PipelineConfig load_pipeline_config_file(const std::string& path);

// Progress lines, one per call.
using Logger = std::function<void(const std::string&)>;

// Synthetic corpus: tracking.csv, metadata.csv, truth.csv in out_dir.
void cmd_simulate(const PipelineConfig& config, const Logger& log = {});
// encodings.csv and features.csv in out_dir.
void cmd_encode(const PipelineConfig& config, const Logger& log = {});
// One mixture per (shot type, bounce flag) group in model_dir plus
// gmm_report.csv in out_dir. Groups with too few rows are skipped.
void cmd_fit_gmm(const PipelineConfig& config, const Logger& log = {});
// Serve and rally outcome models in model_dir, outcome_report.csv and
// calibration.csv in out_dir.
void cmd_fit_outcome(const PipelineConfig& config, const Logger& log = {});
// ESV of one shot from the samples recorded up to t seconds after impact.
EsvEstimate cmd_esv(const PipelineConfig& config, const std::string& shot_id, double t);
// shot_metrics.csv and metrics.csv in out_dir.
void cmd_metrics(const PipelineConfig& config, const Logger& log = {});
// heatmap_<metric>.csv in out_dir, from shot_metrics.csv.
void cmd_heatmap(const PipelineConfig& config, const Logger& log = {});

// Runs a command by its CLI name. Throws InvalidArgument for unknown names
// and for "esv", which needs arguments.
void run_command(std::string_view name, const PipelineConfig& config, const Logger& log = {});

// True when the shot belongs to the held-out split.
bool is_heldout(std::uint64_t seed, std::string_view shot_id, double fraction);

}  // namespace shotvalue
