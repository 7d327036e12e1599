#pragma once

#include <cstdint>
#include <string>

#include "covplan/basis.hpp"
#include "covplan/planner.hpp"
#include "covplan/predictor.hpp"
#include "covplan/simulator.hpp"
#include "covplan/synthetic.hpp"

namespace covplan {

struct CalibrationConfig {
  std::string method = "post_bloat";  // or "conformal"
  double confidence = 0.99;           // post-bloat guarantee level
  double epsilon = 0.1;               // conformal miscoverage target
  long n_calibration = 5000;
  long n_heldout = 20000;
};

struct PredictorConfig {
  int hidden1 = 64;
  int hidden2 = 64;
  LossConfig loss;
  TrainConfig train;
};

struct SimulatorConfig {
  int n_uncontrolled = 3;
  int trials = 50;
  double duration = 20.0;
  double replan_period = 1.0;
  bool rear_ignore = true;
  double prediction_inflation = -1.0;
  double lane_change_clearance = 40.0;
  double lane_change_margin = 20.0;
  double lane_change_gap = 12.0;
  double lane_change_hysteresis = 2.0;
  double trap_longitudinal_gap = 25.0;
  double trap_side_gap = 15.0;
};

struct SyntheticConfig {
  BehaviorPolicy policy;
  ScenarioSamplerConfig sampler;
  std::size_t corpus_size = 2000;
  std::size_t label_size = 10000;
};

// One fingerprintable source of truth for every stage.
struct PipelineConfig {
  std::uint64_t master_seed = 20260810;
  GeometryConfig geometry;
  int lane_count = 3;
  double lane_width = 3.7;
  SyntheticConfig synthetic;
  PredictorConfig predictor;
  CalibrationConfig calibration;
  MpcConfig planner;
  SimulatorConfig simulator;

  LaneGeometry lanes() const { return LaneGeometry::uniform(lane_count, lane_width); }
  TrialConfig trial_config() const;
  // Hex FNV-1a of the canonical JSON serialization.
  std::string fingerprint() const;
  // Cross-field consistency (planner horizon/dt match the geometry).
  void validate() const;
};

PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);
std::string config_to_json_string(const PipelineConfig& cfg);
PipelineConfig config_from_json_string(const std::string& text);

}  // namespace covplan
