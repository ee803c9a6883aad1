#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dualcorr/model.hpp"
#include "dualcorr/synthgen.hpp"

namespace dualcorr {

// One video with its query and per-frame ground truth, in memory.
struct TrainSample {
  VideoClip clip;
  QueryTokens tokens;
  std::vector<Box> gt_boxes;
  std::vector<EventSpec> events;
};

TrainSample make_train_sample(const VideoSample& sample);
TrainSample make_train_sample(const LoadedSample& sample);

// Loads every directory a manifest names, resolved against its directory.
std::vector<TrainSample> load_dataset(const std::string& manifest_path);

struct OptimizerConfig {
  double lr0 = 1e-4;
  double rho = 0.99;  // squared-gradient running-average decay
  double eps = 1e-8;
  double poly_power = 0.9;  // lr = lr0 * (1 - step/total)^power
};

// RMSProp over every parameter in a store, in creation order.
class RmsProp {
 public:
  RmsProp(num::ParameterStore& params, const OptimizerConfig& cfg);

  double learning_rate(int step, int total_steps) const;
  // Applies one update from the gradients currently in the store.
  void step(int step_index, int total_steps);

 private:
  num::ParameterStore& params_;
  OptimizerConfig cfg_;
  std::map<std::string, std::vector<double>> accum_;
};

struct TrainConfig {
  int steps = 200;
  int clip_frames = 4;   // frames sampled per step
  int frame_stride = 3;  // temporal distance between sampled frames
  uint64_t seed = 0;
  OptimizerConfig optimizer;
};

struct StepRecord {
  int step = 0;
  LossBreakdown losses;
};

struct TrainResult {
  std::vector<StepRecord> log;  // one record per step
};

// Renders one step record as the metric-log line
// "step loc cls inter cross total".
std::string format_step(const StepRecord& rec);

// Sequential seeded training loop. Each step samples one video, draws a
// clip at the configured stride, backpropagates the weighted loss, and
// applies one RMSProp update. Writes one metric line per step to
// log_stream when given. Throws std::runtime_error if the total loss ever
// turns non-finite.
TrainResult train(Model& model, num::ParameterStore& params,
                  const std::vector<TrainSample>& data,
                  const TrainConfig& cfg, std::ostream* log_stream = nullptr);

struct EvalReport {
  std::map<double, double> accu_at;  // alpha -> fraction of videos
  double success = 0;                // AUC of success rate vs IoU threshold
  double precision = 0;              // centers within the scaled pixel radius
  double consistency = 0;            // mean IoU of consecutive predictions
};

// Metrics from already-decoded boxes, one inner vector per video: accu@alpha
// counts a video only when every one of its frames clears alpha; success
// integrates the fraction of frames at or above each IoU threshold
// 0.00..1.00 step 0.05 by trapezoid; precision uses a center-distance
// radius of 20px scaled by image_width/256; consistency averages the IoU of
// consecutive predictions per video, then across videos.
EvalReport score_boxes(const std::vector<std::vector<Box>>& preds,
                       const std::vector<std::vector<Box>>& gts,
                       const std::vector<double>& alphas, int image_w);

// Inference over every frame of every video (videos evaluated in parallel,
// reduced in index order), then score_boxes on the decoded predictions.
EvalReport evaluate(const Model& model, const std::vector<TrainSample>& data,
                    const std::vector<double>& alphas = {0.4, 0.5, 0.6});

std::string to_key_value(const EvalReport& report);
std::string to_json(const EvalReport& report);

struct AblationVariant {
  std::string name;
  ModelConfig config;
  TrainConfig train;
};

struct AblationRow {
  std::string name;
  EvalReport report;
  double final_total = 0;
};

// Trains each variant from an identical seeded initialization and
// evaluates it on held-out data.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& grid,
                                      const std::vector<TrainSample>& train_set,
                                      const std::vector<TrainSample>& eval_set,
                                      uint64_t seed);

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace dualcorr
