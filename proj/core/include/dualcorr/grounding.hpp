#pragma once

#include <array>

#include "dualcorr/fusion.hpp"
#include "dualcorr/rng.hpp"
#include "dualcorr/serialize.hpp"
#include "dualcorr/tensor.hpp"

namespace dualcorr {

// Pixel-space axis-aligned box.
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
};

struct GroundingConfig {
  int image_h = 32;
  int image_w = 32;
  double anchor_w = 10.0;  // pixels; exp(0) logits predict this size
  double anchor_h = 10.0;
};

// Per-cell box parameterization: center = (cell + sigmoid(tx,ty)) * cell
// size, size = anchor * exp(tw,th). raw holds [tx ty tw th conf] per cell.
struct GroundingPrediction {
  num::Tensor raw;          // P x 5
  num::Tensor boxes_raw;    // P x 4, the regression slice
  num::Tensor conf_logits;  // P
  int grid_h = 0, grid_w = 0;
  GroundingConfig cfg;
};

struct GroundTruthBox {
  Box box;
  int responsible_cell = 0;
};

struct SelectedBox {
  Box box;
  int cell = 0;
  double prob = 0.0;  // softmax mass of the selected cell
};

// Grid cell containing the box center; centers exactly on a cell boundary
// go to the lower-index cell.
int responsible_cell(const Box& box, int grid_h, int grid_w,
                     const GroundingConfig& cfg);

// Validates bounds and fills the responsible cell.
GroundTruthBox make_ground_truth(const Box& box, int grid_h, int grid_w,
                                 const GroundingConfig& cfg);

// Algebraic inverse of decoding: raw [tx ty tw th] that reproduce the box
// at its responsible cell. Center offsets are clamped a hair inside (0,1)
// before the logit so boundary centers stay finite.
std::array<double, 4> encode_box(const Box& box, int cell, int grid_h,
                                 int grid_w, const GroundingConfig& cfg);

// Pixel box for one cell's raw parameters, clipped to image bounds.
Box decode_cell(int cell, const std::array<double, 4>& raw, int grid_h,
                int grid_w, const GroundingConfig& cfg);

// One affine map from fused features to 5 outputs per cell.
class GroundingHead {
 public:
  GroundingHead(int feature_dim, const GroundingConfig& cfg,
                num::ParameterStore& params, Rng& rng);

  GroundingPrediction predict(const FusedFeatureMap& f, int grid_h,
                              int grid_w) const;

 private:
  GroundingConfig cfg_;
  num::Tensor w_;  // D x 5
  num::Tensor b_;  // 5
};

// MSE over the 4 raw parameters at the responsible cell only.
num::Tensor loc_loss(const GroundingPrediction& pred, const GroundTruthBox& gt);

// Categorical cross-entropy of softmax(conf_logits) against the one-hot
// responsible cell.
num::Tensor cls_loss(const GroundingPrediction& pred, const GroundTruthBox& gt);

// Decoded box of the highest-confidence cell; ties pick the lowest index.
SelectedBox infer(const GroundingPrediction& pred);

double iou(const Box& a, const Box& b);

}  // namespace dualcorr
