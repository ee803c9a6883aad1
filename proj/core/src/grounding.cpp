#include "dualcorr/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualcorr {

using num::Shape;
using num::Tensor;

namespace {

// Cell index along one axis for a center coordinate; boundary values go to
// the lower-index cell.
int axis_cell(double center, double cell_size, int cells) {
  const double pos = center / cell_size;
  int c = static_cast<int>(std::ceil(pos)) - 1;
  return std::clamp(c, 0, cells - 1);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

int responsible_cell(const Box& box, int grid_h, int grid_w,
                     const GroundingConfig& cfg) {
  const double cell_w = static_cast<double>(cfg.image_w) / grid_w;
  const double cell_h = static_cast<double>(cfg.image_h) / grid_h;
  const int gx = axis_cell(box.center_x(), cell_w, grid_w);
  const int gy = axis_cell(box.center_y(), cell_h, grid_h);
  return gy * grid_w + gx;
}

GroundTruthBox make_ground_truth(const Box& box, int grid_h, int grid_w,
                                 const GroundingConfig& cfg) {
  if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
    throw std::invalid_argument("ground truth box has non-positive extent");
  }
  if (box.x_min < 0 || box.y_min < 0 || box.x_max > cfg.image_w ||
      box.y_max > cfg.image_h) {
    throw std::invalid_argument("ground truth box outside image bounds");
  }
  return {box, responsible_cell(box, grid_h, grid_w, cfg)};
}

std::array<double, 4> encode_box(const Box& box, int cell, int grid_h,
                                 int grid_w, const GroundingConfig& cfg) {
  const double cell_w = static_cast<double>(cfg.image_w) / grid_w;
  const double cell_h = static_cast<double>(cfg.image_h) / grid_h;
  const int gx = cell % grid_w;
  const int gy = cell / grid_w;
  constexpr double kEdge = 1e-9;
  const double ox =
      std::clamp(box.center_x() / cell_w - gx, kEdge, 1.0 - kEdge);
  const double oy =
      std::clamp(box.center_y() / cell_h - gy, kEdge, 1.0 - kEdge);
  return {logit(ox), logit(oy), std::log(box.width() / cfg.anchor_w),
          std::log(box.height() / cfg.anchor_h)};
}

Box decode_cell(int cell, const std::array<double, 4>& raw, int grid_h,
                int grid_w, const GroundingConfig& cfg) {
  const double cell_w = static_cast<double>(cfg.image_w) / grid_w;
  const double cell_h = static_cast<double>(cfg.image_h) / grid_h;
  const int gx = cell % grid_w;
  const int gy = cell / grid_w;
  const double sx = 1.0 / (1.0 + std::exp(-raw[0]));
  const double sy = 1.0 / (1.0 + std::exp(-raw[1]));
  const double cx = (gx + sx) * cell_w;
  const double cy = (gy + sy) * cell_h;
  const double w = cfg.anchor_w * std::exp(raw[2]);
  const double h = cfg.anchor_h * std::exp(raw[3]);
  Box box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(cfg.image_w));
  box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(cfg.image_w));
  box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(cfg.image_h));
  box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(cfg.image_h));
  return box;
}

GroundingHead::GroundingHead(int feature_dim, const GroundingConfig& cfg,
                             num::ParameterStore& params, Rng& rng)
    : cfg_(cfg) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  w_ = params.create("head.w", {feature_dim, 5}, rng, scale);
  b_ = params.create_const("head.b", {5}, 0.0);
}

GroundingPrediction GroundingHead::predict(const FusedFeatureMap& f,
                                           int grid_h, int grid_w) const {
  const int p_count = f.features.shape()[0];
  if (p_count != grid_h * grid_w) {
    throw std::invalid_argument("predict: " + std::to_string(p_count) +
                                " features for a " + std::to_string(grid_h) +
                                "x" + std::to_string(grid_w) + " grid");
  }
  GroundingPrediction pred;
  pred.grid_h = grid_h;
  pred.grid_w = grid_w;
  pred.cfg = cfg_;
  pred.raw = num::add_row_broadcast(num::matmul(f.features, w_), b_);
  pred.boxes_raw = num::slice_cols(pred.raw, 0, 4);
  pred.conf_logits = num::reshape(num::slice_cols(pred.raw, 4, 5), {p_count});
  return pred;
}

Tensor loc_loss(const GroundingPrediction& pred, const GroundTruthBox& gt) {
  const int p_count = pred.boxes_raw.shape()[0];
  if (gt.responsible_cell < 0 || gt.responsible_cell >= p_count) {
    throw std::out_of_range("loc_loss: responsible cell " +
                            std::to_string(gt.responsible_cell) +
                            " outside grid of " + std::to_string(p_count));
  }
  const auto target = encode_box(gt.box, gt.responsible_cell, pred.grid_h,
                                 pred.grid_w, pred.cfg);
  auto row = num::gather_rows(pred.boxes_raw, {gt.responsible_cell});
  auto t = Tensor::from_values({1, 4}, {target[0], target[1], target[2],
                                        target[3]});
  auto d = num::sub(row, t);
  return num::mean(num::mul(d, d));
}

Tensor cls_loss(const GroundingPrediction& pred, const GroundTruthBox& gt) {
  const int p_count = pred.conf_logits.shape()[0];
  if (gt.responsible_cell < 0 || gt.responsible_cell >= p_count) {
    throw std::out_of_range("cls_loss: responsible cell " +
                            std::to_string(gt.responsible_cell) +
                            " outside grid of " + std::to_string(p_count));
  }
  return num::sub(num::logsumexp(pred.conf_logits, 0),
                  num::at(pred.conf_logits, gt.responsible_cell));
}

SelectedBox infer(const GroundingPrediction& pred) {
  const auto logits = pred.conf_logits.values();
  int best = 0;
  for (int p = 1; p < static_cast<int>(logits.size()); ++p) {
    if (logits[p] > logits[best]) best = p;  // ties keep the lowest index
  }
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - logits[best]);

  const auto raw = pred.boxes_raw.values();
  SelectedBox out;
  out.cell = best;
  out.prob = 1.0 / denom;
  out.box = decode_cell(best,
                        {raw[best * 4 + 0], raw[best * 4 + 1],
                         raw[best * 4 + 2], raw[best * 4 + 3]},
                        pred.grid_h, pred.grid_w, pred.cfg);
  return out;
}

double iou(const Box& a, const Box& b) {
  const double ix =
      std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy =
      std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

}  // namespace dualcorr
