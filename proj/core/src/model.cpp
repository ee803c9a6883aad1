#include "dualcorr/model.hpp"

#include <stdexcept>

namespace dualcorr {

using num::Tensor;

Model::Model(const ModelConfig& cfg, num::ParameterStore& params, Rng& rng)
    : cfg_(cfg),
      video_enc_(cfg.encoder, params, rng),
      query_enc_(cfg.encoder, params, rng),
      fusion_(make_fusion_params(cfg.encoder.feature_dim, params, rng)),
      head_(cfg.encoder.feature_dim, cfg.grounding, params, rng) {}

Model::ClipForward Model::forward(const VideoClip& clip,
                                  const QueryTokens& query) const {
  ClipForward out;
  out.patch_maps = video_enc_.encode(clip);
  out.words = query_enc_.encode(query);
  out.fused.reserve(out.patch_maps.size());
  out.preds.reserve(out.patch_maps.size());
  for (const auto& pm : out.patch_maps) {
    out.fused.push_back(attend(pm, out.words, fusion_));
    out.preds.push_back(head_.predict(out.fused.back(), pm.grid_h, pm.grid_w));
  }
  return out;
}

Model::LossResult Model::loss(const VideoClip& clip, const QueryTokens& query,
                              const std::vector<GroundTruthBox>& gts,
                              std::uint64_t sample_seed) const {
  if (gts.size() != clip.frames.size()) {
    throw std::invalid_argument("loss: " + std::to_string(gts.size()) +
                                " boxes for " +
                                std::to_string(clip.frames.size()) +
                                " frames");
  }
  const auto fwd = forward(clip, query);
  const auto& w = cfg_.weights;
  const double t_count = static_cast<double>(clip.frames.size());

  LossResult result;
  Tensor total = Tensor::scalar(0.0);

  if (w.lambda_loc > 0.0) {
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < fwd.preds.size(); ++i) {
      acc = num::add(acc, loc_loss(fwd.preds[i], gts[i]));
    }
    acc = num::mul_scalar(acc, 1.0 / t_count);
    result.parts.loc = acc.value();
    total = num::add(total, num::mul_scalar(acc, w.lambda_loc));
  }
  if (w.lambda_cls > 0.0) {
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < fwd.preds.size(); ++i) {
      acc = num::add(acc, cls_loss(fwd.preds[i], gts[i]));
    }
    acc = num::mul_scalar(acc, 1.0 / t_count);
    result.parts.cls = acc.value();
    total = num::add(total, num::mul_scalar(acc, w.lambda_cls));
  }
  if (w.lambda_inter > 0.0) {
    std::vector<NormBox> norm_boxes;
    const std::vector<NormBox>* boxes_ptr = nullptr;
    if (cfg_.correspondence.inter_align == InterAlign::sparse) {
      norm_boxes.reserve(gts.size());
      for (const auto& gt : gts) {
        norm_boxes.push_back(
            {gt.box.x_min / cfg_.grounding.image_w,
             gt.box.y_min / cfg_.grounding.image_h,
             gt.box.x_max / cfg_.grounding.image_w,
             gt.box.y_max / cfg_.grounding.image_h});
      }
      boxes_ptr = &norm_boxes;
    }
    auto inter = inter_loss(fwd.patch_maps, cfg_.correspondence, boxes_ptr);
    result.parts.inter = inter.loss.value();
    result.degenerate_pairs = inter.degenerate_pairs;
    total = num::add(total, num::mul_scalar(inter.loss, w.lambda_inter));
  }
  if (w.lambda_cross > 0.0) {
    auto cc = cfg_.correspondence;
    cc.rng_seed = Rng::mix(cc.rng_seed, sample_seed);
    auto cross = cross_loss(fwd.patch_maps, fwd.words, cc);
    result.parts.cross = cross.value();
    total = num::add(total, num::mul_scalar(cross, w.lambda_cross));
  }

  result.total = total;
  // Logged total is the graph value itself, so the recomposition identity
  // (total == sum of weighted parts) genuinely checks the wiring.
  result.parts.total = total.value();
  return result;
}

std::vector<SelectedBox> Model::infer_clip(const VideoClip& clip,
                                           const QueryTokens& query) const {
  const auto fwd = forward(clip, query);
  std::vector<SelectedBox> out;
  out.reserve(fwd.preds.size());
  for (const auto& pred : fwd.preds) out.push_back(infer(pred));
  return out;
}

}  // namespace dualcorr
