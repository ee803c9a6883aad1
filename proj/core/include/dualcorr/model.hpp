#pragma once

#include <cstdint>
#include <vector>

#include "dualcorr/correspondence.hpp"
#include "dualcorr/encoders.hpp"
#include "dualcorr/fusion.hpp"
#include "dualcorr/grounding.hpp"
#include "dualcorr/rng.hpp"
#include "dualcorr/serialize.hpp"

namespace dualcorr {

struct LossWeights {
  double lambda_loc = 5.0;
  double lambda_cls = 1.0;
  double lambda_inter = 1.0;
  double lambda_cross = 1.0;
};

// Raw (unweighted) component values; total carries the weights:
// total = lambda_loc*loc + lambda_cls*cls + lambda_inter*inter +
// lambda_cross*cross.
struct LossBreakdown {
  double loc = 0, cls = 0, inter = 0, cross = 0, total = 0;
};

struct ModelConfig {
  EncoderConfig encoder;
  CorrespondenceConfig correspondence;
  GroundingConfig grounding;
  LossWeights weights;
};

// Full pipeline: patch/word encoders, cross-modal attention, grounding head,
// and the two correspondence losses computed on pre-fusion patch features.
class Model {
 public:
  Model(const ModelConfig& cfg, num::ParameterStore& params, Rng& rng);

  struct ClipForward {
    std::vector<PatchFeatureMap> patch_maps;  // per frame, pre-fusion
    WordFeatures words;
    std::vector<FusedFeatureMap> fused;      // per frame
    std::vector<GroundingPrediction> preds;  // per frame
  };
  ClipForward forward(const VideoClip& clip, const QueryTokens& query) const;

  struct LossResult {
    num::Tensor total;    // scalar graph root
    LossBreakdown parts;  // raw component values + weighted total
    int degenerate_pairs = 0;
  };
  // Training loss for one clip; gts has one box per frame. Components with
  // zero weight are skipped entirely and reported as 0. sample_seed feeds
  // the seeded random cross-modal variant so different samples draw
  // different selections.
  LossResult loss(const VideoClip& clip, const QueryTokens& query,
                  const std::vector<GroundTruthBox>& gts,
                  std::uint64_t sample_seed = 0) const;

  std::vector<SelectedBox> infer_clip(const VideoClip& clip,
                                      const QueryTokens& query) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  VideoEncoder video_enc_;
  QueryEncoder query_enc_;
  FusionParams fusion_;
  GroundingHead head_;
};

}  // namespace dualcorr
