#pragma once

#include <string>
#include <vector>

#include "dualcorr/rng.hpp"
#include "dualcorr/serialize.hpp"
#include "dualcorr/tensor.hpp"

namespace dualcorr {

struct EncoderConfig {
  int patch_stride = 4;
  // Pixel window each patch reads, centered on its stride cell and
  // zero-padded at image borders. 0 means the window equals the stride
  // (disjoint patches); larger values overlap like a conv receptive field.
  int patch_window = 0;
  int feature_dim = 16;
  int channels = 3;
  int vocab_size = 32;
  // Longest query the position table supports. Word order is what separates
  // the referent mention from distractor mentions in templated queries, so
  // the query encoder is position-aware like the backbones it stands in for.
  int max_words = 16;
};

// T frames of H x W x C floats in [0,1] plus their positions in the source
// video. All frames must share one shape.
struct VideoClip {
  std::vector<num::Tensor> frames;
  std::vector<int> frame_indices;
};

struct QueryTokens {
  std::vector<int> token_ids;
  std::vector<std::string> raw_words;
};

// P x D patch features for one frame, patches ordered along the first row,
// then the second: patch p sits at cell (p / grid_w, p % grid_w).
struct PatchFeatureMap {
  num::Tensor features;
  int grid_h = 0;
  int grid_w = 0;
};

struct WordFeatures {
  num::Tensor features;  // S x D
};

// Patchify + learnable affine + tanh. Stands in for a conv backbone; the
// losses downstream only care about getting a P x D trainable feature grid.
class VideoEncoder {
 public:
  VideoEncoder(const EncoderConfig& cfg, num::ParameterStore& params,
               Rng& rng);

  std::vector<PatchFeatureMap> encode(const VideoClip& clip) const;
  PatchFeatureMap encode_frame(const num::Tensor& frame) const;

 private:
  int window() const;

  EncoderConfig cfg_;
  num::Tensor w_;  // (window*window*C) x D
  num::Tensor b_;  // D
};

// Embedding lookup + learned position offsets + one affine mixing layer +
// tanh.
class QueryEncoder {
 public:
  QueryEncoder(const EncoderConfig& cfg, num::ParameterStore& params,
               Rng& rng);

  WordFeatures encode(const QueryTokens& tokens) const;

  num::Tensor embedding_table() const { return embed_; }

 private:
  EncoderConfig cfg_;
  num::Tensor embed_;  // V x D
  num::Tensor pos_;    // max_words x D
  num::Tensor w_;      // D x D
  num::Tensor b_;      // D
};

}  // namespace dualcorr
