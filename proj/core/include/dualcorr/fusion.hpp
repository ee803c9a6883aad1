#pragma once

#include "dualcorr/encoders.hpp"
#include "dualcorr/rng.hpp"
#include "dualcorr/serialize.hpp"
#include "dualcorr/tensor.hpp"

namespace dualcorr {

// Attention parameters, bias-free. The scoring projection w is a single
// D-vector: the score must come out scalar per patch-word pair.
struct FusionParams {
  num::Tensor w;    // D
  num::Tensor w_v;  // D x D
  num::Tensor w_q;  // D x D
};

FusionParams make_fusion_params(int feature_dim, num::ParameterStore& params,
                                Rng& rng);

// P x D word-conditioned patch features plus the P x S attention that
// produced them. Attention rows are convex weights over the S words.
struct FusedFeatureMap {
  num::Tensor features;   // P x D
  num::Tensor attention;  // P x S
};

// score(p,s) = w . tanh(W_v v_p + W_q q_s), attention = softmax over s,
// fused feature f_p = sum_s attention[p,s] q_s.
FusedFeatureMap attend(const PatchFeatureMap& v, const WordFeatures& q,
                       const FusionParams& params);

}  // namespace dualcorr
