#include "dualcorr/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace dualcorr {

using num::Tensor;

FusionParams make_fusion_params(int feature_dim, num::ParameterStore& params,
                                Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  FusionParams p;
  p.w = params.create("fusion.w", {feature_dim}, rng, scale);
  p.w_v = params.create("fusion.w_v", {feature_dim, feature_dim}, rng, scale);
  p.w_q = params.create("fusion.w_q", {feature_dim, feature_dim}, rng, scale);
  return p;
}

FusedFeatureMap attend(const PatchFeatureMap& v, const WordFeatures& q,
                       const FusionParams& params) {
  const auto& vf = v.features;
  const auto& qf = q.features;
  if (vf.rank() != 2 || qf.rank() != 2 || vf.shape()[1] != qf.shape()[1]) {
    throw std::invalid_argument("attend: feature dims disagree, " +
                                num::shape_str(vf.shape()) + " vs " +
                                num::shape_str(qf.shape()));
  }
  const int d = vf.shape()[1];
  if (params.w_v.shape() != num::Shape{d, d}) {
    throw std::invalid_argument("attend: params built for D=" +
                                std::to_string(params.w_v.shape()[0]) +
                                ", features have D=" + std::to_string(d));
  }
  const int p_count = vf.shape()[0];
  const int s_count = qf.shape()[0];

  // Row p of vp is W_v v_p; row s of qp is W_q q_s.
  auto vp = num::matmul(vf, num::transpose(params.w_v));
  auto qp = num::matmul(qf, num::transpose(params.w_q));
  auto joint = num::tanh(num::pairwise_sum_rows(vp, qp));  // (P*S) x D
  auto scores = num::reshape(num::matmul(joint, num::reshape(params.w, {d, 1})),
                             {p_count, s_count});

  FusedFeatureMap out;
  out.attention = num::softmax(scores, 1);
  out.features = num::matmul(out.attention, qf);
  return out;
}

}  // namespace dualcorr
