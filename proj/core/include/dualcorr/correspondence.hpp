#pragma once

#include <cstdint>
#include <vector>

#include "dualcorr/encoders.hpp"
#include "dualcorr/tensor.hpp"

namespace dualcorr {

enum class InterMode { adjacent, fully_connected };
enum class CrossSelect { patch_topk, word_topk, random };
enum class InterAlign { dense, sparse };

struct CorrespondenceConfig {
  double tau = 0.07;
  int r_inter = 8;
  int r_cross = 3;
  InterMode inter_mode = InterMode::adjacent;
  CrossSelect cross_select = CrossSelect::patch_topk;
  InterAlign inter_align = InterAlign::dense;
  std::uint64_t rng_seed = 0;  // drives the random cross-modal variant

  // Probe learning rate small enough that one gradient step on the
  // inter-frame loss cannot decrease anchor-positive cosine at a fixed
  // mining assignment (verified by a property test).
  static constexpr double kSafeProbeLr = 1e-3;
};

// One pooled positive per anchor. `anchors` names the patch indices the loss
// averages over (all P for the dense paths, the in-box subset for sparse);
// pooled row r and contributors[r] belong to anchors[r]. Pooling averages
// raw (un-normalized) feature rows.
struct PositiveSet {
  num::Tensor pooled;                          // A x D
  std::vector<std::vector<int>> contributors;  // per-anchor source indices
  std::vector<int> anchors;                    // A patch indices
};

// Axis-aligned box in normalized [0,1] image coordinates, used to restrict
// mining to annotated regions in the sparse alignment variant.
struct NormBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

// max(1, floor(pool_size / divisor)): how many candidates each anchor pools.
int k_from_ratio(int pool_size, int divisor);

// Plain cosine-similarity table between row sets, values only (no graph).
// Used for mining, where selection is discrete.
std::vector<double> cosine_table_values(const num::Tensor& a,
                                        const num::Tensor& b);

// For each patch of frame i: top-k most similar patches of frame j by
// cosine, averaged over raw rows of v_j.
PositiveSet mine_inter(const PatchFeatureMap& v_i, const PatchFeatureMap& v_j,
                       int k);

// Sparse variant: anchors are the frame-i patches whose cell centers fall
// inside box_i; every anchor shares one positive, the mean of frame-j
// patches whose centers fall inside box_j. Empty anchors or contributors
// yield an empty PositiveSet (degenerate pair).
PositiveSet mine_sparse(const PatchFeatureMap& v_i, const PatchFeatureMap& v_j,
                        const NormBox& box_i, const NormBox& box_j);

// Mean over anchors p of  logsumexp_q(cos(v_i_p, v_j_q)/tau) -
// cos(v_i_p, pooled_p)/tau. The denominator covers every patch of frame j;
// positives stay in the gradient path.
num::Tensor inter_loss_pair(const PatchFeatureMap& v_i,
                            const PatchFeatureMap& v_j,
                            const PositiveSet& positives, double tau);

struct InterLossResult {
  num::Tensor loss;
  int pair_count = 0;
  int degenerate_pairs = 0;  // sparse pairs skipped for empty boxes
};

// Aggregates pair losses: adjacent mode averages both directions of each
// consecutive pair, fully_connected averages all ordered pairs. boxes
// (one per frame) are required for the sparse alignment variant.
InterLossResult inter_loss(const std::vector<PatchFeatureMap>& frames,
                           const CorrespondenceConfig& cfg,
                           const std::vector<NormBox>* boxes = nullptr);

// Cross-modal positives for one frame. patch_topk: each patch pools its
// K_cross most similar words. word_topk: each word marks its top patches;
// a patch pools the words that marked it, falling back to its single best
// word when none did. random: K_cross words sampled per patch from rng_seed.
PositiveSet mine_cross(const PatchFeatureMap& v_i, const WordFeatures& q,
                       const CorrespondenceConfig& cfg, std::uint64_t rng_seed);

// Mean over frames of the per-frame InfoNCE with word candidates:
// (1/P) sum_p  logsumexp_s(cos(v_i_p, q_s)/tau) - cos(v_i_p, w_i_p)/tau.
num::Tensor cross_loss(const std::vector<PatchFeatureMap>& frames,
                       const WordFeatures& q, const CorrespondenceConfig& cfg);

}  // namespace dualcorr
