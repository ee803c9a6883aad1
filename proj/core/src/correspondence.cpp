#include "dualcorr/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dualcorr/rng.hpp"

namespace dualcorr {

using num::Shape;
using num::Tensor;

int k_from_ratio(int pool_size, int divisor) {
  if (pool_size < 1) {
    throw std::invalid_argument("k_from_ratio: pool_size " +
                                std::to_string(pool_size) + " < 1");
  }
  if (divisor < 1) {
    throw std::invalid_argument("k_from_ratio: divisor " +
                                std::to_string(divisor) + " < 1");
  }
  return std::max(1, pool_size / divisor);
}

std::vector<double> cosine_table_values(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1]) {
    throw std::invalid_argument("cosine_table_values: incompatible shapes " +
                                num::shape_str(a.shape()) + " vs " +
                                num::shape_str(b.shape()));
  }
  const int n = a.shape()[0], m = b.shape()[0], d = a.shape()[1];
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> a_norm(n), b_norm(m);
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int k = 0; k < d; ++k) sq += av[i * d + k] * av[i * d + k];
    a_norm[i] = std::sqrt(sq);
  }
  for (int j = 0; j < m; ++j) {
    double sq = 0.0;
    for (int k = 0; k < d; ++k) sq += bv[j * d + k] * bv[j * d + k];
    b_norm[j] = std::sqrt(sq);
  }
  std::vector<double> table(static_cast<std::size_t>(n) * m, 0.0);
  for (int i = 0; i < n; ++i) {
    if (a_norm[i] == 0.0) continue;  // zero row: cosine defined as 0
    for (int j = 0; j < m; ++j) {
      if (b_norm[j] == 0.0) continue;
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += av[i * d + k] * bv[j * d + k];
      table[static_cast<std::size_t>(i) * m + j] = dot / (a_norm[i] * b_norm[j]);
    }
  }
  return table;
}

namespace {

void check_same_grid(const PatchFeatureMap& v_i, const PatchFeatureMap& v_j) {
  if (v_i.features.shape() != v_j.features.shape()) {
    throw std::invalid_argument("frame feature shapes disagree: " +
                                num::shape_str(v_i.features.shape()) + " vs " +
                                num::shape_str(v_j.features.shape()));
  }
}

// Differentiable A x M cosine table between the anchor rows of v_i and all
// rows of v_j. Zero rows normalize to zero, giving zero cosine, matching
// cosine_table_values.
Tensor cosine_table(const Tensor& anchor_rows, const Tensor& candidates) {
  return num::matmul(num::l2_normalize(anchor_rows, 1),
                     num::transpose(num::l2_normalize(candidates, 1)));
}

// Patch indices whose cell centers land inside the box (closed bounds),
// centers in normalized coordinates.
std::vector<int> cells_in_box(int grid_h, int grid_w, const NormBox& box) {
  std::vector<int> cells;
  for (int gy = 0; gy < grid_h; ++gy) {
    const double cy = (gy + 0.5) / grid_h;
    if (cy < box.y_min || cy > box.y_max) continue;
    for (int gx = 0; gx < grid_w; ++gx) {
      const double cx = (gx + 0.5) / grid_w;
      if (cx < box.x_min || cx > box.x_max) continue;
      cells.push_back(gy * grid_w + gx);
    }
  }
  return cells;
}

}  // namespace

PositiveSet mine_inter(const PatchFeatureMap& v_i, const PatchFeatureMap& v_j,
                       int k) {
  check_same_grid(v_i, v_j);
  const int p_count = v_i.features.shape()[0];
  if (k < 1 || k > p_count) {
    throw std::invalid_argument("mine_inter: k=" + std::to_string(k) +
                                " out of range for P=" +
                                std::to_string(p_count));
  }
  const auto table = cosine_table_values(v_i.features, v_j.features);

  PositiveSet out;
  out.anchors.resize(p_count);
  out.contributors.reserve(p_count);
  for (int p = 0; p < p_count; ++p) {
    out.anchors[p] = p;
    std::span<const double> row(&table[static_cast<std::size_t>(p) * p_count],
                                p_count);
    out.contributors.push_back(num::topk(row, k));
  }
  out.pooled = num::pool_rows(v_j.features, out.contributors);
  return out;
}

PositiveSet mine_sparse(const PatchFeatureMap& v_i, const PatchFeatureMap& v_j,
                        const NormBox& box_i, const NormBox& box_j) {
  check_same_grid(v_i, v_j);
  PositiveSet out;
  out.anchors = cells_in_box(v_i.grid_h, v_i.grid_w, box_i);
  const auto donors = cells_in_box(v_j.grid_h, v_j.grid_w, box_j);
  if (out.anchors.empty() || donors.empty()) {
    out.anchors.clear();
    return out;  // degenerate: caller flags and skips
  }
  out.contributors.assign(out.anchors.size(), donors);
  out.pooled = num::pool_rows(v_j.features, out.contributors);
  return out;
}

Tensor inter_loss_pair(const PatchFeatureMap& v_i, const PatchFeatureMap& v_j,
                       const PositiveSet& positives, double tau) {
  if (positives.anchors.empty()) {
    throw std::invalid_argument("inter_loss_pair: empty positive set");
  }
  auto anchor_rows = num::gather_rows(v_i.features, positives.anchors);
  auto denom_cos = cosine_table(anchor_rows, v_j.features);
  auto lse = num::logsumexp(num::mul_scalar(denom_cos, 1.0 / tau), 1);
  auto pos = num::mul_scalar(num::rowwise_cosine(anchor_rows, positives.pooled),
                             1.0 / tau);
  return num::mean(num::sub(lse, pos));
}

InterLossResult inter_loss(const std::vector<PatchFeatureMap>& frames,
                           const CorrespondenceConfig& cfg,
                           const std::vector<NormBox>* boxes) {
  const int t = static_cast<int>(frames.size());
  if (t < 2) {
    throw std::invalid_argument("inter_loss: needs at least 2 frames, got " +
                                std::to_string(t));
  }
  if (cfg.inter_align == InterAlign::sparse) {
    if (boxes == nullptr || static_cast<int>(boxes->size()) != t) {
      throw std::invalid_argument(
          "inter_loss: sparse alignment needs one box per frame");
    }
  }

  std::vector<std::pair<int, int>> pairs;
  if (cfg.inter_mode == InterMode::adjacent) {
    for (int i = 0; i + 1 < t; ++i) {
      pairs.emplace_back(i, i + 1);
      pairs.emplace_back(i + 1, i);
    }
  } else {
    for (int i = 0; i < t; ++i) {
      for (int j = 0; j < t; ++j) {
        if (i != j) pairs.emplace_back(i, j);
      }
    }
  }

  InterLossResult result;
  result.pair_count = static_cast<int>(pairs.size());
  Tensor total = Tensor::scalar(0.0);
  for (const auto& [i, j] : pairs) {
    PositiveSet pos;
    if (cfg.inter_align == InterAlign::sparse) {
      pos = mine_sparse(frames[i], frames[j], (*boxes)[i], (*boxes)[j]);
      if (pos.anchors.empty()) {
        ++result.degenerate_pairs;
        continue;  // contributes 0
      }
    } else {
      const int p_count = frames[i].features.shape()[0];
      pos = mine_inter(frames[i], frames[j],
                       k_from_ratio(p_count, cfg.r_inter));
    }
    total = num::add(total, inter_loss_pair(frames[i], frames[j], pos, cfg.tau));
  }
  result.loss = num::mul_scalar(total, 1.0 / static_cast<double>(pairs.size()));
  return result;
}

PositiveSet mine_cross(const PatchFeatureMap& v_i, const WordFeatures& q,
                       const CorrespondenceConfig& cfg,
                       std::uint64_t rng_seed) {
  if (v_i.features.shape()[1] != q.features.shape()[1]) {
    throw std::invalid_argument("mine_cross: feature dims disagree, " +
                                num::shape_str(v_i.features.shape()) + " vs " +
                                num::shape_str(q.features.shape()));
  }
  const int p_count = v_i.features.shape()[0];
  const int s_count = q.features.shape()[0];

  PositiveSet out;
  out.anchors.resize(p_count);
  for (int p = 0; p < p_count; ++p) out.anchors[p] = p;
  out.contributors.assign(p_count, {});

  switch (cfg.cross_select) {
    case CrossSelect::patch_topk: {
      const int k = k_from_ratio(s_count, cfg.r_cross);
      const auto table = cosine_table_values(v_i.features, q.features);
      for (int p = 0; p < p_count; ++p) {
        std::span<const double> row(
            &table[static_cast<std::size_t>(p) * s_count], s_count);
        out.contributors[p] = num::topk(row, k);
      }
      break;
    }
    case CrossSelect::word_topk: {
      const int k = k_from_ratio(p_count, cfg.r_cross);
      const auto table = cosine_table_values(q.features, v_i.features);
      for (int s = 0; s < s_count; ++s) {
        std::span<const double> row(
            &table[static_cast<std::size_t>(s) * p_count], p_count);
        for (int p : num::topk(row, k)) out.contributors[p].push_back(s);
      }
      // Patches no word marked fall back to their single best word.
      const auto pw = cosine_table_values(v_i.features, q.features);
      for (int p = 0; p < p_count; ++p) {
        if (!out.contributors[p].empty()) continue;
        std::span<const double> row(
            &pw[static_cast<std::size_t>(p) * s_count], s_count);
        out.contributors[p] = num::topk(row, 1);
      }
      break;
    }
    case CrossSelect::random: {
      const int k = k_from_ratio(s_count, cfg.r_cross);
      Rng rng(rng_seed);
      for (int p = 0; p < p_count; ++p) {
        auto picks = rng.sample_without_replacement(s_count, k);
        std::sort(picks.begin(), picks.end());
        out.contributors[p] = std::move(picks);
      }
      break;
    }
  }
  out.pooled = num::pool_rows(q.features, out.contributors);
  return out;
}

Tensor cross_loss(const std::vector<PatchFeatureMap>& frames,
                  const WordFeatures& q, const CorrespondenceConfig& cfg) {
  const int t = static_cast<int>(frames.size());
  if (t < 1) throw std::invalid_argument("cross_loss: no frames");

  Tensor total = Tensor::scalar(0.0);
  for (int i = 0; i < t; ++i) {
    const auto pos =
        mine_cross(frames[i], q, cfg,
                   Rng::mix(cfg.rng_seed, static_cast<std::uint64_t>(i)));
    auto denom_cos = cosine_table(frames[i].features, q.features);
    auto lse = num::logsumexp(num::mul_scalar(denom_cos, 1.0 / cfg.tau), 1);
    auto pos_cos = num::mul_scalar(
        num::rowwise_cosine(frames[i].features, pos.pooled), 1.0 / cfg.tau);
    total = num::add(total, num::mean(num::sub(lse, pos_cos)));
  }
  return num::mul_scalar(total, 1.0 / static_cast<double>(t));
}

}  // namespace dualcorr
