#include "dualcorr/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace dualcorr {

using num::Shape;
using num::Tensor;

int VideoEncoder::window() const {
  return cfg_.patch_window > 0 ? cfg_.patch_window : cfg_.patch_stride;
}

VideoEncoder::VideoEncoder(const EncoderConfig& cfg,
                           num::ParameterStore& params, Rng& rng)
    : cfg_(cfg) {
  if (cfg.patch_window < 0) {
    throw std::invalid_argument("VideoEncoder: patch_window must be >= 0");
  }
  const int win = window();
  const int in_dim = win * win * cfg.channels;
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  w_ = params.create("video.patch_w", {in_dim, cfg.feature_dim}, rng, scale);
  b_ = params.create_const("video.patch_b", {cfg.feature_dim}, 0.0);
}

PatchFeatureMap VideoEncoder::encode_frame(const Tensor& frame) const {
  if (frame.rank() != 3 || frame.shape()[2] != cfg_.channels) {
    throw std::invalid_argument("encode_frame: expected HxWx" +
                                std::to_string(cfg_.channels) + ", got " +
                                num::shape_str(frame.shape()));
  }
  const int h = frame.shape()[0], w = frame.shape()[1], c = cfg_.channels;
  const int s = cfg_.patch_stride;
  if (h % s != 0 || w % s != 0) {
    throw std::invalid_argument("encode_frame: " + num::shape_str(frame.shape()) +
                                " not divisible by stride " +
                                std::to_string(s));
  }
  const int grid_h = h / s, grid_w = w / s;
  const int p_count = grid_h * grid_w;
  const int win = window();
  const int in_dim = win * win * c;
  // Offset that centers the window on its stride cell; pixels falling
  // outside the image stay zero.
  const int off = (s - win) / 2;

  // Patch extraction is a fixed rearrangement of constant pixels, so the
  // patch matrix is assembled outside the graph.
  auto patches = Tensor::zeros({p_count, in_dim});
  auto dst = patches.mutable_values();
  const auto src = frame.values();
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      const int p = gy * grid_w + gx;
      int k = 0;
      for (int dy = 0; dy < win; ++dy) {
        for (int dx = 0; dx < win; ++dx) {
          const int py = gy * s + off + dy, px = gx * s + off + dx;
          const bool in = py >= 0 && py < h && px >= 0 && px < w;
          for (int ch = 0; ch < c; ++ch) {
            dst[static_cast<std::size_t>(p) * in_dim + k++] =
                in ? src[(py * w + px) * c + ch] : 0.0;
          }
        }
      }
    }
  }

  PatchFeatureMap out;
  out.grid_h = grid_h;
  out.grid_w = grid_w;
  out.features = num::tanh(num::add_row_broadcast(num::matmul(patches, w_), b_));
  return out;
}

std::vector<PatchFeatureMap> VideoEncoder::encode(const VideoClip& clip) const {
  if (clip.frames.empty()) {
    throw std::invalid_argument("encode: clip has no frames");
  }
  for (const auto& f : clip.frames) {
    if (f.shape() != clip.frames.front().shape()) {
      throw std::invalid_argument("encode: frames disagree on shape, " +
                                  num::shape_str(clip.frames.front().shape()) +
                                  " vs " + num::shape_str(f.shape()));
    }
  }
  std::vector<PatchFeatureMap> out;
  out.reserve(clip.frames.size());
  for (const auto& f : clip.frames) out.push_back(encode_frame(f));
  return out;
}

QueryEncoder::QueryEncoder(const EncoderConfig& cfg,
                           num::ParameterStore& params, Rng& rng)
    : cfg_(cfg) {
  if (cfg.max_words < 1) {
    throw std::invalid_argument("QueryEncoder: max_words must be >= 1");
  }
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
  embed_ = params.create("query.embed", {cfg.vocab_size, cfg.feature_dim}, rng,
                         0.5);
  pos_ = params.create("query.pos", {cfg.max_words, cfg.feature_dim}, rng,
                       0.5);
  w_ = params.create("query.mix_w", {cfg.feature_dim, cfg.feature_dim}, rng,
                     mix_scale);
  b_ = params.create_const("query.mix_b", {cfg.feature_dim}, 0.0);
}

WordFeatures QueryEncoder::encode(const QueryTokens& tokens) const {
  if (tokens.token_ids.empty()) {
    throw std::invalid_argument("encode: empty query");
  }
  const int s_count = static_cast<int>(tokens.token_ids.size());
  if (s_count > cfg_.max_words) {
    throw std::invalid_argument("encode: query of " + std::to_string(s_count) +
                                " words exceeds max_words " +
                                std::to_string(cfg_.max_words));
  }
  for (int id : tokens.token_ids) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw std::out_of_range("encode: token id " + std::to_string(id) +
                              " outside vocabulary of size " +
                              std::to_string(cfg_.vocab_size));
    }
  }
  std::vector<int> positions(tokens.token_ids.size());
  for (std::size_t s = 0; s < positions.size(); ++s) {
    positions[s] = static_cast<int>(s);
  }
  auto emb = num::add(num::gather_rows(embed_, tokens.token_ids),
                      num::gather_rows(pos_, positions));
  WordFeatures out;
  out.features = num::tanh(num::add_row_broadcast(num::matmul(emb, w_), b_));
  return out;
}

}  // namespace dualcorr
