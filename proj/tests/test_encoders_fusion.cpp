#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualcorr/encoders.hpp"
#include "dualcorr/fusion.hpp"
#include "dualcorr/gradcheck.hpp"
#include "dualcorr/rng.hpp"
#include "dualcorr/serialize.hpp"

using namespace dualcorr;
using num::Shape;
using num::Tensor;

namespace {

Tensor solid_frame(int h, int w, int c, double value) {
  return Tensor::full({h, w, c}, value);
}

}  // namespace

TEST_CASE("video encoder produces the expected grid") {
  EncoderConfig cfg;
  cfg.patch_stride = 4;
  cfg.feature_dim = 16;
  cfg.channels = 3;
  num::ParameterStore store;
  Rng rng(1);
  VideoEncoder enc(cfg, store, rng);

  auto fm = enc.encode_frame(solid_frame(32, 32, 3, 0.5));
  CHECK(fm.grid_h == 8);
  CHECK(fm.grid_w == 8);
  CHECK(fm.features.shape() == Shape{64, 16});
}

TEST_CASE("zero frame with zero bias maps to zero features") {
  EncoderConfig cfg;
  cfg.patch_stride = 4;
  num::ParameterStore store;
  Rng rng(2);
  VideoEncoder enc(cfg, store, rng);

  auto fm = enc.encode_frame(solid_frame(16, 16, 3, 0.0));
  for (double v : fm.features.values()) CHECK(v == 0.0);
}

TEST_CASE("video encoding is deterministic") {
  EncoderConfig cfg;
  num::ParameterStore store;
  Rng rng(3);
  VideoEncoder enc(cfg, store, rng);

  VideoClip clip;
  Rng px(7);
  for (int t = 0; t < 3; ++t) {
    auto f = Tensor::zeros({16, 16, 3});
    for (auto& v : f.mutable_values()) v = px.uniform();
    clip.frames.push_back(f);
    clip.frame_indices.push_back(t);
  }
  auto a = enc.encode(clip);
  auto b = enc.encode(clip);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::int64_t i = 0; i < a[t].features.size(); ++i) {
      CHECK(a[t].features.values()[i] == b[t].features.values()[i]);
    }
  }
}

TEST_CASE("video encoder rejects bad inputs") {
  EncoderConfig cfg;
  cfg.patch_stride = 4;
  num::ParameterStore store;
  Rng rng(4);
  VideoEncoder enc(cfg, store, rng);

  CHECK_THROWS_AS(enc.encode_frame(solid_frame(33, 32, 3, 0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(enc.encode_frame(solid_frame(32, 32, 1, 0.0)),
                  std::invalid_argument);

  VideoClip clip;
  clip.frames = {solid_frame(16, 16, 3, 0.0), solid_frame(32, 32, 3, 0.0)};
  clip.frame_indices = {0, 1};
  CHECK_THROWS_AS(enc.encode(clip), std::invalid_argument);
  CHECK_THROWS_AS(enc.encode(VideoClip{}), std::invalid_argument);
}

TEST_CASE("patch rows follow first-row-then-column order") {
  EncoderConfig cfg;
  cfg.patch_stride = 2;
  cfg.channels = 1;
  cfg.feature_dim = 4;
  num::ParameterStore store;
  Rng rng(5);
  VideoEncoder enc(cfg, store, rng);

  // 4x4 single-channel frame, 2x2 grid. Light up one 2x2 block at grid cell
  // (row 0, col 1): its features must land in patch row 1, all other rows
  // must match the all-zero frame (zeros here, zero bias).
  auto frame = Tensor::zeros({4, 4, 1});
  for (int y = 0; y < 2; ++y) {
    for (int x = 2; x < 4; ++x) frame.mutable_values()[y * 4 + x] = 1.0;
  }
  auto fm = enc.encode_frame(frame);
  REQUIRE(fm.features.shape() == Shape{4, 4});

  auto row_is_zero = [&](int r) {
    for (int j = 0; j < 4; ++j) {
      if (fm.features.values()[r * 4 + j] != 0.0) return false;
    }
    return true;
  };
  CHECK(row_is_zero(0));
  CHECK_FALSE(row_is_zero(1));
  CHECK(row_is_zero(2));
  CHECK(row_is_zero(3));

  // The same block moved to cell (1, 0) produces the same feature vector at
  // patch row 2: one shared affine map across positions.
  auto frame2 = Tensor::zeros({4, 4, 1});
  for (int y = 2; y < 4; ++y) {
    for (int x = 0; x < 2; ++x) frame2.mutable_values()[y * 4 + x] = 1.0;
  }
  auto fm2 = enc.encode_frame(frame2);
  for (int j = 0; j < 4; ++j) {
    CHECK(fm2.features.values()[2 * 4 + j] == fm.features.values()[1 * 4 + j]);
  }
}

TEST_CASE("query encoder basics") {
  EncoderConfig cfg;
  cfg.vocab_size = 10;
  cfg.feature_dim = 8;
  num::ParameterStore store;
  Rng rng(6);
  QueryEncoder enc(cfg, store, rng);

  // Rows are independent: a token's row does not depend on its neighbors.
  auto solo = enc.encode({{4}, {"w"}});
  CHECK(solo.features.shape() == Shape{1, 8});
  auto ctx = enc.encode({{7, 4, 2}, {"a", "w", "b"}});
  for (int j = 0; j < 8; ++j) {
    CHECK(ctx.features.values()[1 * 8 + j] == solo.features.values()[j]);
  }

  // Permuting two distinct tokens permutes the corresponding rows.
  auto ab = enc.encode({{3, 5}, {"a", "b"}});
  auto ba = enc.encode({{5, 3}, {"b", "a"}});
  for (int j = 0; j < 8; ++j) {
    CHECK(ab.features.values()[j] == ba.features.values()[8 + j]);
    CHECK(ab.features.values()[8 + j] == ba.features.values()[j]);
  }

  CHECK_THROWS_AS(enc.encode({{10}, {"oov"}}), std::out_of_range);
  CHECK_THROWS_AS(enc.encode({{-1}, {"neg"}}), std::out_of_range);
  CHECK_THROWS_AS(enc.encode({{}, {}}), std::invalid_argument);
}

TEST_CASE("video and query feature dims agree for a shared config") {
  EncoderConfig cfg;
  cfg.feature_dim = 12;
  num::ParameterStore store;
  Rng rng(8);
  VideoEncoder venc(cfg, store, rng);
  QueryEncoder qenc(cfg, store, rng);

  auto fm = venc.encode_frame(solid_frame(16, 16, 3, 0.3));
  auto wf = qenc.encode({{0, 1}, {"a", "b"}});
  CHECK(fm.features.shape()[1] == wf.features.shape()[1]);
}

TEST_CASE("query gradient w.r.t. embedding table matches finite differences") {
  EncoderConfig cfg;
  cfg.vocab_size = 6;
  cfg.feature_dim = 5;
  num::ParameterStore store;
  Rng rng(9);
  QueryEncoder enc(cfg, store, rng);

  QueryTokens toks{{1, 4, 1}, {"a", "b", "a"}};
  std::vector<Tensor> params;
  for (const auto& name : store.names()) params.push_back(store.get(name));
  auto report = num::finite_diff_check(
      [&] { return num::sum(enc.encode(toks).features); }, params, 1e-5);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("single-word attention is the identity on word features") {
  num::ParameterStore store;
  Rng rng(10);
  auto fp = make_fusion_params(4, store, rng);

  PatchFeatureMap v;
  v.grid_h = 1;
  v.grid_w = 3;
  v.features = Tensor::from_values({3, 4}, {0.1, -0.2, 0.3, 0.4,  //
                                            0.5, 0.5, -0.5, 0.0,  //
                                            -1.0, 0.2, 0.0, 0.9});
  WordFeatures q;
  q.features = Tensor::from_values({1, 4}, {0.7, -0.3, 0.1, 0.2});

  auto fused = attend(v, q, fp);
  CHECK(fused.attention.shape() == Shape{3, 1});
  for (double a : fused.attention.values()) CHECK(a == 1.0);
  for (int p = 0; p < 3; ++p) {
    for (int j = 0; j < 4; ++j) {
      CHECK(fused.features.values()[p * 4 + j] ==
            doctest::Approx(q.features.values()[j]).epsilon(1e-14));
    }
  }
}

TEST_CASE("identical words split attention evenly") {
  num::ParameterStore store;
  Rng rng(11);
  auto fp = make_fusion_params(3, store, rng);

  PatchFeatureMap v;
  v.grid_h = v.grid_w = 1;
  v.features = Tensor::from_values({1, 3}, {0.2, 0.4, -0.6});
  WordFeatures q;
  q.features = Tensor::from_values({2, 3}, {0.5, -0.1, 0.3, 0.5, -0.1, 0.3});

  auto fused = attend(v, q, fp);
  CHECK(fused.attention.values()[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fused.attention.values()[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("attention matches a hand-evaluated two-word case") {
  FusionParams fp;
  fp.w = Tensor::from_values({2}, {1.0, 0.0});
  fp.w_v = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  fp.w_q = Tensor::from_values({2, 2}, {0, 1, 1, 0});

  PatchFeatureMap v;
  v.grid_h = v.grid_w = 1;
  v.features = Tensor::from_values({1, 2}, {0.3, -0.2});
  WordFeatures q;
  q.features = Tensor::from_values({2, 2}, {0.1, 0.4, -0.5, 0.2});

  // score_s = w . tanh(W_v v + W_q q_s); W_q swaps coordinates.
  const double s0 = std::tanh(0.3 + 0.4);
  const double s1 = std::tanh(0.3 + 0.2);
  const double z = std::exp(s0) + std::exp(s1);
  const double e0 = std::exp(s0) / z, e1 = std::exp(s1) / z;

  auto fused = attend(v, q, fp);
  CHECK(fused.attention.values()[0] == doctest::Approx(e0).epsilon(1e-12));
  CHECK(fused.attention.values()[1] == doctest::Approx(e1).epsilon(1e-12));
  for (int j = 0; j < 2; ++j) {
    const double expect =
        e0 * q.features.values()[j] + e1 * q.features.values()[2 + j];
    CHECK(fused.features.values()[j] ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("attention rows are convex weights and fused rows stay in hull") {
  num::ParameterStore store;
  Rng rng(12);
  auto fp = make_fusion_params(6, store, rng);

  Rng data(13);
  PatchFeatureMap v;
  v.grid_h = 2;
  v.grid_w = 3;
  v.features = Tensor::zeros({6, 6});
  for (auto& x : v.features.mutable_values()) x = data.uniform(-1, 1);
  WordFeatures q;
  q.features = Tensor::zeros({4, 6});
  for (auto& x : q.features.mutable_values()) x = data.uniform(-1, 1);

  auto fused = attend(v, q, fp);
  for (int p = 0; p < 6; ++p) {
    double rowsum = 0.0;
    for (int s = 0; s < 4; ++s) {
      const double a = fused.attention.values()[p * 4 + s];
      CHECK(a >= 0.0);
      rowsum += a;
    }
    CHECK(std::abs(rowsum - 1.0) < 1e-10);
    for (int j = 0; j < 6; ++j) {
      double lo = 1e9, hi = -1e9;
      for (int s = 0; s < 4; ++s) {
        lo = std::min(lo, q.features.values()[s * 6 + j]);
        hi = std::max(hi, q.features.values()[s * 6 + j]);
      }
      const double f = fused.features.values()[p * 6 + j];
      CHECK(f >= lo - 1e-12);
      CHECK(f <= hi + 1e-12);
    }
  }
}

TEST_CASE("permuting words permutes attention columns and preserves fusion") {
  num::ParameterStore store;
  Rng rng(14);
  auto fp = make_fusion_params(3, store, rng);

  PatchFeatureMap v;
  v.grid_h = v.grid_w = 1;
  v.features = Tensor::from_values({1, 3}, {0.4, -0.7, 0.1});
  WordFeatures q;
  q.features = Tensor::from_values({3, 3}, {0.5, 0.1, -0.2,  //
                                            -0.3, 0.8, 0.0,  //
                                            0.2, -0.6, 0.4});
  WordFeatures qr;  // rows reversed
  qr.features = Tensor::from_values({3, 3}, {0.2, -0.6, 0.4,  //
                                             -0.3, 0.8, 0.0,  //
                                             0.5, 0.1, -0.2});

  auto a = attend(v, q, fp);
  auto b = attend(v, qr, fp);
  for (int s = 0; s < 3; ++s) {
    CHECK(a.attention.values()[s] ==
          doctest::Approx(b.attention.values()[2 - s]).epsilon(1e-12));
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(a.features.values()[j] ==
          doctest::Approx(b.features.values()[j]).epsilon(1e-12));
  }
}

TEST_CASE("fusion parameters pass gradcheck") {
  num::ParameterStore store;
  Rng rng(15);
  auto fp = make_fusion_params(4, store, rng);

  Rng data(16);
  PatchFeatureMap v;
  v.grid_h = 1;
  v.grid_w = 3;
  v.features = Tensor::zeros({3, 4});
  for (auto& x : v.features.mutable_values()) x = data.uniform(-1, 1);
  WordFeatures q;
  q.features = Tensor::zeros({2, 4});
  for (auto& x : q.features.mutable_values()) x = data.uniform(-1, 1);

  auto report = num::finite_diff_check(
      [&] { return num::sum(attend(v, q, fp).features); },
      {fp.w, fp.w_v, fp.w_q}, 1e-5);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("attend rejects mismatched dimensions") {
  num::ParameterStore store;
  Rng rng(17);
  auto fp = make_fusion_params(4, store, rng);

  PatchFeatureMap v;
  v.grid_h = v.grid_w = 1;
  v.features = Tensor::zeros({1, 4});
  WordFeatures q;
  q.features = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(attend(v, q, fp), std::invalid_argument);

  // Features agree with each other but not with the parameter dimension.
  WordFeatures q5;
  q5.features = Tensor::zeros({2, 5});
  PatchFeatureMap v5;
  v5.grid_h = v5.grid_w = 1;
  v5.features = Tensor::zeros({1, 5});
  CHECK_THROWS_AS(attend(v5, q5, fp), std::invalid_argument);
}
