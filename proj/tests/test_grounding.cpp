#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualcorr/gradcheck.hpp"
#include "dualcorr/grounding.hpp"
#include "dualcorr/model.hpp"
#include "dualcorr/rng.hpp"

using namespace dualcorr;
using num::Shape;
using num::Tensor;

namespace {

// Hand-built prediction over a grid, raw values supplied per cell.
GroundingPrediction make_pred(int grid_h, int grid_w,
                              std::vector<double> raw_vals,
                              const GroundingConfig& cfg = {}) {
  GroundingPrediction pred;
  pred.grid_h = grid_h;
  pred.grid_w = grid_w;
  pred.cfg = cfg;
  const int p = grid_h * grid_w;
  pred.raw = Tensor::from_values({p, 5}, std::move(raw_vals));
  pred.boxes_raw = num::slice_cols(pred.raw, 0, 4);
  pred.conf_logits = num::reshape(num::slice_cols(pred.raw, 4, 5), {p});
  return pred;
}

}  // namespace

TEST_CASE("zero raw outputs predict each cell's center at anchor size") {
  GroundingConfig cfg;  // 32x32 image, 10x10 anchor
  auto pred = make_pred(2, 2, std::vector<double>(20, 0.0), cfg);

  for (int cell = 0; cell < 4; ++cell) {
    const auto box = decode_cell(cell, {0, 0, 0, 0}, 2, 2, cfg);
    const double cx = ((cell % 2) + 0.5) * 16.0;
    const double cy = ((cell / 2) + 0.5) * 16.0;
    CHECK(box.center_x() == doctest::Approx(cx).epsilon(1e-12));
    CHECK(box.center_y() == doctest::Approx(cy).epsilon(1e-12));
    CHECK(box.width() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(box.height() == doctest::Approx(10.0).epsilon(1e-12));
  }

  // All-equal confidences select cell 0 by the tie rule.
  CHECK(infer(pred).cell == 0);
}

TEST_CASE("encode then decode round-trips interior boxes") {
  GroundingConfig cfg;
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    // Random box with center strictly inside some cell and size small
    // enough to stay in the image after decoding.
    const double w = rng.uniform(2.0, 12.0);
    const double h = rng.uniform(2.0, 12.0);
    const double cx = rng.uniform(w / 2 + 0.1, 32.0 - w / 2 - 0.1);
    const double cy = rng.uniform(h / 2 + 0.1, 32.0 - h / 2 - 0.1);
    Box box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};

    const int cell = responsible_cell(box, 8, 8, cfg);
    const auto raw = encode_box(box, cell, 8, 8, cfg);
    const auto back = decode_cell(cell, raw, 8, 8, cfg);
    CHECK(std::abs(back.x_min - box.x_min) < 1e-9);
    CHECK(std::abs(back.y_min - box.y_min) < 1e-9);
    CHECK(std::abs(back.x_max - box.x_max) < 1e-9);
    CHECK(std::abs(back.y_max - box.y_max) < 1e-9);
  }
}

TEST_CASE("centers on cell boundaries go to the lower-index cell") {
  GroundingConfig cfg;  // 32 px, 8x8 grid -> 4 px cells
  // Center exactly at x=4 (boundary between cells 0 and 1), y inside row 0.
  Box box{2.0, 0.0, 6.0, 3.0};  // center (4.0, 1.5)
  CHECK(responsible_cell(box, 8, 8, cfg) == 0);

  Box box2{4.1, 0.0, 7.9, 3.0};  // center (6.0, 1.5): inside cell 1
  CHECK(responsible_cell(box2, 8, 8, cfg) == 1);

  // Both axes on boundaries.
  Box box3{6.0, 6.0, 10.0, 10.0};  // center (8, 8): cells 1|2 and rows 1|2
  CHECK(responsible_cell(box3, 8, 8, cfg) == 1 * 8 + 1);
}

TEST_CASE("make_ground_truth validates box geometry") {
  GroundingConfig cfg;
  CHECK_THROWS_AS(make_ground_truth({5, 5, 5, 9}, 8, 8, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_ground_truth({5, 9, 9, 5}, 8, 8, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_ground_truth({-1, 0, 5, 5}, 8, 8, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_ground_truth({0, 0, 33, 5}, 8, 8, cfg),
                  std::invalid_argument);
  auto gt = make_ground_truth({12, 12, 20, 20}, 8, 8, cfg);
  CHECK(gt.responsible_cell == 3 * 8 + 3);  // center (16,16) -> boundary rule
}

TEST_CASE("loc loss is zero at the encoded target and 0.25 one unit off") {
  GroundingConfig cfg;
  Box box{10, 6, 18, 16};
  const int grid = 4;
  auto gt = make_ground_truth(box, grid, grid, cfg);
  const auto target = encode_box(box, gt.responsible_cell, grid, grid, cfg);

  std::vector<double> raw(grid * grid * 5, 0.3);  // junk in other cells
  for (int j = 0; j < 4; ++j) {
    raw[gt.responsible_cell * 5 + j] = target[j];
  }
  auto pred = make_pred(grid, grid, raw, cfg);
  CHECK(loc_loss(pred, gt).value() == doctest::Approx(0.0).epsilon(1e-15));

  raw[gt.responsible_cell * 5 + 0] = target[0] + 1.0;
  auto pred_off = make_pred(grid, grid, raw, cfg);
  CHECK(loc_loss(pred_off, gt).value() ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("loc loss matches a scalar recomputation on random cases") {
  GroundingConfig cfg;
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> raw(4 * 4 * 5);
    for (auto& v : raw) v = rng.uniform(-1, 1);
    auto pred = make_pred(4, 4, raw, cfg);

    Box box{8, 8, 20, 24};
    auto gt = make_ground_truth(box, 4, 4, cfg);
    const auto target = encode_box(box, gt.responsible_cell, 4, 4, cfg);
    double expect = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double d = raw[gt.responsible_cell * 5 + j] - target[j];
      expect += d * d;
    }
    expect /= 4.0;
    CHECK(loc_loss(pred, gt).value() ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("cls loss closed forms") {
  GroundingConfig cfg;
  auto uniform = make_pred(8, 8, std::vector<double>(64 * 5, 0.0), cfg);
  GroundTruthBox gt{{10, 10, 20, 20}, 17};
  CHECK(cls_loss(uniform, gt).value() ==
        doctest::Approx(std::log(64.0)).epsilon(1e-12));

  // Heavily favoring the responsible cell drives the loss toward zero.
  std::vector<double> raw(64 * 5, 0.0);
  raw[17 * 5 + 4] = 50.0;
  auto confident = make_pred(8, 8, raw, cfg);
  CHECK(cls_loss(confident, gt).value() < 1e-12);

  GroundTruthBox bad{{10, 10, 20, 20}, 64};
  CHECK_THROWS_AS(cls_loss(uniform, bad), std::out_of_range);
  CHECK_THROWS_AS(loc_loss(uniform, bad), std::out_of_range);
}

TEST_CASE("cls loss gradient matches finite differences") {
  auto logits_holder = Tensor::zeros({6, 5}, true);
  {
    Rng rng(11);
    for (auto& v : logits_holder.mutable_values()) v = rng.uniform(-1, 1);
  }
  GroundingConfig cfg;
  cfg.image_h = cfg.image_w = 12;
  GroundTruthBox gt{{3, 3, 9, 9}, 4};

  auto loss_fn = [&] {
    GroundingPrediction pred;
    pred.grid_h = 2;
    pred.grid_w = 3;
    pred.cfg = cfg;
    pred.raw = logits_holder;
    pred.boxes_raw = num::slice_cols(pred.raw, 0, 4);
    pred.conf_logits = num::reshape(num::slice_cols(pred.raw, 4, 5), {6});
    return num::add(cls_loss(pred, gt), loc_loss(pred, gt));
  };
  auto report = num::finite_diff_check(loss_fn, {logits_holder}, 1e-5);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("inference picks the dominant cell and its box") {
  GroundingConfig cfg;
  std::vector<double> raw(3 * 3 * 5, 0.0);
  for (int p = 0; p < 9; ++p) raw[p * 5 + 4] = -10.0;
  raw[5 * 5 + 4] = 10.0;
  raw[5 * 5 + 0] = 0.7;  // make the winning box non-trivial
  raw[5 * 5 + 2] = -0.4;
  auto pred = make_pred(3, 3, raw, cfg);

  auto sel = infer(pred);
  CHECK(sel.cell == 5);
  CHECK(sel.prob > 0.99);
  const auto expect = decode_cell(5, {0.7, 0.0, -0.4, 0.0}, 3, 3, cfg);
  CHECK(sel.box.x_min == doctest::Approx(expect.x_min).epsilon(1e-12));
  CHECK(sel.box.x_max == doctest::Approx(expect.x_max).epsilon(1e-12));

  // Selected confidence dominates every other cell's.
  for (int p = 0; p < 9; ++p) {
    CHECK(pred.conf_logits.values()[sel.cell] >= pred.conf_logits.values()[p]);
  }
}

TEST_CASE("iou closed forms and properties") {
  Box a{0, 0, 1, 1};
  CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(iou(a, {2, 2, 3, 3}) == 0.0);
  CHECK(iou(a, {0.5, 0, 1.5, 1}) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    Box p{rng.uniform(0, 10), rng.uniform(0, 10), 0, 0};
    p.x_max = p.x_min + rng.uniform(0.1, 5);
    p.y_max = p.y_min + rng.uniform(0.1, 5);
    Box q{rng.uniform(0, 10), rng.uniform(0, 10), 0, 0};
    q.x_max = q.x_min + rng.uniform(0.1, 5);
    q.y_max = q.y_min + rng.uniform(0.1, 5);

    const double v = iou(p, q);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(iou(q, p)).epsilon(1e-14));

    const double dx = rng.uniform(-3, 3), dy = rng.uniform(-3, 3);
    Box pt{p.x_min + dx, p.y_min + dy, p.x_max + dx, p.y_max + dy};
    Box qt{q.x_min + dx, q.y_min + dy, q.x_max + dx, q.y_max + dy};
    CHECK(iou(pt, qt) == doctest::Approx(v).epsilon(1e-10));
  }
}

TEST_CASE("grounding head wires fused features to predictions") {
  num::ParameterStore store;
  Rng rng(17);
  GroundingConfig gcfg;
  gcfg.image_h = gcfg.image_w = 8;
  GroundingHead head(4, gcfg, store, rng);

  FusedFeatureMap fused;
  fused.features = Tensor::zeros({4, 4});
  auto pred = head.predict(fused, 2, 2);
  CHECK(pred.raw.shape() == Shape{4, 5});
  CHECK(pred.conf_logits.shape() == Shape{4});
  // Zero features leave only the (zero) bias: anchor-size boxes.
  auto sel = infer(pred);
  CHECK(sel.cell == 0);

  CHECK_THROWS_AS(head.predict(fused, 3, 2), std::invalid_argument);
}

TEST_CASE("full pipeline gradient survives end to end at toy scale") {
  // T=2 frames, P=4 patches, S=3 words, D=4.
  ModelConfig cfg;
  cfg.encoder.patch_stride = 4;
  cfg.encoder.feature_dim = 4;
  cfg.encoder.vocab_size = 8;
  cfg.grounding.image_h = cfg.grounding.image_w = 8;
  cfg.correspondence.r_inter = 4;
  cfg.correspondence.r_cross = 3;

  num::ParameterStore store;
  Rng rng(19);
  Model model(cfg, store, rng);

  VideoClip clip;
  Rng px(23);
  for (int t = 0; t < 2; ++t) {
    auto f = Tensor::zeros({8, 8, 3});
    for (auto& v : f.mutable_values()) v = px.uniform();
    clip.frames.push_back(f);
    clip.frame_indices.push_back(t);
  }
  QueryTokens query{{1, 5, 2}, {"a", "b", "c"}};
  std::vector<GroundTruthBox> gts = {
      make_ground_truth({1, 1, 5, 6}, 2, 2, cfg.grounding),
      make_ground_truth({2, 2, 6, 7}, 2, 2, cfg.grounding)};

  std::vector<Tensor> params;
  for (const auto& name : store.names()) params.push_back(store.get(name));

  auto report = num::finite_diff_check(
      [&] { return model.loss(clip, query, gts, 7).total; }, params, 1e-5);
  CHECK(report.max_rel_err < 1e-3);
}
