#include "dualcorr/train_eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dualcorr {

TrainSample make_train_sample(const VideoSample& sample) {
  return TrainSample{sample.clip, sample.tokens, sample.gt_boxes,
                     sample.scene.events};
}

TrainSample make_train_sample(const LoadedSample& sample) {
  return TrainSample{sample.clip, sample.tokens, sample.gt_boxes,
                     sample.events};
}

std::vector<TrainSample> load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const auto root = fs::path(manifest_path).parent_path();
  std::vector<TrainSample> out;
  for (const auto& name : read_manifest(manifest_path)) {
    out.push_back(make_train_sample(load_sample((root / name).string())));
  }
  return out;
}

RmsProp::RmsProp(num::ParameterStore& params, const OptimizerConfig& cfg)
    : params_(params), cfg_(cfg) {
  if (cfg.lr0 < 0 || cfg.rho < 0 || cfg.rho >= 1 || cfg.eps <= 0) {
    throw std::invalid_argument("optimizer config out of range");
  }
}

double RmsProp::learning_rate(int step, int total_steps) const {
  if (total_steps < 1) return cfg_.lr0;
  const double frac =
      std::clamp(static_cast<double>(step) / total_steps, 0.0, 1.0);
  return cfg_.lr0 * std::pow(1.0 - frac, cfg_.poly_power);
}

void RmsProp::step(int step_index, int total_steps) {
  const double lr = learning_rate(step_index, total_steps);
  for (const auto& name : params_.names()) {
    auto param = params_.get(name);
    const auto grad = param.grad();
    if (grad.empty()) continue;  // untouched by this backward pass
    auto& acc = accum_[name];
    acc.resize(grad.size(), 0.0);
    auto values = param.mutable_values();
    for (size_t i = 0; i < grad.size(); ++i) {
      acc[i] = cfg_.rho * acc[i] + (1.0 - cfg_.rho) * grad[i] * grad[i];
      values[i] -= lr * grad[i] / (std::sqrt(acc[i]) + cfg_.eps);
    }
  }
}

std::string format_step(const StepRecord& rec) {
  std::ostringstream os;
  os << std::setprecision(17) << rec.step << " " << rec.losses.loc << " "
     << rec.losses.cls << " " << rec.losses.inter << " " << rec.losses.cross
     << " " << rec.losses.total;
  return os.str();
}

TrainResult train(Model& model, num::ParameterStore& params,
                  const std::vector<TrainSample>& data, const TrainConfig& cfg,
                  std::ostream* log_stream) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (cfg.steps < 1) throw std::invalid_argument("step count must be >= 1");

  const auto& mc = model.config();
  const int grid_h = mc.grounding.image_h / mc.encoder.patch_stride;
  const int grid_w = mc.grounding.image_w / mc.encoder.patch_stride;

  RmsProp opt(params, cfg.optimizer);
  Rng rng(cfg.seed);
  TrainResult result;
  result.log.reserve(cfg.steps);

  for (int s = 0; s < cfg.steps; ++s) {
    const int idx = rng.uniform_int(0, static_cast<int>(data.size()) - 1);
    const uint64_t clip_seed = rng.next_u64();
    const auto& sample = data[idx];
    const auto clip = sample_clip(sample.clip, sample.gt_boxes,
                                  cfg.clip_frames, cfg.frame_stride, clip_seed);

    std::vector<GroundTruthBox> gts;
    gts.reserve(clip.gt_boxes.size());
    for (const auto& box : clip.gt_boxes) {
      gts.push_back(make_ground_truth(box, grid_h, grid_w, mc.grounding));
    }

    auto res = model.loss(clip.clip, sample.tokens, gts, Rng::mix(cfg.seed, s));
    if (!std::isfinite(res.parts.total)) {
      throw std::runtime_error("training diverged at step " +
                               std::to_string(s) + ": loss is not finite");
    }

    params.zero_grad();
    num::backward(res.total);
    opt.step(s, cfg.steps);

    StepRecord rec{s, res.parts};
    if (log_stream) *log_stream << format_step(rec) << "\n";
    result.log.push_back(rec);
  }
  return result;
}

EvalReport score_boxes(const std::vector<std::vector<Box>>& preds,
                       const std::vector<std::vector<Box>>& gts,
                       const std::vector<double>& alphas, int image_w) {
  if (preds.empty() || preds.size() != gts.size()) {
    throw std::invalid_argument("predictions and ground truth must pair up");
  }

  std::vector<std::vector<double>> ious(preds.size());
  std::vector<double> all_ious;
  std::vector<double> all_dists;
  for (size_t v = 0; v < preds.size(); ++v) {
    if (preds[v].size() != gts[v].size() || preds[v].empty()) {
      throw std::invalid_argument("one prediction per frame required");
    }
    for (size_t t = 0; t < preds[v].size(); ++t) {
      const auto& p = preds[v][t];
      const auto& g = gts[v][t];
      ious[v].push_back(iou(p, g));
      all_ious.push_back(ious[v].back());
      all_dists.push_back(std::hypot(p.center_x() - g.center_x(),
                                     p.center_y() - g.center_y()));
    }
  }

  EvalReport report;
  const double n_videos = static_cast<double>(preds.size());
  const double n_frames = static_cast<double>(all_ious.size());

  for (const double alpha : alphas) {
    int hits = 0;
    for (const auto& v : ious) {
      hits += std::all_of(v.begin(), v.end(),
                          [&](double x) { return x > alpha; });
    }
    report.accu_at[alpha] = hits / n_videos;
  }

  double auc = 0.0;
  auto success_at = [&](double tau) {
    int c = 0;
    for (double x : all_ious) c += x >= tau;
    return c / n_frames;
  };
  for (int i = 0; i < 20; ++i) {
    auc += 0.5 * (success_at(i * 0.05) + success_at((i + 1) * 0.05)) * 0.05;
  }
  report.success = auc;

  const double radius = 20.0 * (image_w / 256.0);
  int close = 0;
  for (double d : all_dists) close += d <= radius;
  report.precision = close / n_frames;

  double consistency_sum = 0.0;
  int consistency_videos = 0;
  for (const auto& v : preds) {
    if (v.size() < 2) continue;
    double s = 0;
    for (size_t t = 0; t + 1 < v.size(); ++t) s += iou(v[t], v[t + 1]);
    consistency_sum += s / static_cast<double>(v.size() - 1);
    ++consistency_videos;
  }
  report.consistency =
      consistency_videos ? consistency_sum / consistency_videos : 0.0;
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<TrainSample>& data,
                    const std::vector<double>& alphas) {
  if (data.empty()) throw std::invalid_argument("evaluation set is empty");

  // Parallel per video, results land in index order so the reduction is
  // deterministic regardless of scheduling.
  std::vector<std::vector<Box>> preds(data.size());
  std::vector<std::vector<Box>> gts(data.size());
  const unsigned workers = std::min<unsigned>(
      std::max(1u, std::thread::hardware_concurrency()),
      static_cast<unsigned>(data.size()));
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w; i < data.size(); i += workers) {
          const auto selections =
              model.infer_clip(data[i].clip, data[i].tokens);
          for (const auto& sel : selections) preds[i].push_back(sel.box);
          gts[i] = data[i].gt_boxes;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  return score_boxes(preds, gts, alphas,
                     model.config().grounding.image_w);
}

std::string to_key_value(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (const auto& [alpha, value] : report.accu_at) {
    os << "accu@" << alpha << "=" << value << "\n";
  }
  os << "success=" << report.success << "\n";
  os << "precision=" << report.precision << "\n";
  os << "consistency=" << report.consistency << "\n";
  return os.str();
}

std::string to_json(const EvalReport& report) {
  nlohmann::json j;
  for (const auto& [alpha, value] : report.accu_at) {
    std::ostringstream key;
    key << alpha;
    j["accu"][key.str()] = value;
  }
  j["success"] = report.success;
  j["precision"] = report.precision;
  j["consistency"] = report.consistency;
  return j.dump(2);
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& grid,
                                      const std::vector<TrainSample>& train_set,
                                      const std::vector<TrainSample>& eval_set,
                                      uint64_t seed) {
  std::vector<AblationRow> rows;
  for (const auto& variant : grid) {
    num::ParameterStore store;
    Rng init(seed);  // identical initialization across variants
    Model model(variant.config, store, init);
    TrainConfig tc = variant.train;
    tc.seed = seed;  // identical data order too; only the config differs
    const auto result = train(model, store, train_set, tc);
    AblationRow row;
    row.name = variant.name;
    row.final_total = result.log.back().losses.total;
    row.report = evaluate(model, eval_set);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  size_t name_width = 8;
  for (const auto& row : rows) name_width = std::max(name_width, row.name.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_width) + 2) << "variant";
  if (!rows.empty()) {
    for (const auto& [alpha, _] : rows.front().report.accu_at) {
      std::ostringstream h;
      h << "accu@" << alpha;
      os << std::setw(10) << h.str();
    }
  }
  os << std::setw(10) << "success" << std::setw(11) << "precision"
     << std::setw(13) << "consistency" << std::setw(12) << "final_loss"
     << "\n";
  os << std::setprecision(4) << std::fixed;
  for (const auto& row : rows) {
    os << std::setw(static_cast<int>(name_width) + 2) << row.name;
    for (const auto& [_, value] : row.report.accu_at) {
      os << std::setw(10) << value;
    }
    os << std::setw(10) << row.report.success << std::setw(11)
       << row.report.precision << std::setw(13) << row.report.consistency
       << std::setw(12) << row.final_total << "\n";
  }
  return os.str();
}

}  // namespace dualcorr
