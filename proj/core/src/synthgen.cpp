#include "dualcorr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>

#include "dualcorr/serialize.hpp"

namespace fs = std::filesystem;

namespace dualcorr {

namespace {

void check_config(const GenConfig& cfg) {
  if (cfg.frames < 1) throw std::invalid_argument("frame count must be >= 1");
  if (cfg.image_h < 4 || cfg.image_w < 4) {
    throw std::invalid_argument("image too small to render objects");
  }
  if (cfg.min_size < 2.0 || cfg.min_size > cfg.max_size) {
    throw std::invalid_argument("object size range invalid");
  }
  if (cfg.max_size >= std::min(cfg.image_h, cfg.image_w)) {
    throw std::invalid_argument("max object size does not fit in the image");
  }
  if (cfg.min_distractors < 0 || cfg.max_distractors < cfg.min_distractors) {
    throw std::invalid_argument("distractor count range invalid");
  }
  if (cfg.min_speed < 0 || cfg.max_speed < cfg.min_speed) {
    throw std::invalid_argument("speed range invalid");
  }
  if (cfg.palette_colors < 0 ||
      cfg.palette_colors > static_cast<int>(palette().size()) ||
      cfg.palette_colors == 1) {
    throw std::invalid_argument(
        "palette_colors must be 0 (all) or between 2 and the palette size");
  }
  if (cfg.referent_shape < -1 || cfg.referent_shape > 2) {
    throw std::invalid_argument("referent_shape must be -1 or a shape kind");
  }
  if (cfg.min_separation < 0) {
    throw std::invalid_argument("min_separation must be >= 0");
  }
  if (cfg.occlusion_prob < 0 || cfg.occlusion_prob > 1 ||
      cfg.blur_prob < 0 || cfg.blur_prob > 1) {
    throw std::invalid_argument("event probabilities must lie in [0,1]");
  }
  if (cfg.event_min_len < 1 || cfg.event_max_len < cfg.event_min_len) {
    throw std::invalid_argument("event length range invalid");
  }
}

}  // namespace

const std::array<std::array<double, 3>, 8>& palette() {
  static const std::array<std::array<double, 3>, 8> p = {{
      {1.0, 0.0, 0.0},  // red
      {0.0, 1.0, 0.0},  // green
      {0.0, 0.0, 1.0},  // blue
      {1.0, 1.0, 0.0},  // yellow
      {0.0, 1.0, 1.0},  // cyan
      {1.0, 0.0, 1.0},  // magenta
      {1.0, 1.0, 1.0},  // white
      {1.0, 0.5, 0.0},  // orange
  }};
  return p;
}

const std::array<std::string, 8>& color_names() {
  static const std::array<std::string, 8> n = {
      "red", "green", "blue", "yellow", "cyan", "magenta", "white", "orange"};
  return n;
}

const std::array<std::string, 3>& shape_names() {
  static const std::array<std::string, 3> n = {"square", "circle", "triangle"};
  return n;
}

const std::array<std::string, 4>& direction_names() {
  static const std::array<std::string, 4> n = {"left", "right", "up", "down"};
  return n;
}

const std::vector<std::string>& synth_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v = {"the", "moving", "past"};
    for (const auto& c : color_names()) v.push_back(c);
    for (const auto& s : shape_names()) v.push_back(s);
    for (const auto& d : direction_names()) v.push_back(d);
    return v;
  }();
  return vocab;
}

int vocab_id(const std::string& word) {
  const auto& vocab = synth_vocabulary();
  const auto it = std::find(vocab.begin(), vocab.end(), word);
  if (it == vocab.end()) {
    throw std::out_of_range("word not in vocabulary: " + word);
  }
  return static_cast<int>(it - vocab.begin());
}

const std::string& direction_word(double vel_x, double vel_y) {
  const auto& names = direction_names();
  if (std::abs(vel_x) >= std::abs(vel_y)) {
    return vel_x >= 0 ? names[1] : names[0];  // right : left
  }
  return vel_y >= 0 ? names[3] : names[2];  // down : up
}

Box object_box(const ObjectSpec& obj, int frame) {
  const double cx = obj.traj.start_x + frame * obj.traj.vel_x;
  const double cy = obj.traj.start_y + frame * obj.traj.vel_y;
  const double h = obj.size / 2.0;
  return Box{cx - h, cy - h, cx + h, cy + h};
}

void validate_scene(const SceneSpec& scene, const GenConfig& cfg) {
  if (scene.objects.empty()) {
    throw std::invalid_argument("scene has no objects");
  }
  const int n = static_cast<int>(scene.objects.size());
  if (scene.referent_index < 0 || scene.referent_index >= n) {
    throw std::invalid_argument("referent index out of range");
  }
  for (int i = 0; i < n; ++i) {
    const auto& obj = scene.objects[i];
    if (obj.size <= 0) throw std::invalid_argument("object size must be > 0");
    if (obj.color < 0 || obj.color >= static_cast<int>(palette().size())) {
      throw std::invalid_argument("color index out of palette range");
    }
    for (int t = 0; t < cfg.frames; ++t) {
      const double cx = obj.traj.start_x + t * obj.traj.vel_x;
      const double cy = obj.traj.start_y + t * obj.traj.vel_y;
      if (cx < 0 || cx > cfg.image_w || cy < 0 || cy > cfg.image_h) {
        std::ostringstream os;
        os << "object " << i << " center leaves the image at frame " << t;
        throw std::invalid_argument(os.str());
      }
    }
  }
  for (const auto& ev : scene.events) {
    if (ev.first_frame < 0 || ev.last_frame < ev.first_frame ||
        ev.last_frame >= cfg.frames) {
      throw std::invalid_argument("event frame range invalid");
    }
    if (ev.target < 0 || ev.target >= n) {
      throw std::invalid_argument("event target out of range");
    }
  }
}

namespace {

bool inside_shape(const ObjectSpec& obj, double cx, double cy, double x,
                  double y) {
  const double h = obj.size / 2.0;
  switch (obj.shape) {
    case ShapeKind::square:
      return std::abs(x - cx) <= h && std::abs(y - cy) <= h;
    case ShapeKind::circle: {
      const double dx = x - cx, dy = y - cy;
      return dx * dx + dy * dy <= h * h;
    }
    case ShapeKind::triangle:
      // Isosceles, apex up, inscribed in the bounding square.
      return y >= cy - h && y <= cy + h &&
             std::abs(x - cx) <= (y - (cy - h)) / 2.0;
  }
  return false;
}

void fill_rect(std::span<double> img, int h, int w, const Box& box,
               double gray) {
  const int px0 = std::max(0, static_cast<int>(std::floor(box.x_min)));
  const int px1 = std::min(w - 1, static_cast<int>(std::ceil(box.x_max)));
  const int py0 = std::max(0, static_cast<int>(std::floor(box.y_min)));
  const int py1 = std::min(h - 1, static_cast<int>(std::ceil(box.y_max)));
  for (int py = py0; py <= py1; ++py) {
    for (int px = px0; px <= px1; ++px) {
      const double x = px + 0.5, y = py + 0.5;
      if (x < box.x_min || x > box.x_max || y < box.y_min || y > box.y_max) {
        continue;
      }
      double* p = img.data() + (py * w + px) * 3;
      p[0] = p[1] = p[2] = gray;
    }
  }
}

void draw_object(std::span<double> img, int h, int w,
                 const ObjectSpec& obj, int frame) {
  const double cx = obj.traj.start_x + frame * obj.traj.vel_x;
  const double cy = obj.traj.start_y + frame * obj.traj.vel_y;
  const Box box = object_box(obj, frame);
  const auto& rgb = palette()[obj.color];
  const int px0 = std::max(0, static_cast<int>(std::floor(box.x_min)));
  const int px1 = std::min(w - 1, static_cast<int>(std::ceil(box.x_max)));
  const int py0 = std::max(0, static_cast<int>(std::floor(box.y_min)));
  const int py1 = std::min(h - 1, static_cast<int>(std::ceil(box.y_max)));
  for (int py = py0; py <= py1; ++py) {
    for (int px = px0; px <= px1; ++px) {
      if (!inside_shape(obj, cx, cy, px + 0.5, py + 0.5)) continue;
      double* p = img.data() + (py * w + px) * 3;
      p[0] = rgb[0];
      p[1] = rgb[1];
      p[2] = rgb[2];
    }
  }
}

void box_blur_3x3(std::span<double> img, int h, int w) {
  const std::vector<double> src(img.begin(), img.end());
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int sy = std::clamp(py + dy, 0, h - 1);
            const int sx = std::clamp(px + dx, 0, w - 1);
            acc += src[(sy * w + sx) * 3 + c];
          }
        }
        img[(py * w + px) * 3 + c] = acc / 9.0;
      }
    }
  }
}

}  // namespace

num::Tensor render_frame(const SceneSpec& scene, int frame,
                         const GenConfig& cfg) {
  if (frame < 0 || frame >= cfg.frames) {
    throw std::invalid_argument("frame index outside the configured range");
  }
  const int h = cfg.image_h, w = cfg.image_w;
  auto img = num::Tensor::zeros({h, w, 3});
  auto v = img.mutable_values();
  std::fill(v.begin(), v.end(), cfg.background);

  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    if (i == scene.referent_index) continue;
    draw_object(v, h, w, scene.objects[i], frame);
  }
  draw_object(v, h, w, scene.objects[scene.referent_index], frame);

  bool blur = false;
  for (const auto& ev : scene.events) {
    if (frame < ev.first_frame || frame > ev.last_frame) continue;
    if (ev.kind == EventKind::occlusion) {
      fill_rect(v, h, w, object_box(scene.objects[ev.target], frame),
                cfg.occluder_gray);
    } else {
      blur = true;
    }
  }
  if (blur) box_blur_3x3(v, h, w);
  return img;
}

QueryTokens describe_scene(const SceneSpec& scene, bool mention_distractor) {
  const auto& ref = scene.objects.at(scene.referent_index);
  std::vector<std::string> words = {
      "the", color_names()[ref.color],
      shape_names()[static_cast<int>(ref.shape)], "moving",
      direction_word(ref.traj.vel_x, ref.traj.vel_y)};
  for (int i = 0; mention_distractor &&
                  i < static_cast<int>(scene.objects.size());
       ++i) {
    if (i == scene.referent_index) continue;
    const auto& d = scene.objects[i];
    words.push_back("past");
    words.push_back("the");
    words.push_back(color_names()[d.color]);
    words.push_back(shape_names()[static_cast<int>(d.shape)]);
    break;  // only the first distractor appears in the query
  }
  QueryTokens tokens;
  tokens.raw_words = words;
  for (const auto& word : words) tokens.token_ids.push_back(vocab_id(word));
  return tokens;
}

namespace {

ObjectSpec sample_object(Rng& rng, const GenConfig& cfg, int color,
                         ShapeKind shape) {
  ObjectSpec obj;
  obj.color = color;
  obj.shape = shape;
  obj.size = rng.uniform(cfg.min_size, cfg.max_size);

  const double span =
      std::min(cfg.image_w, cfg.image_h) - obj.size;  // free room
  double speed_cap = cfg.max_speed;
  if (cfg.frames > 1) {
    speed_cap = std::min(speed_cap, 0.9 * span / (cfg.frames - 1));
  }
  if (speed_cap < cfg.min_speed) {
    throw std::invalid_argument(
        "config admits no in-frame trajectory: lower the speed or the frame "
        "count");
  }
  const double speed = rng.uniform(cfg.min_speed, speed_cap);
  const int dir = rng.uniform_int(0, 3);
  const double jitter = rng.uniform(-0.2, 0.2) * speed;
  switch (dir) {
    case 0: obj.traj.vel_x = -speed; obj.traj.vel_y = jitter; break;
    case 1: obj.traj.vel_x = speed;  obj.traj.vel_y = jitter; break;
    case 2: obj.traj.vel_x = jitter; obj.traj.vel_y = -speed; break;
    default: obj.traj.vel_x = jitter; obj.traj.vel_y = speed; break;
  }

  const double half = obj.size / 2.0;
  // The margin absorbs rounding in start + t*vel so boxes never poke out.
  constexpr double kMargin = 1e-6;
  const auto start_range = [&](double vel, double len, double& lo,
                               double& hi) {
    const double disp = (cfg.frames - 1) * vel;
    lo = half + std::max(0.0, -disp) + kMargin;
    hi = len - half - std::max(0.0, disp) - kMargin;
  };
  double lo_x, hi_x, lo_y, hi_y;
  start_range(obj.traj.vel_x, cfg.image_w, lo_x, hi_x);
  start_range(obj.traj.vel_y, cfg.image_h, lo_y, hi_y);
  if (lo_x > hi_x || lo_y > hi_y) {
    throw std::invalid_argument("config admits no in-frame trajectory");
  }
  obj.traj.start_x = rng.uniform(lo_x, hi_x);
  obj.traj.start_y = rng.uniform(lo_y, hi_y);
  return obj;
}

}  // namespace

SceneSpec make_scene(Rng& rng, const GenConfig& cfg) {
  check_config(cfg);

  const int n_colors = cfg.palette_colors > 0
                           ? cfg.palette_colors
                           : static_cast<int>(palette().size());
  const int ref_color = rng.uniform_int(0, n_colors - 1);
  const bool fixed_shape = cfg.referent_shape >= 0;
  const auto ref_shape = fixed_shape
                             ? static_cast<ShapeKind>(cfg.referent_shape)
                             : static_cast<ShapeKind>(rng.uniform_int(0, 2));
  const int n_dist =
      rng.uniform_int(cfg.min_distractors, cfg.max_distractors);

  const auto separated = [&](const ObjectSpec& a_obj, const ObjectSpec& d) {
    if (cfg.min_separation <= 0) return true;
    for (int t = 0; t < cfg.frames; ++t) {
      const Box a = object_box(a_obj, t);
      const Box b = object_box(d, t);
      const double gap_x =
          std::max({0.0, b.x_min - a.x_max, a.x_min - b.x_max});
      const double gap_y =
          std::max({0.0, b.y_min - a.y_max, a.y_min - b.y_max});
      if (std::max(gap_x, gap_y) < cfg.min_separation) return false;
    }
    return true;
  };

  // Referent first so distractor placement can keep its distance from it. A
  // referent path can box the distractors in, so on exhaustion the referent is
  // redrawn too; only a config that defeats every redraw is rejected.
  ObjectSpec ref_obj;
  std::vector<ObjectSpec> distractors;
  bool scene_ok = false;
  for (int redraw = 0; redraw < 16 && !scene_ok; ++redraw) {
    ref_obj = sample_object(rng, cfg, ref_color, ref_shape);
    distractors.clear();
    scene_ok = true;
    for (int i = 0; scene_ok && i < n_dist; ++i) {
      int color;
      ShapeKind shape;
      if (fixed_shape) {
        // The referent owns its shape kind; distractors pick the other two
        // and share the referent's color only in hard mode.
        shape = static_cast<ShapeKind>(
            (static_cast<int>(ref_shape) + 1 + rng.uniform_int(0, 1)) % 3);
        color = cfg.hard_distractors
                    ? ref_color
                    : (ref_color + 1 + rng.uniform_int(0, n_colors - 2)) %
                          n_colors;
      } else if (cfg.hard_distractors) {
        if (rng.uniform_int(0, 1) == 0) {  // share color, change shape
          color = ref_color;
          shape = static_cast<ShapeKind>(
              (static_cast<int>(ref_shape) + 1 + rng.uniform_int(0, 1)) % 3);
        } else {  // share shape, change color
          shape = ref_shape;
          color =
              (ref_color + 1 + rng.uniform_int(0, n_colors - 2)) % n_colors;
        }
      } else {
        do {
          color = rng.uniform_int(0, n_colors - 1);
          shape = static_cast<ShapeKind>(rng.uniform_int(0, 2));
        } while (color == ref_color && shape == ref_shape);
      }
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        ObjectSpec d = sample_object(rng, cfg, color, shape);
        if (separated(ref_obj, d)) {
          distractors.push_back(d);
          placed = true;
        }
      }
      scene_ok = placed;
    }
  }
  if (!scene_ok) {
    throw std::invalid_argument(
        "config admits no scene with the requested separation");
  }

  SceneSpec scene;
  scene.referent_index = rng.uniform_int(0, n_dist);
  for (int i = 0, d = 0; i <= n_dist; ++i) {
    if (i == scene.referent_index) {
      scene.objects.push_back(ref_obj);
    } else {
      scene.objects.push_back(distractors[d++]);
    }
  }

  const auto add_event = [&](EventKind kind, double prob) {
    if (rng.uniform() >= prob) return;
    const int max_len = std::min(cfg.event_max_len, cfg.frames);
    const int min_len = std::min(cfg.event_min_len, max_len);
    const int len = rng.uniform_int(min_len, max_len);
    const int start = rng.uniform_int(0, cfg.frames - len);
    scene.events.push_back(
        EventSpec{kind, start, start + len - 1, scene.referent_index});
  };
  add_event(EventKind::occlusion, cfg.occlusion_prob);
  add_event(EventKind::blur, cfg.blur_prob);
  return scene;
}

VideoSample generate_sample(uint64_t seed, const GenConfig& cfg) {
  Rng rng(seed);
  VideoSample sample;
  sample.scene = make_scene(rng, cfg);
  validate_scene(sample.scene, cfg);
  sample.tokens = describe_scene(sample.scene, cfg.mention_distractor);
  const auto& ref = sample.scene.objects[sample.scene.referent_index];
  for (int t = 0; t < cfg.frames; ++t) {
    sample.clip.frames.push_back(render_frame(sample.scene, t, cfg));
    sample.clip.frame_indices.push_back(t);
    sample.gt_boxes.push_back(object_box(ref, t));
  }
  return sample;
}

ClipSample sample_clip(const VideoClip& video, const std::vector<Box>& gt_boxes,
                       int t_frames, int stride, uint64_t seed) {
  if (t_frames < 1 || stride < 1) {
    throw std::invalid_argument("frame count and stride must be >= 1");
  }
  const int n = static_cast<int>(video.frames.size());
  if (gt_boxes.size() != video.frames.size()) {
    throw std::invalid_argument("one ground-truth box per frame required");
  }
  if (t_frames * stride > n) {
    std::ostringstream os;
    os << "cannot draw " << t_frames << " frames at stride " << stride
       << " from a " << n << "-frame video";
    throw std::invalid_argument(os.str());
  }
  Rng rng(seed);
  const int max_start = n - 1 - (t_frames - 1) * stride;
  const int start = rng.uniform_int(0, max_start);

  ClipSample clip;
  for (int k = 0; k < t_frames; ++k) {
    const int idx = start + k * stride;
    clip.clip.frames.push_back(video.frames[idx]);
    clip.clip.frame_indices.push_back(video.frame_indices[idx]);
    clip.gt_boxes.push_back(gt_boxes[idx]);
  }
  return clip;
}

ClipSample sample_clip(const VideoSample& sample, int t_frames, int stride,
                       uint64_t seed) {
  return sample_clip(sample.clip, sample.gt_boxes, t_frames, stride, seed);
}

GenConfig preset_clean() {
  GenConfig cfg;
  cfg.min_distractors = cfg.max_distractors = 1;
  return cfg;
}

GenConfig preset_standard() {
  GenConfig cfg;
  cfg.min_distractors = 1;
  cfg.max_distractors = 2;
  cfg.occlusion_prob = 0.5;
  cfg.blur_prob = 0.3;
  return cfg;
}

GenConfig preset_occlusion() {
  GenConfig cfg;
  cfg.min_distractors = cfg.max_distractors = 1;
  cfg.occlusion_prob = 1.0;
  cfg.event_min_len = 3;
  cfg.event_max_len = 5;
  return cfg;
}

GenConfig preset_distractor_heavy() {
  GenConfig cfg;
  cfg.min_distractors = 2;
  cfg.max_distractors = 3;
  cfg.hard_distractors = true;
  return cfg;
}

namespace {

std::string sample_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05d", index);
  return buf;
}

std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.bin", index);
  return buf;
}

const char* event_name(EventKind kind) {
  return kind == EventKind::occlusion ? "occlusion" : "blur";
}

EventKind event_from_name(const std::string& name) {
  if (name == "occlusion") return EventKind::occlusion;
  if (name == "blur") return EventKind::blur;
  throw std::runtime_error("unknown event kind: " + name);
}

}  // namespace

std::string make_dataset(const std::string& root, int n, uint64_t seed,
                         const GenConfig& cfg, double test_fraction) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  if (test_fraction < 0 || test_fraction > 1) {
    throw std::invalid_argument("test fraction must lie in [0,1]");
  }
  fs::create_directories(root);
  std::ofstream manifest(root + "/manifest.txt");
  std::ofstream train(root + "/train.txt");
  std::ofstream test(root + "/test.txt");
  if (!manifest || !train || !test) {
    throw std::runtime_error("cannot create dataset manifests under " + root);
  }

  for (int i = 0; i < n; ++i) {
    const uint64_t sample_seed = Rng::mix(seed, i);
    const auto sample = generate_sample(sample_seed, cfg);
    const std::string name = sample_dir_name(i);
    const std::string dir = root + "/" + name;
    fs::create_directories(dir);

    for (int t = 0; t < static_cast<int>(sample.clip.frames.size()); ++t) {
      num::save_tensor(dir + "/" + frame_file_name(t), sample.clip.frames[t]);
    }

    std::ofstream query(dir + "/query.txt");
    for (size_t w = 0; w < sample.tokens.raw_words.size(); ++w) {
      query << (w ? " " : "") << sample.tokens.raw_words[w];
    }
    query << "\n";

    std::ofstream boxes(dir + "/boxes.txt");
    boxes << std::setprecision(17);
    for (int t = 0; t < static_cast<int>(sample.gt_boxes.size()); ++t) {
      const auto& b = sample.gt_boxes[t];
      boxes << t << " " << b.x_min << " " << b.y_min << " " << b.x_max << " "
            << b.y_max << "\n";
    }

    std::ofstream events(dir + "/events.txt");
    for (const auto& ev : sample.scene.events) {
      events << event_name(ev.kind) << " " << ev.first_frame << " "
             << ev.last_frame << "\n";
    }

    manifest << name << "\n";
    Rng split(Rng::mix(sample_seed, 0x5eed));
    (split.uniform() < test_fraction ? test : train) << name << "\n";
  }
  return root + "/manifest.txt";
}

LoadedSample load_sample(const std::string& dir) {
  LoadedSample out;
  std::vector<std::string> frame_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("frame_", 0) == 0) frame_files.push_back(name);
  }
  if (frame_files.empty()) {
    throw std::runtime_error("no frame files under " + dir);
  }
  std::sort(frame_files.begin(), frame_files.end());
  for (const auto& name : frame_files) {
    out.clip.frames.push_back(num::load_tensor(dir + "/" + name));
    out.clip.frame_indices.push_back(std::stoi(name.substr(6)));
  }

  std::ifstream query(dir + "/query.txt");
  if (!query) throw std::runtime_error("missing query.txt under " + dir);
  std::string word;
  while (query >> word) {
    out.tokens.raw_words.push_back(word);
    out.tokens.token_ids.push_back(vocab_id(word));
  }

  std::ifstream boxes(dir + "/boxes.txt");
  if (!boxes) throw std::runtime_error("missing boxes.txt under " + dir);
  int frame_idx;
  Box b;
  while (boxes >> frame_idx >> b.x_min >> b.y_min >> b.x_max >> b.y_max) {
    out.gt_boxes.push_back(b);
  }
  if (out.gt_boxes.size() != out.clip.frames.size()) {
    std::ostringstream os;
    os << "boxes.txt lists " << out.gt_boxes.size() << " boxes but " << dir
       << " holds " << out.clip.frames.size() << " frames";
    throw std::runtime_error(os.str());
  }

  std::ifstream events(dir + "/events.txt");
  if (events) {
    std::string kind;
    int first, last;
    while (events >> kind >> first >> last) {
      out.events.push_back(EventSpec{event_from_name(kind), first, last, 0});
    }
  }
  return out;
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace dualcorr
