#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dualcorr/encoders.hpp"
#include "dualcorr/grounding.hpp"
#include "dualcorr/rng.hpp"

namespace dualcorr {

// Deterministic synthetic clips: colored geometric objects on linear
// trajectories, a templated referring query, analytic ground-truth boxes,
// and optional occlusion/blur stress events.

enum class ShapeKind { square = 0, circle = 1, triangle = 2 };
enum class EventKind { occlusion = 0, blur = 1 };

struct Trajectory {
  double start_x = 0, start_y = 0;  // center at frame 0, pixels
  double vel_x = 0, vel_y = 0;      // pixels per frame
};

struct ObjectSpec {
  ShapeKind shape = ShapeKind::square;
  int color = 0;      // palette index
  double size = 8.0;  // side of the bounding square, pixels
  Trajectory traj;
};

struct EventSpec {
  EventKind kind = EventKind::occlusion;
  int first_frame = 0;  // inclusive
  int last_frame = 0;   // inclusive
  int target = 0;       // object index (occlusion covers it; blur is global)
};

struct SceneSpec {
  std::vector<ObjectSpec> objects;
  int referent_index = 0;
  std::vector<EventSpec> events;
};

struct GenConfig {
  int frames = 12;
  int image_h = 32;
  int image_w = 32;
  int min_distractors = 1;
  int max_distractors = 1;
  double min_size = 6.0;
  double max_size = 12.0;
  double min_speed = 0.4;
  double max_speed = 1.4;
  double occlusion_prob = 0.0;
  double blur_prob = 0.0;
  int event_min_len = 2;
  int event_max_len = 4;
  // Every distractor shares the referent's color or shape (hard negatives).
  bool hard_distractors = false;
  // Number of leading palette entries scenes draw from; 0 means the full
  // palette. Small values keep colors far apart in RGB.
  int palette_colors = 0;
  // When false the query names only the referent even if distractors are in
  // the scene; the referent's attribute pair still identifies it uniquely.
  bool mention_distractor = true;
  // Fix the referent to one shape kind (static_cast<int>(ShapeKind)); -1
  // samples it per scene. When fixed, distractors never use that shape, so
  // the referent is the scene's only object of its kind, and they share the
  // referent's color only when hard_distractors is set.
  int referent_shape = -1;
  // Minimum pixel gap between the referent's box and every distractor's box
  // on every frame; 0 allows overlap. Enforced by trajectory resampling.
  double min_separation = 0.0;
  double background = 0.15;
  double occluder_gray = 0.5;
};

// Ready-made configurations used by the evaluation harness.
GenConfig preset_clean();             // one distractor, no events
GenConfig preset_standard();          // mixed events, 1-2 distractors
GenConfig preset_occlusion();         // guaranteed occlusion event
GenConfig preset_distractor_heavy();  // 2-3 attribute-sharing distractors

struct VideoSample {
  VideoClip clip;             // every frame of the scene, in order
  QueryTokens tokens;         // templated referring expression
  std::vector<Box> gt_boxes;  // referent box per frame, pixel units
  SceneSpec scene;            // generating specification, kept for tests
};

struct ClipSample {
  VideoClip clip;             // T frames at stride F
  std::vector<Box> gt_boxes;  // aligned with clip.frames
};

// Fixed 8-color palette (RGB in [0,1]) and its color names.
const std::array<std::array<double, 3>, 8>& palette();
const std::array<std::string, 8>& color_names();
const std::array<std::string, 3>& shape_names();
const std::array<std::string, 4>& direction_names();

// Closed vocabulary covering every word a template can emit; token id is
// the index into this list.
const std::vector<std::string>& synth_vocabulary();
int vocab_id(const std::string& word);  // throws std::out_of_range

// Direction word for a velocity: dominant axis, horizontal preferred on
// ties, zero velocity reads as "right".
const std::string& direction_word(double vel_x, double vel_y);

// Analytic bounding box of an object at a frame (center +- size/2; every
// shape is inscribed so the box is tight).
Box object_box(const ObjectSpec& obj, int frame);

// Throws std::invalid_argument if any object's center leaves the image on
// any frame, if the referent index is out of range, or if an event's frame
// range or target is invalid.
void validate_scene(const SceneSpec& scene, const GenConfig& cfg);

// Renders one frame: background, distractors, referent last, occluders,
// then blur. Values in [0,1], tensor shape {image_h, image_w, 3}.
num::Tensor render_frame(const SceneSpec& scene, int frame,
                         const GenConfig& cfg);

// Templated query for a scene: "the <color> <shape> moving <direction>
// past the <color2> <shape2>" with the first distractor as context, or the
// 5-word prefix when the scene has no distractor.
QueryTokens describe_scene(const SceneSpec& scene,
                           bool mention_distractor = true);

// Random scene honoring the invariants: the referent's (color, shape) pair
// is unique, every bounding box stays fully inside the image.
SceneSpec make_scene(Rng& rng, const GenConfig& cfg);

// Deterministic end-to-end generation. Throws std::invalid_argument when
// the config cannot produce an in-frame trajectory.
VideoSample generate_sample(uint64_t seed, const GenConfig& cfg);

// T frames at temporal stride F from a seeded random start offset.
// Requires T >= 1, F >= 1, T*F <= sample frame count.
ClipSample sample_clip(const VideoSample& sample, int t_frames, int stride,
                       uint64_t seed);
ClipSample sample_clip(const VideoClip& clip, const std::vector<Box>& gt_boxes,
                       int t_frames, int stride, uint64_t seed);

// Dataset on disk: one directory per sample (frame_XX.bin tensors,
// query.txt, boxes.txt, events.txt), manifest.txt plus train.txt/test.txt
// split by a seed-stable hash. Returns the manifest path.
std::string make_dataset(const std::string& root, int n, uint64_t seed,
                         const GenConfig& cfg, double test_fraction = 0.25);

struct LoadedSample {
  VideoClip clip;
  QueryTokens tokens;
  std::vector<Box> gt_boxes;
  std::vector<EventSpec> events;
};

LoadedSample load_sample(const std::string& dir);
std::vector<std::string> read_manifest(const std::string& path);

}  // namespace dualcorr
