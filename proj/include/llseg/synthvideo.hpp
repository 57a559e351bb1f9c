#ifndef LLSEG_SYNTHVIDEO_HPP
#define LLSEG_SYNTHVIDEO_HPP

#include <array>
#include <string>
#include <vector>

#include "llseg/label_map.hpp"
#include "llseg/tensor_nn.hpp"

namespace llseg {

// 3-channel color image, values in [0, 1], planar 3 x H x W.
struct Frame {
  Tensor rgb;

  Frame() = default;
  Frame(std::size_t h, std::size_t w) : rgb({3, h, w}) {}
  std::size_t height() const { return rgb.shape[1]; }
  std::size_t width() const { return rgb.shape[2]; }
};

struct SceneConfig {
  std::uint64_t seed = 0;
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t num_shapes = 3;
  std::size_t num_classes = 4;
  double min_size = 6.0;
  double max_size = 14.0;
  double max_speed = 2.0;            // pixels per frame, per axis
  double texture_amplitude = 0.05;   // uniform noise added to colors
  bool texture_flicker = false;      // resample the noise every frame
  double scene_change_prob = 0.0;    // per-frame shape-set resample
};

struct Sequence {
  std::vector<Frame> frames;
  std::vector<LabelMap> labels;
};

// Translating rectangles/discs over a background class, reflecting at the
// borders, with exact rasterized labels. Deterministic under cfg.seed.
Sequence generate_sequence(const SceneConfig& cfg, std::size_t length);

// Frozen seeded conv stack standing in for the S_l / S_h backbone split.
// Low stage downsamples by 2 once; high stage consumes the low output.
struct ToyExtractor {
  ConvLayer low1, low2;           // 3 -> C_l, C_l -> C_l
  ConvLayer high1, high2, high3;  // C_l -> C_h, C_h -> C_h, C_h -> C_h

  ToyExtractor(std::uint64_t seed, std::size_t c_l, std::size_t c_h);

  Tensor extract(const Frame& frame) const;        // low features, H/2 x W/2
  Tensor extract_high(const Tensor& f_low) const;  // high features, same grid

  std::vector<std::pair<std::string, Tensor*>> named_params();
};

// frames/NNNNNN.ppm (P6), labels/NNNNNN.pgm (P5), meta.json.
void save_sequence(const std::string& dir, const Sequence& seq,
                   const SceneConfig& cfg);
Sequence load_sequence(const std::string& dir);

void write_ppm(const std::string& path, const Frame& frame);
Frame read_ppm(const std::string& path);
void write_pgm(const std::string& path, const LabelMap& labels);
LabelMap read_pgm(const std::string& path);

// Mean IoU over classes present in gt or pred; classes absent from both are
// excluded. 1.0 iff the maps are identical.
double miou(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes);
double pixel_accuracy(const LabelMap& pred, const LabelMap& gt);
double class_accuracy(const LabelMap& pred, const LabelMap& gt,
                      std::size_t num_classes);

}  // namespace llseg

#endif
