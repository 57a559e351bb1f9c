#include "llseg/synthvideo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace llseg {

namespace {

constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {0.15, 0.15, 0.18},  // background
    {0.80, 0.20, 0.20},
    {0.20, 0.70, 0.30},
    {0.25, 0.35, 0.85},
    {0.85, 0.75, 0.20},
    {0.75, 0.25, 0.75},
    {0.20, 0.70, 0.75},
    {0.90, 0.55, 0.20},
}};

struct Shape {
  int kind = 0;  // 0 rect, 1 disc
  std::uint8_t cls = 1;
  double cy = 0, cx = 0;
  double half = 0;
  double vy = 0, vx = 0;
};

std::vector<Shape> sample_shapes(const SceneConfig& cfg,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Shape> shapes(cfg.num_shapes);
  for (Shape& s : shapes) {
    s.kind = unit(rng) < 0.5 ? 0 : 1;
    s.cls = static_cast<std::uint8_t>(
        1 + static_cast<std::size_t>(unit(rng) *
                                     static_cast<double>(cfg.num_classes - 1)) %
                (cfg.num_classes - 1));
    const double size = cfg.min_size + unit(rng) * (cfg.max_size - cfg.min_size);
    s.half = size / 2.0;
    s.cy = s.half + unit(rng) * (static_cast<double>(cfg.height) - 2 * s.half);
    s.cx = s.half + unit(rng) * (static_cast<double>(cfg.width) - 2 * s.half);
    s.vy = std::round((2.0 * unit(rng) - 1.0) * cfg.max_speed);
    s.vx = std::round((2.0 * unit(rng) - 1.0) * cfg.max_speed);
  }
  return shapes;
}

void advance(Shape& s, double h, double w) {
  s.cy += s.vy;
  s.cx += s.vx;
  if (s.cy < s.half) {
    s.cy = 2 * s.half - s.cy;
    s.vy = -s.vy;
  }
  if (s.cy > h - 1 - s.half) {
    s.cy = 2 * (h - 1 - s.half) - s.cy;
    s.vy = -s.vy;
  }
  if (s.cx < s.half) {
    s.cx = 2 * s.half - s.cx;
    s.vx = -s.vx;
  }
  if (s.cx > w - 1 - s.half) {
    s.cx = 2 * (w - 1 - s.half) - s.cx;
    s.vx = -s.vx;
  }
}

bool inside(const Shape& s, double py, double px) {
  if (s.kind == 0)
    return std::fabs(py - s.cy) <= s.half && std::fabs(px - s.cx) <= s.half;
  const double dy = py - s.cy, dx = px - s.cx;
  return dy * dy + dx * dx <= s.half * s.half;
}

void render(const SceneConfig& cfg, const std::vector<Shape>& shapes,
            const std::vector<double>& noise, Frame& frame, LabelMap& labels) {
  const std::size_t h = cfg.height, w = cfg.width;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      std::uint8_t cls = 0;
      for (const Shape& s : shapes)
        if (inside(s, static_cast<double>(i), static_cast<double>(j)))
          cls = s.cls;
      labels.at(i, j) = cls;
      const auto& base = kPalette[cls % kPalette.size()];
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double n = noise[(ch * h + i) * w + j];
        frame.rgb.at3(ch, i, j) = std::clamp(base[ch] + n, 0.0, 1.0);
      }
    }
  }
}

std::vector<double> sample_noise(const SceneConfig& cfg,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-cfg.texture_amplitude,
                                           cfg.texture_amplitude);
  std::vector<double> noise(3 * cfg.height * cfg.width, 0.0);
  if (cfg.texture_amplitude > 0.0)
    for (double& x : noise) x = d(rng);
  return noise;
}

Tensor avg_pool2(const Tensor& x) {
  const std::size_t c = x.shape[0];
  const std::size_t h = x.shape[1] / 2;
  const std::size_t w = x.shape[2] / 2;
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out.at3(ch, i, j) =
            0.25 * (x.at3(ch, 2 * i, 2 * j) + x.at3(ch, 2 * i, 2 * j + 1) +
                    x.at3(ch, 2 * i + 1, 2 * j) +
                    x.at3(ch, 2 * i + 1, 2 * j + 1));
  return out;
}

// Whitespace-delimited header token, '#' comments skipped.
std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw std::runtime_error("malformed netpbm header");
  return tok;
}

}  // namespace

Sequence generate_sequence(const SceneConfig& cfg, std::size_t length) {
  if (length < 1) throw std::invalid_argument("sequence length must be >= 1");
  if (cfg.width < 2 || cfg.height < 2 || cfg.num_classes < 2 ||
      cfg.num_shapes < 1 || cfg.min_size <= 0 || cfg.max_size < cfg.min_size)
    throw std::invalid_argument("invalid scene config");
  if (cfg.num_classes > kPalette.size())
    throw std::invalid_argument("too many classes for the color palette");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Shape> shapes = sample_shapes(cfg, rng);
  std::vector<double> noise = sample_noise(cfg, rng);

  Sequence seq;
  seq.frames.reserve(length);
  seq.labels.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      if (cfg.scene_change_prob > 0.0 && unit(rng) < cfg.scene_change_prob)
        shapes = sample_shapes(cfg, rng);
      else
        for (Shape& s : shapes)
          advance(s, static_cast<double>(cfg.height),
                  static_cast<double>(cfg.width));
      if (cfg.texture_flicker) noise = sample_noise(cfg, rng);
    }
    Frame frame(cfg.height, cfg.width);
    LabelMap labels(cfg.height, cfg.width);
    render(cfg, shapes, noise, frame, labels);
    seq.frames.push_back(std::move(frame));
    seq.labels.push_back(std::move(labels));
  }
  return seq;
}

ToyExtractor::ToyExtractor(std::uint64_t seed, std::size_t c_l,
                           std::size_t c_h)
    : low1(c_l, 3, 3),
      low2(c_l, c_l, 3),
      high1(c_h, c_l, 3),
      high2(c_h, c_h, 3),
      high3(c_h, c_h, 3) {
  std::mt19937_64 rng(seed);
  low1.init(rng);
  low2.init(rng);
  high1.init(rng);
  high2.init(rng);
  high3.init(rng);
}

Tensor ToyExtractor::extract(const Frame& frame) const {
  if (frame.height() % 2 != 0 || frame.width() % 2 != 0)
    throw std::invalid_argument("frame dimensions must be even");
  Tensor x = relu(conv2d(frame.rgb, low1));
  x = avg_pool2(x);
  return relu(conv2d(x, low2));
}

Tensor ToyExtractor::extract_high(const Tensor& f_low) const {
  Tensor x = relu(conv2d(f_low, high1));
  x = relu(conv2d(x, high2));
  return conv2d(x, high3);
}

std::vector<std::pair<std::string, Tensor*>> ToyExtractor::named_params() {
  return {
      {"extractor.low1.w", &low1.w},   {"extractor.low1.b", &low1.b},
      {"extractor.low2.w", &low2.w},   {"extractor.low2.b", &low2.b},
      {"extractor.high1.w", &high1.w}, {"extractor.high1.b", &high1.b},
      {"extractor.high2.w", &high2.w}, {"extractor.high2.b", &high2.b},
      {"extractor.high3.w", &high3.w}, {"extractor.high3.b", &high3.b},
  };
}

void write_ppm(const std::string& path, const Frame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  const std::size_t h = frame.height(), w = frame.width();
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(3 * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < 3; ++ch)
        row[3 * j + ch] = static_cast<unsigned char>(
            std::clamp(std::lround(frame.rgb.at3(ch, i, j) * 255.0), 0L, 255L));
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("ppm write failed: " + path);
}

Frame read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  if (next_token(is) != "P6")
    throw std::runtime_error("not a binary ppm: " + path);
  const std::size_t w = std::stoull(next_token(is));
  const std::size_t h = std::stoull(next_token(is));
  const std::size_t maxval = std::stoull(next_token(is));
  if (maxval != 255) throw std::runtime_error("unsupported ppm maxval");
  Frame frame(h, w);
  std::vector<unsigned char> row(3 * w);
  for (std::size_t i = 0; i < h; ++i) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!is) throw std::runtime_error("ppm truncated: " + path);
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < 3; ++ch)
        frame.rgb.at3(ch, i, j) = row[3 * j + ch] / 255.0;
  }
  return frame;
}

void write_pgm(const std::string& path, const LabelMap& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << "P5\n" << labels.width << " " << labels.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(labels.idx.data()),
           static_cast<std::streamsize>(labels.idx.size()));
  if (!os) throw std::runtime_error("pgm write failed: " + path);
}

LabelMap read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  if (next_token(is) != "P5")
    throw std::runtime_error("not a binary pgm: " + path);
  const std::size_t w = std::stoull(next_token(is));
  const std::size_t h = std::stoull(next_token(is));
  const std::size_t maxval = std::stoull(next_token(is));
  if (maxval != 255) throw std::runtime_error("unsupported pgm maxval");
  LabelMap labels(h, w);
  is.read(reinterpret_cast<char*>(labels.idx.data()),
          static_cast<std::streamsize>(labels.idx.size()));
  if (!is) throw std::runtime_error("pgm truncated: " + path);
  return labels;
}

void save_sequence(const std::string& dir, const Sequence& seq,
                   const SceneConfig& cfg) {
  if (seq.frames.size() != seq.labels.size())
    throw std::invalid_argument("frame/label count mismatch");
  fs::create_directories(fs::path(dir) / "frames");
  fs::create_directories(fs::path(dir) / "labels");
  char name[16];
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    std::snprintf(name, sizeof(name), "%06zu", t);
    write_ppm((fs::path(dir) / "frames" / (std::string(name) + ".ppm")).string(),
              seq.frames[t]);
    write_pgm((fs::path(dir) / "labels" / (std::string(name) + ".pgm")).string(),
              seq.labels[t]);
  }
  nlohmann::json meta = {
      {"seed", cfg.seed},
      {"width", cfg.width},
      {"height", cfg.height},
      {"length", seq.frames.size()},
      {"num_shapes", cfg.num_shapes},
      {"num_classes", cfg.num_classes},
      {"min_size", cfg.min_size},
      {"max_size", cfg.max_size},
      {"max_speed", cfg.max_speed},
      {"texture_amplitude", cfg.texture_amplitude},
      {"texture_flicker", cfg.texture_flicker},
      {"scene_change_prob", cfg.scene_change_prob},
  };
  std::ofstream os((fs::path(dir) / "meta.json").string());
  os << meta.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write meta.json in " + dir);
}

Sequence load_sequence(const std::string& dir) {
  const fs::path frames_dir = fs::path(dir) / "frames";
  const fs::path labels_dir = fs::path(dir) / "labels";
  if (!fs::is_directory(frames_dir) || !fs::is_directory(labels_dir))
    throw std::runtime_error("not a sequence directory: " + dir);
  std::vector<fs::path> fpaths, lpaths;
  for (const auto& e : fs::directory_iterator(frames_dir))
    if (e.path().extension() == ".ppm") fpaths.push_back(e.path());
  for (const auto& e : fs::directory_iterator(labels_dir))
    if (e.path().extension() == ".pgm") lpaths.push_back(e.path());
  std::sort(fpaths.begin(), fpaths.end());
  std::sort(lpaths.begin(), lpaths.end());
  if (fpaths.empty()) throw std::runtime_error("no frames in " + dir);
  if (fpaths.size() != lpaths.size())
    throw std::runtime_error("frame/label count mismatch in " + dir);
  Sequence seq;
  for (std::size_t t = 0; t < fpaths.size(); ++t) {
    seq.frames.push_back(read_ppm(fpaths[t].string()));
    seq.labels.push_back(read_pgm(lpaths[t].string()));
  }
  return seq;
}

double miou(const LabelMap& pred, const LabelMap& gt,
            std::size_t num_classes) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("miou dimension mismatch");
  std::vector<std::size_t> inter(num_classes, 0), uni(num_classes, 0);
  for (std::size_t i = 0; i < pred.idx.size(); ++i) {
    const std::uint8_t p = pred.idx[i], g = gt.idx[i];
    if (p == g) {
      ++inter[p];
      ++uni[p];
    } else {
      ++uni[p];
      ++uni[g];
    }
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (uni[c] == 0) continue;
    sum += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++present;
  }
  return present == 0 ? 1.0 : sum / static_cast<double>(present);
}

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("pixel_accuracy dimension mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.idx.size(); ++i)
    if (pred.idx[i] == gt.idx[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pred.idx.size());
}

double class_accuracy(const LabelMap& pred, const LabelMap& gt,
                      std::size_t num_classes) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("class_accuracy dimension mismatch");
  std::vector<std::size_t> correct(num_classes, 0), total(num_classes, 0);
  for (std::size_t i = 0; i < pred.idx.size(); ++i) {
    ++total[gt.idx[i]];
    if (pred.idx[i] == gt.idx[i]) ++correct[gt.idx[i]];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return present == 0 ? 1.0 : sum / static_cast<double>(present);
}

}  // namespace llseg
