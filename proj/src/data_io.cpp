#include "rgbdsal/data_io.hpp"

#include "rgbdsal/random.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace rgbdsal {

DepthMode parse_depth_mode(const std::string& s) {
  if (s == "clean") return DepthMode::clean;
  if (s == "noisy") return DepthMode::noisy;
  if (s == "misleading") return DepthMode::misleading;
  if (s == "flat") return DepthMode::flat;
  throw_usage("unknown depth mode '" + s + "' (expected clean, noisy, misleading or flat)");
}

std::string to_string(DepthMode mode) {
  switch (mode) {
    case DepthMode::clean: return "clean";
    case DepthMode::noisy: return "noisy";
    case DepthMode::misleading: return "misleading";
    case DepthMode::flat: return "flat";
  }
  return "clean";
}

void SynthSpec::validate() const {
  if (n_samples < 0) throw_usage("synth: n_samples must be >= 0");
  if (size < 16) throw_usage("synth: size must be >= 16");
  if (shapes.empty()) throw_usage("synth: at least one shape family is needed");
  if (mix.empty()) throw_usage("synth: depth-mode mix is empty");
  double total = 0.0;
  for (const auto& [mode, share] : mix) {
    if (!(share >= 0.0)) throw_usage("synth: depth-mode shares must be >= 0");
    total += share;
  }
  if (!(total > 0.0)) throw_usage("synth: depth-mode shares sum to zero");
  if (!(clutter >= 0.0 && clutter <= 1.0)) throw_usage("synth: clutter must lie in [0, 1]");
  if (distractors < 0 || distractors > 4) throw_usage("synth: distractors must lie in [0, 4]");
  if (!(contrast_min >= 0.0 && contrast_min <= contrast_max && contrast_max <= 1.0)) {
    throw_usage("synth: need 0 <= contrast_min <= contrast_max <= 1");
  }
  if (!(object_scale_min > 0.0 && object_scale_min <= object_scale_max && object_scale_max <= 0.4)) {
    throw_usage("synth: need 0 < object_scale_min <= object_scale_max <= 0.4");
  }
}

std::map<DepthMode, int> mode_counts(const std::map<DepthMode, double>& mix, int n) {
  double total = 0.0;
  for (const auto& [m, share] : mix) total += share;
  std::map<DepthMode, int> counts;
  std::vector<std::pair<double, DepthMode>> rema;
  int assigned = 0;
  for (const auto& [m, share] : mix) {
    const double exact = n * share / total;
    counts[m] = static_cast<int>(std::floor(exact));
    assigned += counts[m];
    rema.emplace_back(exact - std::floor(exact), m);
  }
  // largest remainder; ties go to the earlier mode
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < n; ++i, ++assigned) counts[rema[static_cast<std::size_t>(i)].second]++;
  return counts;
}

namespace {

struct Shape {
  ShapeFamily family = ShapeFamily::ellipse;
  double cx = 0.5, cy = 0.5;
  double a = 0.1, b = 0.1, theta = 0.0;
  std::vector<double> angles, radii;  // polygon vertices, sorted by angle

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = std::cos(theta) * dx + std::sin(theta) * dy;
    const double v = -std::sin(theta) * dx + std::cos(theta) * dy;
    switch (family) {
      case ShapeFamily::rect: return std::abs(u) <= a && std::abs(v) <= b;
      case ShapeFamily::ellipse: return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
      case ShapeFamily::polygon: {
        bool in = false;
        const std::size_t n = angles.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
          const double xi = radii[i] * std::cos(angles[i]), yi = radii[i] * std::sin(angles[i]);
          const double xj = radii[j] * std::cos(angles[j]), yj = radii[j] * std::sin(angles[j]);
          if ((yi > v) != (yj > v) && u < (xj - xi) * (v - yi) / (yj - yi) + xi) in = !in;
        }
        return in;
      }
    }
    return false;
  }
};

Shape random_shape(Rng& rng, ShapeFamily family, double scale) {
  Shape s;
  s.family = family;
  s.cx = rng.uniform(0.25, 0.75);
  s.cy = rng.uniform(0.25, 0.75);
  s.a = scale * rng.uniform(0.75, 1.25);
  s.b = scale * rng.uniform(0.75, 1.25);
  s.theta = rng.uniform(0.0, std::numbers::pi);
  if (family == ShapeFamily::polygon) {
    const int n = 5 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      s.angles.push_back(2.0 * std::numbers::pi * (i + rng.uniform(0.1, 0.9)) / n);
      s.radii.push_back(scale * rng.uniform(0.8, 1.3));
    }
  }
  return s;
}

Plane<float> rasterize(const Shape& s, int size) {
  Plane<float> m(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) m(r, c) = s.contains((c + 0.5) / size, (r + 0.5) / size) ? 1.0f : 0.0f;
  }
  return m;
}

/// Unit-range ramp along a random direction.
Plane<float> ramp(Rng& rng, int size) {
  const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ux = std::cos(ang), uy = std::sin(ang);
  Plane<float> p(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double x = (c + 0.5) / size - 0.5, y = (r + 0.5) / size - 0.5;
      p(r, c) = static_cast<float>(0.5 + (ux * x + uy * y) / std::numbers::sqrt2);
    }
  }
  return p;
}

Plane<float> gaussian_blur(const Plane<float>& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
  auto pass = [&](const Plane<float>& src, bool horizontal) {
    Plane<float> dst(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int rr = horizontal ? r : std::clamp(r + i, 0, h - 1);
          const int cc = horizontal ? std::clamp(c + i, 0, w - 1) : c;
          acc += k[static_cast<std::size_t>(i + radius)] * src(rr, cc);
        }
        dst(r, c) = static_cast<float>(acc);
      }
    }
    return dst;
  };
  return pass(pass(in, true), false);
}

Plane<float> clamp01(const Plane<float>& p) { return p.cwiseMax(0.0f).cwiseMin(1.0f); }

RgbdSample synthesize_one(const SynthSpec& spec, int index, DepthMode mode) {
  Rng rng(spec.seed, static_cast<std::uint64_t>(index) + 1);
  const int n = spec.size;

  const auto family = spec.shapes[rng.below(spec.shapes.size())];
  const Shape object = random_shape(rng, family, rng.uniform(spec.object_scale_min, spec.object_scale_max));
  const Plane<float> gt = rasterize(object, n);

  // look-alikes that do not touch the object
  std::vector<Plane<float>> distractor_masks;
  const Plane<float> grown = gaussian_blur(gt, 1.5);
  for (int d = 0; d < spec.distractors; ++d) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      const Shape cand = random_shape(rng, spec.shapes[rng.below(spec.shapes.size())], 0.85 * rng.uniform(spec.object_scale_min, spec.object_scale_max));
      Plane<float> m = rasterize(cand, n);
      bool clash = ((m > 0.0f) && (grown > 0.01f)).any();
      for (const auto& other : distractor_masks) clash = clash || ((m > 0.0f) && (other > 0.0f)).any();
      if (!clash && m.sum() > 0.0f) {
        distractor_masks.push_back(std::move(m));
        break;
      }
    }
  }

  // colour
  std::array<double, 3> base{}, grad{}, dir{};
  for (auto& v : base) v = rng.uniform(0.25, 0.75);
  for (auto& v : grad) v = rng.uniform(-0.15, 0.15);
  double norm = 0.0;
  for (auto& v : dir) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  const double contrast = rng.uniform(spec.contrast_min, spec.contrast_max);
  const Plane<float> shade = ramp(rng, n);
  RgbImage rgb;
  for (int ch = 0; ch < 3; ++ch) rgb.channels[ch] = (base[ch] + grad[ch] * (shade - 0.5f).cast<double>()).cast<float>();

  const int blobs = static_cast<int>(std::lround(spec.clutter * 6.0));
  for (int k = 0; k < blobs; ++k) {
    Shape blob = random_shape(rng, ShapeFamily::ellipse, rng.uniform(0.04, 0.1));
    blob.cx = rng.uniform(0.0, 1.0);
    blob.cy = rng.uniform(0.0, 1.0);
    const Plane<float> m = rasterize(blob, n);
    for (int ch = 0; ch < 3; ++ch) {
      const float col = static_cast<float>(base[ch] + rng.uniform(-0.25, 0.25));
      rgb.channels[ch] = m * col + (1.0f - m) * rgb.channels[ch];
    }
  }
  std::array<float, 3> obj_col{};
  for (int ch = 0; ch < 3; ++ch) obj_col[ch] = static_cast<float>(base[ch] + contrast * dir[ch] / norm);
  for (const auto& m : distractor_masks) {
    for (int ch = 0; ch < 3; ++ch) {
      const float col = obj_col[ch] + static_cast<float>(0.03 * rng.normal());
      rgb.channels[ch] = m * col + (1.0f - m) * rgb.channels[ch];
    }
  }
  for (int ch = 0; ch < 3; ++ch) rgb.channels[ch] = gt * obj_col[ch] + (1.0f - gt) * rgb.channels[ch];
  for (auto& c : rgb.channels) {
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] += static_cast<float>(0.03 * rng.normal());
    c = clamp01(c);
  }

  // depth: larger is nearer
  Plane<float> depth;
  const Plane<float> bg = 0.1f + 0.3f * ramp(rng, n);
  const Plane<float> obj = 0.7f + 0.1f * ramp(rng, n);
  switch (mode) {
    case DepthMode::clean:
    case DepthMode::noisy:
      depth = gt * obj + (1.0f - gt) * bg;
      if (mode == DepthMode::noisy) {
        depth = gaussian_blur(depth, 1.0);
        for (Eigen::Index i = 0; i < depth.size(); ++i) {
          depth.data()[i] += static_cast<float>(0.05 * rng.normal());
          if (rng.uniform() < 0.08) depth.data()[i] = static_cast<float>(rng.uniform());
        }
        depth = clamp01(depth);
      }
      break;
    case DepthMode::misleading: {
      // smooth bumps placed independently of the scene content
      depth = bg;
      const int bumps = 3 + static_cast<int>(rng.below(3));
      for (int k = 0; k < bumps; ++k) {
        const double bx = rng.uniform(), by = rng.uniform(), sg = rng.uniform(0.08, 0.22), amp = rng.uniform(0.2, 0.6);
        for (int r = 0; r < n; ++r) {
          for (int c = 0; c < n; ++c) {
            const double x = (c + 0.5) / n - bx, y = (r + 0.5) / n - by;
            depth(r, c) += static_cast<float>(amp * std::exp(-0.5 * (x * x + y * y) / (sg * sg)));
          }
        }
      }
      break;
    }
    case DepthMode::flat:
      depth = Plane<float>::Constant(n, n, 0.5f);
      break;
  }
  ScalarMap depth_map = normalize_min_max(depth);

  if (mode == DepthMode::clean) {
    const Plane<float>& d = depth_map.values();
    const float lo = (gt > 0.5f).select(d, 2.0f).minCoeff();
    const float hi = (gt > 0.5f).select(-1.0f, d).maxCoeff();
    if (!(lo > hi)) throw_invariant("synth: clean depth does not separate object from background");
    const float mid = 0.5f * (lo + hi);
    if (((d > mid).cast<float>() != gt).any()) throw_invariant("synth: clean depth threshold misses GT");
  }
  if (mode == DepthMode::flat && depth_map.values().maxCoeff() != depth_map.values().minCoeff()) {
    throw_invariant("synth: flat depth is not constant");
  }

  RgbdSample s;
  char id[16];
  std::snprintf(id, sizeof id, "s%04d", index);
  s.id = id;
  s.rgb = std::move(rgb);
  s.depth = std::move(depth_map);
  s.gt = BinaryMask(ScalarMap(gt));
  s.tag = to_string(mode);
  s.validate();
  return s;
}

}  // namespace

std::vector<RgbdSample> synthesize_dataset(const SynthSpec& spec) {
  spec.validate();
  std::vector<DepthMode> modes;
  for (const auto& [mode, count] : mode_counts(spec.mix, spec.n_samples)) modes.insert(modes.end(), count, mode);
  Rng rng(spec.seed, 0);
  rng.shuffle(modes);
  std::vector<RgbdSample> out;
  out.reserve(modes.size());
  for (int i = 0; i < spec.n_samples; ++i) out.push_back(synthesize_one(spec, i, modes[static_cast<std::size_t>(i)]));
  return out;
}

// ---------------------------------------------------------------------------
// image files

namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

cv::Mat read_image(const fs::path& path) {
  if (!fs::exists(path)) throw_data("missing file: " + path.string());
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw_data("cannot decode image: " + path.string());
  return m;
}

double type_max(const cv::Mat& m) {
  switch (m.depth()) {
    case CV_8U: return 255.0;
    case CV_16U: return 65535.0;
    case CV_32F:
    case CV_64F: return 1.0;
    default: throw_data("unsupported pixel type");
  }
}

/// Channel c of `m` scaled to [0,1]. Colour images are stored BGR(A).
Plane<float> channel(const cv::Mat& m, int c, double scale) {
  cv::Mat f;
  cv::Mat ch;
  cv::extractChannel(m, ch, c);
  ch.convertTo(f, CV_32F);
  // divide rather than multiply by 1/scale so 8-bit level k reads back as k/255.0f exactly
  const float div = static_cast<float>(scale);
  Plane<float> p(f.rows, f.cols);
  for (int r = 0; r < f.rows; ++r) {
    for (int col = 0; col < f.cols; ++col) p(r, col) = f.at<float>(r, col) / div;
  }
  return clamp01(p);
}

Plane<float> gray(const cv::Mat& m, const fs::path& path) {
  const double s = type_max(m);
  if (m.channels() == 1) return channel(m, 0, s);
  if (m.channels() >= 3) {
    // luma of B, G, R
    return clamp01(0.114f * channel(m, 0, s) + 0.587f * channel(m, 1, s) + 0.299f * channel(m, 2, s));
  }
  throw_data("unsupported channel count in " + path.string());
}

void write_image(const cv::Mat& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw_data("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw_data("cannot write " + path.string());
}

cv::Mat to_mat8(const Plane<float>& p) {
  cv::Mat m(static_cast<int>(p.rows()), static_cast<int>(p.cols()), CV_8UC1);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) m.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(p(r, c) * 255.0f));
  }
  return m;
}

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& p : list_images(dir)) {
    const std::string stem = p.stem().string();
    if (!out.emplace(stem, p).second) throw_data("two images share the stem '" + stem + "' in " + dir.string());
  }
  return out;
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw_data("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool dir_empty(const fs::path& dir) { return !fs::exists(dir) || fs::is_empty(dir); }

void save_map(const ScalarMap& m, const fs::path& path) { write_image(to_mat8(m.values()), path); }

ScalarMap load_map(const fs::path& path) { return ScalarMap(gray(read_image(path), path)); }

BinaryMask load_mask(const fs::path& path) {
  return BinaryMask::from_threshold(load_map(path).values(), 127.5f / 255.0f);
}

std::map<std::string, ScalarMap> load_map_dir(const fs::path& dir, const std::string& suffix) {
  std::map<std::string, ScalarMap> out;
  for (const auto& p : list_images(dir)) {
    std::string stem = p.stem().string();
    if (!suffix.empty() && stem.size() > suffix.size() && stem.ends_with(suffix)) {
      stem.resize(stem.size() - suffix.size());
    }
    if (!out.emplace(stem, load_map(p)).second) throw_data("duplicate id '" + stem + "' in " + dir.string());
  }
  return out;
}

std::map<std::string, BinaryMask> load_mask_dir(const fs::path& dir) {
  std::map<std::string, BinaryMask> out;
  for (const auto& p : list_images(dir)) {
    if (!out.emplace(p.stem().string(), load_mask(p)).second) {
      throw_data("duplicate id '" + p.stem().string() + "' in " + dir.string());
    }
  }
  return out;
}

std::vector<RgbdSample> load_dataset(const fs::path& root, const std::string& split, const LoadOptions& opts) {
  const fs::path base = split.empty() ? root : root / split;
  if (!fs::is_directory(base)) throw_data("dataset directory not found: " + base.string());
  for (const char* sub : {"RGB", "depth"}) {
    if (!fs::is_directory(base / sub)) throw_data("dataset is missing the " + std::string(sub) + "/ folder: " + base.string());
  }
  const bool has_gt = fs::is_directory(base / "GT");
  if (!has_gt && !opts.allow_missing_gt) throw_data("dataset is missing the GT/ folder: " + base.string());
  if (opts.working_resolution != 0 && opts.working_resolution < 1) throw_usage("working resolution must be positive");

  const auto rgb_files = images_by_stem(base / "RGB");
  const auto depth_files = images_by_stem(base / "depth");
  std::map<std::string, fs::path> gt_files;
  if (has_gt) gt_files = images_by_stem(base / "GT");
  for (const auto& [stem, p] : depth_files) {
    if (!rgb_files.count(stem)) throw_data("depth/" + stem + " has no RGB counterpart");
  }
  for (const auto& [stem, p] : gt_files) {
    if (!rgb_files.count(stem)) throw_data("GT/" + stem + " has no RGB counterpart");
  }

  std::map<std::string, std::string> tags;
  if (fs::exists(base / "meta.csv")) {
    std::ifstream in(base / "meta.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto comma = line.find(',');
      if (comma != std::string::npos) tags[line.substr(0, comma)] = line.substr(comma + 1);
    }
  }

  std::vector<RgbdSample> out;
  for (const auto& [stem, rgb_path] : rgb_files) {
    auto dit = depth_files.find(stem);
    if (dit == depth_files.end()) throw_data("RGB/" + stem + " has no depth counterpart");
    RgbdSample s;
    s.id = stem;
    const cv::Mat rgb = read_image(rgb_path);
    const double scale = type_max(rgb);
    if (rgb.channels() == 1) {
      for (auto& c : s.rgb.channels) c = channel(rgb, 0, scale);
    } else if (rgb.channels() >= 3) {
      for (int c = 0; c < 3; ++c) s.rgb.channels[c] = channel(rgb, 2 - c, scale);
    } else {
      throw_data("unsupported channel count in " + rgb_path.string());
    }

    Plane<float> d = gray(read_image(dit->second), dit->second);
    ScalarMap depth = opts.depth_normalization == DepthNormalization::min_max ? normalize_min_max(d) : ScalarMap(d);
    if (opts.invert_depth) depth = complement(depth);

    std::optional<BinaryMask> gt;
    if (has_gt) {
      auto git = gt_files.find(stem);
      if (git == gt_files.end()) throw_data("RGB/" + stem + " has no GT counterpart");
      gt = load_mask(git->second);
    }

    const int h = opts.working_resolution ? opts.working_resolution : s.rgb.height();
    const int w = opts.working_resolution ? opts.working_resolution : s.rgb.width();
    s.rgb = resize_rgb(s.rgb, h, w);
    s.depth = resize_map(depth, h, w);
    if (gt) s.gt = BinaryMask::from_threshold(resize_map(*gt, h, w).values(), 0.5f);
    if (auto t = tags.find(stem); t != tags.end()) s.tag = t->second;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::vector<RgbdSample>& samples, const fs::path& root, bool force) {
  if (!dir_empty(root) && !force) throw_usage("output directory is not empty (use --force): " + root.string());
  fs::create_directories(root / "RGB");
  fs::create_directories(root / "depth");
  fs::create_directories(root / "GT");
  std::ofstream meta(root / "meta.csv", std::ios::binary);
  meta << "id,tag\n";
  for (const auto& s : samples) {
    s.validate();
    const int h = s.height(), w = s.width();
    cv::Mat rgb(h, w, CV_8UC3);
    cv::Mat depth(h, w, CV_16UC1);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        auto& px = rgb.at<cv::Vec3b>(r, c);
        for (int ch = 0; ch < 3; ++ch) px[2 - ch] = static_cast<std::uint8_t>(std::lround(s.rgb.channels[ch](r, c) * 255.0f));
        depth.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(std::lround(s.depth(r, c) * 65535.0f));
      }
    }
    write_image(rgb, root / "RGB" / (s.id + ".png"));
    write_image(depth, root / "depth" / (s.id + ".png"));
    if (s.gt) save_map(*s.gt, root / "GT" / (s.id + ".png"));
    meta << s.id << ',' << s.tag << '\n';
  }
  if (!meta) throw_data("cannot write " + (root / "meta.csv").string());
}

}  // namespace rgbdsal
