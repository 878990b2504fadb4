#include "fcnseg/postproc.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace fcnseg {

StructuringElement StructuringElement::disk(int radius) {
  if (radius < 1) throw std::invalid_argument("structuring element radius must be >= 1");
  return {Shape::disk, radius};
}

StructuringElement StructuringElement::square(int radius) {
  if (radius < 1) throw std::invalid_argument("structuring element radius must be >= 1");
  return {Shape::square, radius};
}

std::vector<std::pair<int, int>> StructuringElement::offsets() const {
  if (radius < 1) throw std::invalid_argument("structuring element radius must be >= 1");
  // disk rasterized with half-pixel rounding: dx^2+dy^2 <= (r+1/2)^2, so the
  // r=1 disk is the full 3x3 block and opening restores rectangles exactly
  const int limit = radius * radius + radius;
  std::vector<std::pair<int, int>> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      if (shape == Shape::disk && dy * dy + dx * dx > limit) continue;
      out.emplace_back(dy, dx);
    }
  return out;
}

SegmentationMask median_filter(const SegmentationMask& mask, int window) {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("median_filter: window must be odd and >= 3");
  const int r = window / 2;
  const int64_t W = mask.width, H = mask.height;
  SegmentationMask out(W, H);
  const int majority = (window * window) / 2 + 1;
#pragma omp parallel for schedule(static)
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      int ones = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int64_t yy = std::clamp<int64_t>(y + dy, 0, H - 1);
          const int64_t xx = std::clamp<int64_t>(x + dx, 0, W - 1);
          ones += mask.at(yy, xx);
        }
      out.set(y, x, ones >= majority ? 1 : 0);
    }
  return out;
}

namespace {

SegmentationMask erode_or_dilate(const SegmentationMask& mask, bool erode,
                                 const StructuringElement& se) {
  const auto offs = se.offsets();
  const int64_t W = mask.width, H = mask.height;
  SegmentationMask out(W, H);
#pragma omp parallel for schedule(static)
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      bool hit = erode;  // erode: all covered pixels set; dilate: any set
      for (const auto& [dy, dx] : offs) {
        const int64_t yy = y + dy, xx = x + dx;
        const bool v = yy >= 0 && yy < H && xx >= 0 && xx < W && mask.at(yy, xx) != 0;
        if (erode) {
          if (!v) { hit = false; break; }
        } else {
          if (v) { hit = true; break; }
        }
      }
      out.set(y, x, hit ? 1 : 0);
    }
  return out;
}

}  // namespace

SegmentationMask morph(const SegmentationMask& mask, MorphOp op, const StructuringElement& se) {
  switch (op) {
    case MorphOp::erode: return erode_or_dilate(mask, true, se);
    case MorphOp::dilate: return erode_or_dilate(mask, false, se);
    case MorphOp::open: return erode_or_dilate(erode_or_dilate(mask, true, se), false, se);
    case MorphOp::close: return erode_or_dilate(erode_or_dilate(mask, false, se), true, se);
  }
  throw std::invalid_argument("morph: unknown operation");
}

namespace {

// flood fill returning pixel count; 8- or 4-connectivity
int64_t flood(const SegmentationMask& mask, std::vector<int32_t>& comp, int32_t id,
              int64_t start, bool eight, uint8_t target) {
  const int64_t W = mask.width, H = mask.height;
  std::queue<int64_t> q;
  q.push(start);
  comp[start] = id;
  int64_t n = 0;
  while (!q.empty()) {
    const int64_t p = q.front();
    q.pop();
    ++n;
    const int64_t y = p / W, x = p % W;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dy == 0 && dx == 0) continue;
        if (!eight && dy != 0 && dx != 0) continue;
        const int64_t yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
        const int64_t pp = yy * W + xx;
        if (comp[pp] == 0 && mask.labels[pp] == target) {
          comp[pp] = id;
          q.push(pp);
        }
      }
  }
  return n;
}

}  // namespace

SegmentationMask keep_largest_component(const SegmentationMask& mask) {
  const int64_t W = mask.width, H = mask.height;
  std::vector<int32_t> comp(static_cast<size_t>(W * H), 0);
  int32_t next = 0;
  int32_t best_id = 0;
  int64_t best_size = 0;
  for (int64_t p = 0; p < W * H; ++p) {
    if (mask.labels[p] == 0 || comp[p] != 0) continue;
    const int64_t size = flood(mask, comp, ++next, p, /*eight=*/true, 1);
    if (size > best_size) {  // strict: earlier first-pixel wins ties
      best_size = size;
      best_id = next;
    }
  }
  SegmentationMask out(W, H);
  if (best_id != 0)
    for (int64_t p = 0; p < W * H; ++p) out.labels[p] = comp[p] == best_id ? 1 : 0;
  return out;
}

int64_t count_components(const SegmentationMask& mask) {
  std::vector<int32_t> comp(mask.labels.size(), 0);
  int32_t next = 0;
  for (int64_t p = 0; p < mask.pixels(); ++p)
    if (mask.labels[p] != 0 && comp[p] == 0) flood(mask, comp, ++next, p, true, 1);
  return next;
}

SegmentationMask fill_holes(const SegmentationMask& mask) {
  const int64_t W = mask.width, H = mask.height;
  std::vector<int32_t> comp(static_cast<size_t>(W * H), 0);
  // mark background reachable from the border with 4-connected floods
  for (int64_t x = 0; x < W; ++x) {
    if (mask.at(0, x) == 0 && comp[x] == 0) flood(mask, comp, 1, x, false, 0);
    const int64_t p = (H - 1) * W + x;
    if (mask.labels[p] == 0 && comp[p] == 0) flood(mask, comp, 1, p, false, 0);
  }
  for (int64_t y = 0; y < H; ++y) {
    const int64_t l = y * W, r = y * W + W - 1;
    if (mask.labels[l] == 0 && comp[l] == 0) flood(mask, comp, 1, l, false, 0);
    if (mask.labels[r] == 0 && comp[r] == 0) flood(mask, comp, 1, r, false, 0);
  }
  SegmentationMask out = mask;
  for (int64_t p = 0; p < W * H; ++p)
    if (mask.labels[p] == 0 && comp[p] == 0) out.labels[p] = 1;
  return out;
}

PostprocConfig default_pipeline() {
  return parse_pipeline("median:3,open:disk:1,keep-largest,fill-holes");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

StructuringElement parse_se(const std::vector<std::string>& parts, const std::string& whole) {
  if (parts.size() != 3)
    throw std::invalid_argument("post-processing step '" + whole + "': expected op:shape:radius");
  const int radius = std::stoi(parts[2]);
  if (parts[1] == "disk") return StructuringElement::disk(radius);
  if (parts[1] == "square") return StructuringElement::square(radius);
  throw std::invalid_argument("post-processing step '" + whole + "': unknown element shape '" +
                              parts[1] + "'");
}

}  // namespace

PostprocConfig parse_pipeline(const std::string& description) {
  PostprocConfig config;
  for (const auto& step : split(description, ',')) {
    if (step.empty()) continue;
    const auto parts = split(step, ':');
    PostprocStep s{};
    if (parts[0] == "median") {
      if (parts.size() != 2)
        throw std::invalid_argument("post-processing step '" + step + "': expected median:window");
      s.kind = PostprocStep::Kind::median;
      s.window = std::stoi(parts[1]);
    } else if (parts[0] == "erode") {
      s.kind = PostprocStep::Kind::erode;
      s.se = parse_se(parts, step);
    } else if (parts[0] == "dilate") {
      s.kind = PostprocStep::Kind::dilate;
      s.se = parse_se(parts, step);
    } else if (parts[0] == "open") {
      s.kind = PostprocStep::Kind::open;
      s.se = parse_se(parts, step);
    } else if (parts[0] == "close") {
      s.kind = PostprocStep::Kind::close;
      s.se = parse_se(parts, step);
    } else if (parts[0] == "keep-largest") {
      s.kind = PostprocStep::Kind::keep_largest;
    } else if (parts[0] == "fill-holes") {
      s.kind = PostprocStep::Kind::fill_holes;
    } else {
      throw std::invalid_argument("unknown post-processing op '" + parts[0] + "'");
    }
    config.push_back(s);
  }
  return config;
}

std::string pipeline_string(const PostprocConfig& config) {
  std::ostringstream os;
  for (size_t i = 0; i < config.size(); ++i) {
    if (i) os << ",";
    const auto& s = config[i];
    const char* shape = s.se.shape == StructuringElement::Shape::disk ? "disk" : "square";
    switch (s.kind) {
      case PostprocStep::Kind::median: os << "median:" << s.window; break;
      case PostprocStep::Kind::erode: os << "erode:" << shape << ":" << s.se.radius; break;
      case PostprocStep::Kind::dilate: os << "dilate:" << shape << ":" << s.se.radius; break;
      case PostprocStep::Kind::open: os << "open:" << shape << ":" << s.se.radius; break;
      case PostprocStep::Kind::close: os << "close:" << shape << ":" << s.se.radius; break;
      case PostprocStep::Kind::keep_largest: os << "keep-largest"; break;
      case PostprocStep::Kind::fill_holes: os << "fill-holes"; break;
    }
  }
  return os.str();
}

SegmentationMask postprocess(const SegmentationMask& mask, const PostprocConfig& config) {
  SegmentationMask m = mask;
  for (const auto& step : config) {
    switch (step.kind) {
      case PostprocStep::Kind::median: m = median_filter(m, step.window); break;
      case PostprocStep::Kind::erode: m = morph(m, MorphOp::erode, step.se); break;
      case PostprocStep::Kind::dilate: m = morph(m, MorphOp::dilate, step.se); break;
      case PostprocStep::Kind::open: m = morph(m, MorphOp::open, step.se); break;
      case PostprocStep::Kind::close: m = morph(m, MorphOp::close, step.se); break;
      case PostprocStep::Kind::keep_largest: m = keep_largest_component(m); break;
      case PostprocStep::Kind::fill_holes: m = fill_holes(m); break;
    }
  }
  return m;
}

}  // namespace fcnseg
