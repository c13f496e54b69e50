#include "svos/synthetic.hpp"

#include <algorithm>
#include <sstream>

namespace svos {
namespace data {

namespace {

// Triangle-wave fold of p into [lo, hi]; degenerate ranges stay put.
double fold(double p, double lo, double hi) {
  if (hi <= lo) return lo;
  double period = 2.0 * (hi - lo);
  double q = std::fmod(p - lo, period);
  if (q < 0) q += period;
  return q <= (hi - lo) ? lo + q : hi - (q - (hi - lo));
}

struct Vec2 {
  double x, y;
};

std::vector<Vec2> polygon_vertices(int sides, double rx, double ry) {
  // First vertex points +v; the u<0 half mirrors the u>0 half exactly so the
  // shape is bit-symmetric under u -> -u.
  std::vector<Vec2> vs(static_cast<size_t>(sides));
  for (int j = 0; j <= sides / 2; ++j) {
    double a = 2.0 * 3.14159265358979323846 * j / sides;
    double u = std::sin(a) * rx;
    double v = std::cos(a) * ry;
    vs[static_cast<size_t>(j)] = {u, v};
    if (j > 0 && j < sides - j) vs[static_cast<size_t>(sides - j)] = {-u, v};
  }
  return vs;
}

bool inside_polygon(const std::vector<Vec2>& vs, double u, double v) {
  // convex, counter-clockwise-or-clockwise consistent sign test
  int n = static_cast<int>(vs.size());
  bool pos = false, neg = false;
  for (int i = 0; i < n; ++i) {
    const Vec2& a = vs[static_cast<size_t>(i)];
    const Vec2& b = vs[static_cast<size_t>((i + 1) % n)];
    double s = (b.x - a.x) * (v - a.y) - (b.y - a.y) * (u - a.x);
    if (s > 0) pos = true;
    if (s < 0) neg = true;
    if (pos && neg) return false;
  }
  return true;
}

struct ResolvedObject {
  ObjectState st;
  std::vector<Vec2> poly;

  bool inside(double dx, double dy, double theta) const {
    double c = std::cos(theta), s = std::sin(theta);
    double u = c * dx + s * dy;
    double v = -s * dx + c * dy;
    switch (st.shape) {
      case ShapeKind::Ellipse: {
        double a = u / st.rx, b = v / st.ry;
        return a * a + b * b <= 1.0;
      }
      case ShapeKind::Rectangle:
        return std::abs(u) <= st.rx && std::abs(v) <= st.ry;
      case ShapeKind::Polygon:
        return inside_polygon(poly, u, v);
    }
    return false;
  }
};

// Smooth seeded texture: a small bank of random sinusoids per channel.
struct Texture {
  struct Wave {
    double kx, ky, phase, amp;
  };
  double base[3];
  std::vector<Wave> waves[3];

  static Texture make(uint64_t seed, double base_lo, double base_hi, double detail) {
    Rng rng(seed);
    Texture t;
    for (int c = 0; c < 3; ++c) {
      t.base[c] = rng.uniform(base_lo, base_hi);
      int n = 3;
      for (int i = 0; i < n; ++i) {
        double freq = rng.uniform(0.25, 1.1) * (i + 1);
        double dir = rng.uniform(0, 6.283185307179586);
        t.waves[c].push_back({freq * std::cos(dir), freq * std::sin(dir),
                              rng.uniform(0, 6.283185307179586), detail / (i + 1)});
      }
    }
    return t;
  }

  void sample(double u, double v, double out[3]) const {
    for (int c = 0; c < 3; ++c) {
      double s = base[c];
      for (const auto& w : waves[c]) s += w.amp * std::sin(w.kx * u + w.ky * v + w.phase);
      out[c] = std::clamp(s, 0.0, 1.0);
    }
  }
};

}  // namespace

void SceneSpec::validate() const {
  if (num_objects < 1) throw validation_error("scene: need at least one object");
  if (frames < 6) throw validation_error("scene: need at least 6 frames");
  if (height < 16 || width < 16) throw validation_error("scene: canvas too small");
  if (height % 2 || width % 2) throw validation_error("scene: canvas sides must be even");
}

std::string SceneSpec::to_text() const {
  std::ostringstream s;
  s << "height=" << height << "\nwidth=" << width << "\nnum_objects=" << num_objects
    << "\nframes=" << frames << "\nbackground_seed=" << background_seed
    << "\nallow_occlusion=" << (allow_occlusion ? 1 : 0) << "\nmax_speed=" << max_speed << "\n";
  return s.str();
}

SceneSpec SceneSpec::from_text(const std::string& text) {
  SceneSpec spec;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw validation_error("scene spec: bad line '" + line + "'");
    std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "height") spec.height = std::stoi(v);
    else if (k == "width") spec.width = std::stoi(v);
    else if (k == "num_objects") spec.num_objects = std::stoi(v);
    else if (k == "frames") spec.frames = std::stoi(v);
    else if (k == "background_seed") spec.background_seed = std::stoull(v);
    else if (k == "allow_occlusion") spec.allow_occlusion = std::stoi(v) != 0;
    else if (k == "max_speed") spec.max_speed = std::stod(v);
    else throw validation_error("scene spec: unknown key '" + k + "'");
  }
  spec.validate();
  return spec;
}

double ObjectState::cx(int t, int width) const {
  double m = std::max(rx, ry);
  return fold(x0 + vx * t, m, width - m);
}

double ObjectState::cy(int t, int height) const {
  double m = std::max(rx, ry);
  return fold(y0 + vy * t, m, height - m);
}

SceneState resolve_scene(const SceneSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SceneState state;
  state.spec = spec;

  double max_extent = 0;
  for (int k = 0; k < spec.num_objects; ++k) {
    ObjectSpec os = k < static_cast<int>(spec.objects.size()) ? spec.objects[static_cast<size_t>(k)]
                                                              : ObjectSpec{};
    ObjectState st;
    Rng orng = rng.fork(static_cast<uint64_t>(k) + 101);
    st.shape = os.shape;
    if (k >= static_cast<int>(spec.objects.size()))
      st.shape = static_cast<ShapeKind>(orng.uniform_int(0, 2));
    st.polygon_sides = os.polygon_sides;
    st.texture_seed = os.texture_seed ? os.texture_seed : seed * 1000003u + static_cast<uint64_t>(k);
    double lim = 0.22 * std::min(spec.height, spec.width);
    st.rx = std::isnan(os.rx) ? orng.uniform(0.55 * lim, lim) : os.rx;
    st.ry = std::isnan(os.ry) ? orng.uniform(0.55 * lim, lim) : os.ry;
    st.angle0 = os.angle0;
    st.omega = os.omega;
    if (k >= static_cast<int>(spec.objects.size())) {
      st.angle0 = orng.uniform(0, 6.283185307179586);
      st.omega = orng.uniform(-0.05, 0.05);
    }
    double m = std::max(st.rx, st.ry);
    if (2 * m + 2 >= std::min(spec.height, spec.width))
      throw validation_error("scene: object " + std::to_string(k) + " cannot fit the canvas");
    max_extent = std::max(max_extent, m);

    double speed = orng.uniform(0.45, 1.0) * spec.max_speed;
    double dir = orng.uniform(0, 6.283185307179586);
    st.vx = std::isnan(os.vx) ? speed * std::cos(dir) : os.vx;
    st.vy = std::isnan(os.vy) ? speed * std::sin(dir) : os.vy;

    // placement with a visibility margin at frame 0
    if (std::isnan(os.x0) || std::isnan(os.y0)) {
      bool placed = false;
      for (int attempt = 0; attempt < 300 && !placed; ++attempt) {
        st.x0 = orng.uniform(m, spec.width - m);
        st.y0 = orng.uniform(m, spec.height - m);
        placed = true;
        for (const auto& prev : state.objects) {
          double d = std::hypot(prev.x0 - st.x0, prev.y0 - st.y0);
          double need = spec.allow_occlusion ? 0.75 * (std::min(prev.rx, prev.ry) + std::min(st.rx, st.ry))
                                             : 1.1 * (std::max(prev.rx, prev.ry) + std::max(st.rx, st.ry));
          if (d < need) placed = false;
        }
      }
      if (!placed)
        throw validation_error("scene: objects cannot fit the canvas without full overlap");
    } else {
      st.x0 = os.x0;
      st.y0 = os.y0;
    }
    state.objects.push_back(st);
  }
  return state;
}

LabelMap rasterize_object_solo(const SceneState& state, int t, int k) {
  const SceneSpec& spec = state.spec;
  const ObjectState& st = state.objects.at(static_cast<size_t>(k));
  ResolvedObject obj{st, st.shape == ShapeKind::Polygon
                             ? polygon_vertices(st.polygon_sides, st.rx, st.ry)
                             : std::vector<Vec2>{}};
  LabelMap out = make_labels(spec.height, spec.width);
  double cx = st.cx(t, spec.width), cy = st.cy(t, spec.height), th = st.angle(t);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (obj.inside(x + 0.5 - cx, y + 0.5 - cy, th)) out.at(y, x) = static_cast<uint8_t>(k + 1);
  return out;
}

VideoSequence generate_from_state(const SceneState& state, const std::string& id) {
  const SceneSpec& spec = state.spec;
  Texture bg = Texture::make(spec.background_seed + 7, 0.12, 0.45, 0.10);
  std::vector<ResolvedObject> objs;
  std::vector<Texture> textures;
  for (const auto& st : state.objects) {
    objs.push_back({st, st.shape == ShapeKind::Polygon
                            ? polygon_vertices(st.polygon_sides, st.rx, st.ry)
                            : std::vector<Vec2>{}});
    textures.push_back(Texture::make(st.texture_seed, 0.5, 0.95, 0.22));
  }

  VideoSequence video;
  video.id = id;
  std::vector<LabelMap> gt;
  for (int t = 0; t < spec.frames; ++t) {
    Image img = make_image(spec.height, spec.width);
    LabelMap labels = make_labels(spec.height, spec.width);
    std::vector<double> cx(objs.size()), cy(objs.size()), th(objs.size());
    for (size_t k = 0; k < objs.size(); ++k) {
      cx[k] = objs[k].st.cx(t, spec.width);
      cy[k] = objs[k].st.cy(t, spec.height);
      th[k] = objs[k].st.angle(t);
    }
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        double px = x + 0.5, py = y + 0.5;
        double col[3];
        int label = 0;
        // painter's order: later objects draw on top
        for (int k = static_cast<int>(objs.size()) - 1; k >= 0; --k) {
          double dx = px - cx[static_cast<size_t>(k)], dy = py - cy[static_cast<size_t>(k)];
          if (objs[static_cast<size_t>(k)].inside(dx, dy, th[static_cast<size_t>(k)])) {
            double c2 = std::cos(th[static_cast<size_t>(k)]), s2 = std::sin(th[static_cast<size_t>(k)]);
            double u = c2 * dx + s2 * dy, v = -s2 * dx + c2 * dy;
            textures[static_cast<size_t>(k)].sample(u, v, col);
            label = k + 1;
            break;
          }
        }
        if (!label) bg.sample(px, py, col);
        for (int c = 0; c < 3; ++c) {
          // quantize so PNG round trips are exact
          double q = std::lround(std::clamp(col[c], 0.0, 1.0) * 255.0) / 255.0;
          img.at(c, y, x) = static_cast<float>(q);
        }
        labels.at(y, x) = static_cast<uint8_t>(label);
      }
    }
    video.frames.push_back(std::move(img));
    gt.push_back(std::move(labels));
  }

  // every object must show up in frame 0
  for (size_t k = 0; k < objs.size(); ++k) {
    bool seen = false;
    for (uint8_t v : gt[0].v)
      if (v == k + 1) seen = true;
    if (!seen)
      throw validation_error("scene: object " + std::to_string(k) + " fully hidden in frame 0");
  }
  video.set_gt(std::move(gt));
  return video;
}

VideoSequence generate_synthetic_video(const SceneSpec& spec, uint64_t seed,
                                       const std::string& id) {
  return generate_from_state(resolve_scene(spec, seed), id);
}

}  // namespace data
}  // namespace svos
