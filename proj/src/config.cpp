#include "suture/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "suture/error.hpp"
#include "suture/seed.hpp"

namespace suture {

namespace {

std::string where(const std::string& source, const YAML::Mark& mark) {
  if (mark.is_null()) return source;
  return source + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
}

/// Walks one YAML mapping, remembering the keys it consumed so that leftovers can be
/// reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      fail(node_, "'" + display() + "' must be a mapping");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!present()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    read(v, full(key), out);
  }

  Section child(const char* key) {
    seen_.insert(key);
    YAML::Node v = present() ? node_[key] : YAML::Node();
    return Section(v, full(key), source_);
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, "unknown key '" + full(key.c_str()) + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    throw ValidationError(where(source_, at.Mark()) + ": " + message);
  }

 private:
  bool present() const { return node_ && node_.IsMap(); }
  std::string display() const { return path_.empty() ? "<root>" : path_; }
  std::string full(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  T scalar(const YAML::Node& v, const std::string& name, const char* type) const {
    if (!v.IsScalar()) fail(v, "'" + name + "' must be a " + type);
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, "'" + name + "' must be a " + type + ", got '" + v.Scalar() + "'");
    }
  }

  void read(const YAML::Node& v, const std::string& name, double& out) const {
    out = scalar<double>(v, name, "number");
  }
  void read(const YAML::Node& v, const std::string& name, int& out) const {
    out = scalar<int>(v, name, "integer");
  }
  void read(const YAML::Node& v, const std::string& name, std::int64_t& out) const {
    out = scalar<std::int64_t>(v, name, "integer");
  }
  void read(const YAML::Node& v, const std::string& name, std::uint64_t& out) const {
    const std::string text = v.IsScalar() ? v.Scalar() : "";
    if (!text.empty() && text[0] == '-') fail(v, "'" + name + "' must be a non-negative integer");
    out = scalar<std::uint64_t>(v, name, "non-negative integer");
  }
  void read(const YAML::Node& v, const std::string& name, std::string& out) const {
    out = scalar<std::string>(v, name, "string");
  }
  void read(const YAML::Node& v, const std::string& name, std::filesystem::path& out) const {
    out = scalar<std::string>(v, name, "path string");
  }
  void read(const YAML::Node& v, const std::string& name,
            std::optional<std::filesystem::path>& out) const {
    if (v.IsNull()) {
      out.reset();
      return;
    }
    out = scalar<std::string>(v, name, "path string");
  }
  void read(const YAML::Node& v, const std::string& name, Interval& out) const {
    if (!v.IsSequence() || v.size() != 2) fail(v, "'" + name + "' must be a [lo, hi] pair");
    read(v[0], name, out.lo);
    read(v[1], name, out.hi);
    if (out.lo > out.hi) fail(v, "'" + name + "' has lo > hi");
  }
  void read(const YAML::Node& v, const std::string& name, Eigen::Vector3d& out) const {
    if (!v.IsSequence() || v.size() != 3) fail(v, "'" + name + "' must be a 3-element list");
    for (int k = 0; k < 3; ++k) read(v[k], name, out(k));
  }
  void read(const YAML::Node& v, const std::string& name, std::array<Interval, 3>& out) const {
    if (!v.IsSequence() || v.size() != 3)
      fail(v, "'" + name + "' must be a list of three [lo, hi] pairs");
    for (int k = 0; k < 3; ++k) read(v[k], name, out[k]);
  }
  void read(const YAML::Node& v, const std::string& name, std::array<double, 3>& out) const {
    if (!v.IsSequence() || v.size() != 3) fail(v, "'" + name + "' must be a 3-element list");
    for (int k = 0; k < 3; ++k) read(v[k], name, out[k]);
  }

  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> seen_;
};

void read_pose_range(Section s, PoseRange& r) {
  s.get("euler_deg", r.euler_deg);
  s.get("translation_mm", r.translation_mm);
  s.finish();
}

void apply_override(YAML::Node& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("--set " + text + ": expected section.key=value");
  const std::string path = text.substr(0, eq);
  const std::string value = text.substr(eq + 1);
  std::vector<std::string> keys;
  std::stringstream ss(path);
  for (std::string k; std::getline(ss, k, '.');) {
    if (k.empty()) throw ValidationError("--set " + text + ": empty key segment");
    keys.push_back(k);
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ValidationError("--set " + text + ": cannot parse value: " + e.msg);
  }
  // Walk with explicit node copies; yaml-cpp nodes are handles.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    YAML::Node next = chain.back()[keys[i]];
    if (next && !next.IsMap() && !next.IsNull())
      throw ValidationError("--set " + text + ": '" + keys[i] + "' is not a section");
    chain.push_back(next);
  }
  chain.back()[keys.back()] = parsed;
}

void finalize(PipelineConfig& c) {
  c.scene.randomization.seed = c.stage_seed("scene");
  c.augmentation.seed = c.stage_seed("dataset");
  c.optimizer.seed = c.stage_seed("train");
  c.geometry.seed = c.stage_seed("geometry");
  c.model.input_height = c.augmentation.target_height;
  c.model.input_width = c.augmentation.crop_width;
}

}  // namespace

void PipelineConfig::validate() const {
  require(scene_count >= 0, "scene.count must be >= 0");
  scene.validate();
  augmentation.validate();
  require(real_test_fraction >= 0.0 && real_test_fraction < 1.0,
          "dataset.real_test_fraction must lie in [0, 1)");
  model.validate();
  optimizer.validate();
  loss.validate();
  geometry.validate();
  require(!output.empty(), "output must not be empty");
}

std::uint64_t PipelineConfig::stage_seed(const char* stage) const {
  return derive_seed(seed, stage);
}

PipelineConfig parse_config(const std::string& yaml_text, const std::string& source_name,
                            const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError(where(source_name, e.mark) + ": " + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ValidationError(where(source_name, root.Mark()) + ": expected a mapping");
  for (const std::string& o : overrides) apply_override(root, o);

  PipelineConfig c;
  Section top(root, "", source_name);
  top.get("seed", c.seed);
  top.get("output", c.output);
  {
    Section s = top.child("scene");
    s.get("count", c.scene_count);
    s.get("test_fraction", c.scene.test_fraction);
    {
      Section cam = s.child("camera");
      CameraModel& k = c.scene.camera;
      cam.get("width", k.width);
      cam.get("height", k.height);
      cam.get("fx", k.fx);
      cam.get("fy", k.fy);
      cam.get("cx", k.cx);
      cam.get("cy", k.cy);
      cam.get("near", k.near);
      cam.get("far", k.far);
      cam.finish();
    }
    {
      Section n = s.child("needle");
      n.get("circle_radius", c.scene.specs.needle.circle_radius);
      n.get("wire_radius", c.scene.specs.needle.wire_radius);
      n.get("arc_fraction", c.scene.specs.needle.arc_fraction);
      n.finish();
    }
    {
      Section i = s.child("instrument");
      InstrumentSpec& is = c.scene.specs.instrument;
      i.get("shaft_radius", is.shaft_radius);
      i.get("shaft_length", is.shaft_length);
      i.get("jaw_length", is.jaw_length);
      i.get("jaw_opening_angle", is.jaw_opening_angle);
      i.finish();
    }
    {
      Section p = s.child("pad");
      PadSpec& ps = c.scene.specs.pad;
      p.get("extent_x", ps.extent_x);
      p.get("extent_y", ps.extent_y);
      p.get("thickness", ps.thickness);
      p.get("wound_start", ps.wound_start);
      p.get("wound_end", ps.wound_end);
      p.finish();
    }
    {
      Section r = s.child("randomization");
      RandomizationConfig& rc = c.scene.randomization;
      read_pose_range(r.child("camera"), rc.camera);
      read_pose_range(r.child("needle"), rc.needle);
      read_pose_range(r.child("instrument"), rc.instrument);
      read_pose_range(r.child("pad"), rc.pad);
      r.get("light_azimuth_deg", rc.light_azimuth_deg);
      r.get("light_elevation_deg", rc.light_elevation_deg);
      r.get("noise_sigma", rc.noise_sigma);
      r.get("grasp_probability", rc.grasp_probability);
      r.get("grasp_fraction", rc.grasp_fraction);
      r.get("grasp_tilt_deg", rc.grasp_tilt_deg);
      r.get("free_offset_mm", rc.free_offset_mm);
      r.get("max_retries", rc.max_retries);
      r.finish();
    }
    {
      Section r = s.child("render");
      r.get("march_tolerance", c.scene.render.march_tolerance);
      r.get("max_steps", c.scene.render.max_steps);
      r.finish();
    }
    s.finish();
  }
  {
    Section d = top.child("dataset");
    d.get("target_height", c.augmentation.target_height);
    d.get("crop_width", c.augmentation.crop_width);
    d.get("crops_per_image", c.augmentation.crops_per_image);
    d.get("real_dir", c.real_dir);
    d.get("real_test_fraction", c.real_test_fraction);
    d.finish();
  }
  {
    Section m = top.child("model");
    m.get("depth_levels", c.model.depth_levels);
    m.get("base_channels", c.model.base_channels);
    m.get("leaky_slope", c.model.leaky_slope);
    m.get("depth_scale_mm", c.model.depth_scale_mm);
    m.finish();
  }
  {
    Section t = top.child("training");
    OptimizerConfig& o = c.optimizer;
    t.get("learning_rate", o.learning_rate);
    t.get("beta1", o.beta1);
    t.get("beta2", o.beta2);
    t.get("epsilon", o.epsilon);
    t.get("batch_size", o.batch_size);
    t.get("epochs_synthetic", o.epochs_synthetic);
    t.get("epochs_real", o.epochs_real);
    t.get("max_steps", o.max_steps);
    t.get("w_seg", c.loss.w_seg);
    t.get("w_depth", c.loss.w_depth);
    t.get("class_weights", c.loss.class_weights);
    t.finish();
  }
  {
    Section e = top.child("eval");
    std::string averaging = to_string(c.eval.averaging);
    e.get("averaging", averaging);
    try {
      c.eval.averaging = parse_averaging(averaging);
    } catch (const ValidationError& err) {
      e.fail(root["eval"]["averaging"], err.what());
    }
    e.finish();
  }
  {
    Section g = top.child("geometry");
    GeometryConfig& gc = c.geometry;
    g.get("ransac_iterations", gc.ransac_iterations);
    g.get("circle_tolerance_mm", gc.circle_tolerance_mm);
    g.get("plane_tolerance_mm", gc.plane_tolerance_mm);
    g.get("min_inlier_fraction", gc.min_inlier_fraction);
    g.get("wire_radius_mm", gc.wire_radius_mm);
    g.get("instrument_surface_offset_mm", gc.instrument_surface_offset_mm);
    g.get("needle_arc_deg", gc.needle_arc_deg);
    g.get("tip_ambiguity_mm", gc.tip_ambiguity_mm);
    g.get("min_points", gc.min_points);
    std::string source = "predicted";
    g.get("source", source);
    if (source == "predicted")
      c.geometry_source = GeometrySource::Predicted;
    else if (source == "ground_truth")
      c.geometry_source = GeometrySource::GroundTruth;
    else
      g.fail(root["geometry"]["source"], "geometry.source must be 'predicted' or 'ground_truth'");
    g.finish();
  }
  top.finish();

  finalize(c);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source_name + ": " + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), overrides);
}

namespace {

YAML::Node flow(std::initializer_list<double> values) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (double v : values) n.push_back(v);
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

YAML::Node interval(const Interval& i) { return flow({i.lo, i.hi}); }

YAML::Node vec3(const Eigen::Vector3d& v) { return flow({v.x(), v.y(), v.z()}); }

YAML::Node pose_range(const PoseRange& r) {
  YAML::Node n;
  for (const auto* field : {&r.euler_deg, &r.translation_mm}) {
    YAML::Node seq(YAML::NodeType::Sequence);
    for (const Interval& i : *field) seq.push_back(interval(i));
    seq.SetStyle(YAML::EmitterStyle::Flow);
    n[field == &r.euler_deg ? "euler_deg" : "translation_mm"] = seq;
  }
  return n;
}

}  // namespace

std::string config_to_yaml(const PipelineConfig& c) {
  YAML::Node root;
  root["seed"] = c.seed;
  root["output"] = c.output.string();
  YAML::Node s;
  s["count"] = c.scene_count;
  s["test_fraction"] = c.scene.test_fraction;
  const CameraModel& k = c.scene.camera;
  s["camera"]["width"] = k.width;
  s["camera"]["height"] = k.height;
  s["camera"]["fx"] = k.fx;
  s["camera"]["fy"] = k.fy;
  s["camera"]["cx"] = k.cx;
  s["camera"]["cy"] = k.cy;
  s["camera"]["near"] = k.near;
  s["camera"]["far"] = k.far;
  const SceneSpecs& sp = c.scene.specs;
  s["needle"]["circle_radius"] = sp.needle.circle_radius;
  s["needle"]["wire_radius"] = sp.needle.wire_radius;
  s["needle"]["arc_fraction"] = sp.needle.arc_fraction;
  s["instrument"]["shaft_radius"] = sp.instrument.shaft_radius;
  s["instrument"]["shaft_length"] = sp.instrument.shaft_length;
  s["instrument"]["jaw_length"] = sp.instrument.jaw_length;
  s["instrument"]["jaw_opening_angle"] = sp.instrument.jaw_opening_angle;
  s["pad"]["extent_x"] = sp.pad.extent_x;
  s["pad"]["extent_y"] = sp.pad.extent_y;
  s["pad"]["thickness"] = sp.pad.thickness;
  s["pad"]["wound_start"] = vec3(sp.pad.wound_start);
  s["pad"]["wound_end"] = vec3(sp.pad.wound_end);
  const RandomizationConfig& r = c.scene.randomization;
  YAML::Node rn;
  rn["camera"] = pose_range(r.camera);
  rn["needle"] = pose_range(r.needle);
  rn["instrument"] = pose_range(r.instrument);
  rn["pad"] = pose_range(r.pad);
  rn["light_azimuth_deg"] = interval(r.light_azimuth_deg);
  rn["light_elevation_deg"] = interval(r.light_elevation_deg);
  rn["noise_sigma"] = r.noise_sigma;
  rn["grasp_probability"] = r.grasp_probability;
  rn["grasp_fraction"] = interval(r.grasp_fraction);
  rn["grasp_tilt_deg"] = interval(r.grasp_tilt_deg);
  rn["free_offset_mm"] = vec3(r.free_offset_mm);
  rn["max_retries"] = r.max_retries;
  s["randomization"] = rn;
  s["render"]["march_tolerance"] = c.scene.render.march_tolerance;
  s["render"]["max_steps"] = c.scene.render.max_steps;
  root["scene"] = s;

  YAML::Node d;
  d["target_height"] = c.augmentation.target_height;
  d["crop_width"] = c.augmentation.crop_width;
  d["crops_per_image"] = c.augmentation.crops_per_image;
  d["real_dir"] = c.real_dir ? YAML::Node(c.real_dir->string()) : YAML::Node(YAML::NodeType::Null);
  d["real_test_fraction"] = c.real_test_fraction;
  root["dataset"] = d;

  YAML::Node m;
  m["depth_levels"] = c.model.depth_levels;
  m["base_channels"] = c.model.base_channels;
  m["leaky_slope"] = c.model.leaky_slope;
  m["depth_scale_mm"] = c.model.depth_scale_mm;
  root["model"] = m;

  YAML::Node t;
  t["learning_rate"] = c.optimizer.learning_rate;
  t["beta1"] = c.optimizer.beta1;
  t["beta2"] = c.optimizer.beta2;
  t["epsilon"] = c.optimizer.epsilon;
  t["batch_size"] = c.optimizer.batch_size;
  t["epochs_synthetic"] = c.optimizer.epochs_synthetic;
  t["epochs_real"] = c.optimizer.epochs_real;
  t["max_steps"] = c.optimizer.max_steps;
  t["w_seg"] = c.loss.w_seg;
  t["w_depth"] = c.loss.w_depth;
  t["class_weights"] =
      flow({c.loss.class_weights[0], c.loss.class_weights[1], c.loss.class_weights[2]});
  root["training"] = t;

  root["eval"]["averaging"] = to_string(c.eval.averaging);

  YAML::Node g;
  g["ransac_iterations"] = c.geometry.ransac_iterations;
  g["circle_tolerance_mm"] = c.geometry.circle_tolerance_mm;
  g["plane_tolerance_mm"] = c.geometry.plane_tolerance_mm;
  g["min_inlier_fraction"] = c.geometry.min_inlier_fraction;
  g["wire_radius_mm"] = c.geometry.wire_radius_mm;
  g["instrument_surface_offset_mm"] = c.geometry.instrument_surface_offset_mm;
  g["needle_arc_deg"] = c.geometry.needle_arc_deg;
  g["tip_ambiguity_mm"] = c.geometry.tip_ambiguity_mm;
  g["min_points"] = c.geometry.min_points;
  g["source"] = c.geometry_source == GeometrySource::Predicted ? "predicted" : "ground_truth";
  root["geometry"] = g;

  YAML::Emitter out;
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace suture
