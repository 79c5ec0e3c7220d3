#include "tstereo/sequence.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "tstereo/error.hpp"

namespace tstereo {

namespace {

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Parses "NNNNNN.png" into its index; empty for anything else.
std::optional<int> frame_index(const fs::path& file) {
  if (file.extension() != ".png") return std::nullopt;
  const std::string stem = file.stem().string();
  if (stem.size() != 6 || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  return std::stoi(stem);
}

void require_shape(const fs::path& file, int w, int h, const CameraModel& cam) {
  if (w != cam.width || h != cam.height)
    throw ParseError(file.string(), "header",
                     "size " + std::to_string(w) + "x" + std::to_string(h) + " disagrees with camera.txt (" +
                         std::to_string(cam.width) + "x" + std::to_string(cam.height) + ")");
}

}  // namespace

SequenceReader::SequenceReader(fs::path root) : layout_{std::move(root)} {
  if (!fs::is_directory(layout_.root)) throw IoError("sequence directory not found: " + layout_.root.string());
  camera_ = read_camera(layout_.camera());
  poses_ = read_poses(layout_.poses());

  const fs::path left_dir = layout_.root / "left";
  if (!fs::is_directory(left_dir)) throw IoError("missing directory " + left_dir.string());
  std::vector<int> indices;
  for (const auto& entry : fs::directory_iterator(left_dir))
    if (const auto i = frame_index(entry.path())) indices.push_back(*i);
  std::sort(indices.begin(), indices.end());
  if (indices.empty()) throw IoError("no frames in " + left_dir.string());
  for (int i = 0; i < static_cast<int>(indices.size()); ++i)
    if (indices[i] != i) throw IoError("frame " + frame_stem(i) + ".png missing from " + left_dir.string());
  frame_count_ = static_cast<int>(indices.size());
  for (int i = 0; i < frame_count_; ++i)
    if (!fs::exists(layout_.right(i))) throw IoError("missing right image " + layout_.right(i).string());
  if (static_cast<int>(poses_.size()) < frame_count_)
    throw ParseError(layout_.poses().string(), "end",
                     std::to_string(poses_.size()) + " poses for " + std::to_string(frame_count_) + " frames");
}

std::string SequenceReader::name() const {
  const fs::path normalized = layout_.root.lexically_normal();
  const std::string n = (normalized.has_filename() ? normalized : normalized.parent_path()).filename().string();
  return n.empty() ? "sequence" : n;
}

Frame SequenceReader::load_frame(int index) const {
  if (index < 0 || index >= frame_count_) throw ConfigError("frame index out of range");
  Frame f;
  f.index = index;
  f.timestamp = poses_[index].timestamp;
  f.pose = poses_[index].pose;
  f.camera = camera_;
  f.left = read_image(layout_.left(index));
  require_shape(layout_.left(index), f.left.width(), f.left.height(), camera_);
  f.right = read_image(layout_.right(index));
  require_shape(layout_.right(index), f.right.width(), f.right.height(), camera_);
  return f;
}

std::optional<Frame> SequenceReader::next() {
  if (cursor_ >= frame_count_) return std::nullopt;
  return load_frame(cursor_++);
}

bool SequenceReader::has_ground_truth() const { return fs::exists(layout_.gt_disparity(0)); }

GroundTruth SequenceReader::ground_truth(int index) {
  GroundTruth gt;
  gt.disparity = read_pfm(layout_.gt_disparity(index));
  require_shape(layout_.gt_disparity(index), gt.disparity.width(), gt.disparity.height(), camera_);
  gt.valid = gt_valid_mask(gt.disparity);
  if (fs::exists(layout_.occlusion(index))) {
    gt.occlusion = read_mask_pgm(layout_.occlusion(index));
    require_shape(layout_.occlusion(index), gt.occlusion.width(), gt.occlusion.height(), camera_);
  } else {
    gt.occlusion = Mask(camera_.width, camera_.height, 0);
  }
  if (index + 1 < frame_count_ && fs::exists(layout_.flow_u(index))) {
    gt.flow_u = read_pfm(layout_.flow_u(index));
    gt.flow_v = read_pfm(layout_.flow_v(index));
    require_shape(layout_.flow_u(index), gt.flow_u.width(), gt.flow_u.height(), camera_);
    require_shape(layout_.flow_v(index), gt.flow_v.width(), gt.flow_v.height(), camera_);
    gt.flow_valid = Mask(camera_.width, camera_.height, 0);
    for (int v = 0; v < camera_.height; ++v)
      for (int u = 0; u < camera_.width; ++u)
        gt.flow_valid(u, v) = std::isfinite(gt.flow_u(u, v)) && std::isfinite(gt.flow_v(u, v)) ? 1 : 0;
  }
  return gt;
}

SyntheticFrameSource::SyntheticFrameSource(SceneSpec spec) : spec_(std::move(spec)) { validate_scene(spec_); }

std::optional<Frame> SyntheticFrameSource::next() {
  if (cursor_ >= spec_.frame_count()) return std::nullopt;
  current_.reset();
  current_ = generate_frame(spec_, cursor_++);
  return current_->frame;
}

GroundTruth SyntheticFrameSource::ground_truth(int index) {
  if (!current_ || current_->frame.index != index)
    throw ConfigError("synthetic ground truth is only kept for the latest frame");
  return ground_truth_of(*current_);
}

GroundTruth ground_truth_of(const SyntheticFrame& frame) {
  GroundTruth gt;
  gt.disparity = frame.gt_disparity;
  gt.valid = gt_valid_mask(frame.gt_disparity);
  gt.occlusion = frame.occlusion;
  if (frame.has_next) {
    gt.flow_u = frame.flow_u;
    gt.flow_v = frame.flow_v;
    gt.flow_valid = frame.flow_valid;
  }
  return gt;
}

namespace {

using json = nlohmann::json;

class SceneParser {
 public:
  explicit SceneParser(fs::path path) : path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ParseError(path_.string(), field, what);
  }

  const json& member(const json& obj, const std::string& key, const std::string& where) const {
    if (!obj.is_object()) fail(where, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(where + "." + key, "missing field");
    return *it;
  }

  double number(const json& j, const std::string& where) const {
    if (!j.is_number()) fail(where, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(where, "non-finite number");
    return x;
  }

  int integer(const json& j, const std::string& where) const {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
  }

  std::uint64_t seed(const json& j, const std::string& where) const {
    if (!j.is_number_unsigned()) fail(where, "expected a non-negative integer");
    return j.get<std::uint64_t>();
  }

  Eigen::Vector3d vec3(const json& j, const std::string& where) const {
    if (!j.is_array() || j.size() != 3) fail(where, "expected [x, y, z]");
    return {number(j[0], where + "[0]"), number(j[1], where + "[1]"), number(j[2], where + "[2]")};
  }

 private:
  fs::path path_;
};

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

SceneSpec read_scene_file(const fs::path& path) {
  const std::string text = read_file(path);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), "byte " + std::to_string(e.byte), "invalid JSON");
  }
  const SceneParser p(path);
  SceneSpec spec;
  const json& cam = p.member(root, "camera", "$");
  spec.camera.fx = p.number(p.member(cam, "fx", "camera"), "camera.fx");
  spec.camera.fy = p.number(p.member(cam, "fy", "camera"), "camera.fy");
  spec.camera.cx = p.number(p.member(cam, "cx", "camera"), "camera.cx");
  spec.camera.cy = p.number(p.member(cam, "cy", "camera"), "camera.cy");
  spec.camera.baseline = p.number(p.member(cam, "baseline", "camera"), "camera.baseline");
  spec.camera.width = p.integer(p.member(cam, "width", "camera"), "camera.width");
  spec.camera.height = p.integer(p.member(cam, "height", "camera"), "camera.height");
  if (root.contains("max_disparity")) spec.max_disparity = p.integer(root["max_disparity"], "max_disparity");
  if (root.contains("seed")) spec.seed = p.seed(root["seed"], "seed");
  if (root.contains("noise_sigma")) spec.noise_sigma = p.number(root["noise_sigma"], "noise_sigma");

  const json& planes = p.member(root, "planes", "$");
  if (!planes.is_array()) p.fail("planes", "expected an array");
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const std::string where = "planes[" + std::to_string(i) + "]";
    const json& pj = planes[i];
    ScenePlane plane;
    plane.normal = p.vec3(p.member(pj, "normal", where), where + ".normal");
    plane.offset = p.number(p.member(pj, "offset", where), where + ".offset");
    if (pj.contains("texture")) {
      const json& tj = pj["texture"];
      const std::string tw = where + ".texture";
      if (tj.contains("kind")) {
        const json& kind = tj["kind"];
        if (kind == "noise") plane.texture.kind = TextureKind::noise;
        else if (kind == "checker") plane.texture.kind = TextureKind::checker;
        else p.fail(tw + ".kind", "expected \"noise\" or \"checker\"");
      }
      if (tj.contains("seed")) plane.texture.seed = p.seed(tj["seed"], tw + ".seed");
      if (tj.contains("scale")) plane.texture.scale = p.number(tj["scale"], tw + ".scale");
    }
    if (pj.contains("bounds")) {
      const json& bj = pj["bounds"];
      const std::string bw = where + ".bounds";
      plane.bounds = PlaneBounds{p.vec3(p.member(bj, "center", bw), bw + ".center"),
                                 p.number(p.member(bj, "half_s", bw), bw + ".half_s"),
                                 p.number(p.member(bj, "half_t", bw), bw + ".half_t")};
    }
    spec.planes.push_back(plane);
  }

  const json& traj = p.member(root, "trajectory", "$");
  if (!traj.is_array()) p.fail("trajectory", "expected an array");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const std::string where = "trajectory[" + std::to_string(i) + "]";
    const Eigen::Vector3d t = p.vec3(p.member(traj[i], "t", where), where + ".t");
    const json& q = p.member(traj[i], "q", where);
    if (!q.is_array() || q.size() != 4) p.fail(where + ".q", "expected [qx, qy, qz, qw]");
    double qv[4];
    for (int k = 0; k < 4; ++k) qv[k] = p.number(q[k], where + ".q");
    if (Eigen::Vector4d(qv[0], qv[1], qv[2], qv[3]).norm() < 1e-12) p.fail(where + ".q", "zero quaternion");
    spec.trajectory.push_back(Pose::from_quaternion(t, qv[0], qv[1], qv[2], qv[3]));
  }
  try {
    validate_scene(spec);
  } catch (const ConfigError& e) {
    p.fail("$", e.what());
  }
  return spec;
}

void write_scene_file(const fs::path& path, const SceneSpec& spec) {
  json root;
  root["camera"] = {{"fx", spec.camera.fx},         {"fy", spec.camera.fy},       {"cx", spec.camera.cx},
                    {"cy", spec.camera.cy},         {"baseline", spec.camera.baseline},
                    {"width", spec.camera.width},   {"height", spec.camera.height}};
  root["max_disparity"] = spec.max_disparity;
  root["seed"] = spec.seed;
  root["noise_sigma"] = spec.noise_sigma;
  json planes = json::array();
  for (const ScenePlane& plane : spec.planes) {
    json pj;
    pj["normal"] = vec_json(plane.normal);
    pj["offset"] = plane.offset;
    pj["texture"] = {{"kind", plane.texture.kind == TextureKind::noise ? "noise" : "checker"},
                     {"seed", plane.texture.seed},
                     {"scale", plane.texture.scale}};
    if (plane.bounds)
      pj["bounds"] = {{"center", vec_json(plane.bounds->center)},
                      {"half_s", plane.bounds->half_s},
                      {"half_t", plane.bounds->half_t}};
    planes.push_back(pj);
  }
  root["planes"] = planes;
  json traj = json::array();
  for (const Pose& pose : spec.trajectory) {
    const Eigen::Quaterniond q = pose.quaternion();
    traj.push_back({{"t", vec_json(pose.translation())}, {"q", json::array({q.x(), q.y(), q.z(), q.w()})}});
  }
  root["trajectory"] = traj;
  write_file_atomic(path, root.dump(2) + "\n");
}

void write_synthetic_frame(const SequenceLayout& layout, const SyntheticFrame& frame) {
  for (const char* dir : {"left", "right", "disp_gt", "occ", "flow"}) ensure_directory(layout.root / dir);
  const int i = frame.frame.index;
  write_image_png16(layout.left(i), frame.frame.left);
  write_image_png16(layout.right(i), frame.frame.right);
  write_pfm(layout.gt_disparity(i), frame.gt_disparity);
  write_mask_pgm(layout.occlusion(i), frame.occlusion);
  if (frame.has_next) {
    write_pfm(layout.flow_u(i), frame.flow_u);
    write_pfm(layout.flow_v(i), frame.flow_v);
  }
}

void write_synthetic_sequence(const fs::path& root, const SceneSpec& spec) {
  validate_scene(spec);
  ensure_directory(root);
  const SequenceLayout layout{root};
  write_camera(layout.camera(), spec.camera);
  std::vector<StampedPose> poses;
  for (int i = 0; i < spec.frame_count(); ++i) {
    const SyntheticFrame frame = generate_frame(spec, i);
    write_synthetic_frame(layout, frame);
    poses.push_back({frame.frame.timestamp, frame.frame.pose});
  }
  write_poses_tum(layout.poses(), poses);
}

DisparityWriterSink::DisparityWriterSink(fs::path output_root, bool write_png)
    : layout_{std::move(output_root)}, write_png_(write_png) {
  ensure_directory(layout_.root / "disp");
}

void DisparityWriterSink::consume(const Frame& frame, const FrameResult& result) {
  write_pfm(layout_.disparity_pfm(frame.index), result.disparity);
  if (write_png_) {
    const Mask valid(result.disparity.width(), result.disparity.height(), 1);
    write_disp_png16(layout_.disparity_png(frame.index), result.disparity, valid);
  }
}

EvaluationSink::EvaluationSink(GroundTruthProvider& gt, FlowSampling sampling) : gt_(gt), evaluator_(sampling) {}

void EvaluationSink::consume(const Frame& frame, const FrameResult& result) {
  EvalFrame f{frame.index, frame.pose, frame.camera, result.disparity, gt_.ground_truth(frame.index)};
  if (float32_)
    for (double& x : f.disparity.pixels()) x = static_cast<double>(static_cast<float>(x));
  if (auto metrics = evaluator_.push(std::move(f))) emit(*metrics);
}

void EvaluationSink::finish() {
  if (auto metrics = evaluator_.finish()) emit(*metrics);
}

void EvaluationSink::emit(const FrameMetrics& metrics) {
  if (writer_) writer_->write(metrics);
  if (aggregator_) aggregator_->add(metrics);
  if (callback_) callback_(metrics);
}

}  // namespace tstereo
