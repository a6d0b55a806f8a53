// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/episode.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mvaug/image_io.hpp"

namespace mvaug {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::array<const char*, 7> kActionColumns = {"dx", "dy", "dz", "droll", "dpitch", "dyaw",
                                                   "gripper"};

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", i);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw SaveError("cannot create directory '" + dir.string() + "': " + ec.message());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw SaveError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw SaveError("write failed for '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing manifest '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest '" + path.string() + "': " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) throw LoadError("manifest '" + where.string() + "' lacks key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError("manifest '" + where.string() + "' key '" + key + "': " + e.what());
  }
}

void save_frames(const Video& frames, const fs::path& dir) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) io::write_png(dir / frame_name(static_cast<int>(i)), frames[i]);
}

void save_masks(const MaskVideo& masks, const fs::path& dir) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < masks.size(); ++i) io::write_mask_png(dir / frame_name(static_cast<int>(i)), masks[i]);
}

Video load_frames(const fs::path& dir, int count, int height, int width) {
  Video frames;
  frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    Image img = io::read_png(dir / frame_name(i));
    if (img.height != height || img.width != width) {
      throw ValidationError("frame " + (dir / frame_name(i)).string() + " is " +
                            std::to_string(img.height) + "x" + std::to_string(img.width) +
                            ", manifest says " + std::to_string(height) + "x" + std::to_string(width));
    }
    frames.push_back(std::move(img));
  }
  return frames;
}

MaskVideo load_masks(const fs::path& dir, int count, int height, int width) {
  MaskVideo masks;
  masks.reserve(count);
  for (int i = 0; i < count; ++i) {
    Mask m = io::read_mask_png(dir / frame_name(i));
    if (m.height != height || m.width != width) {
      throw ValidationError("mask " + (dir / frame_name(i)).string() + " has wrong shape");
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

std::string gripper_kind_name(GripperKind k) {
  return k == GripperKind::kBoolean ? "boolean" : "continuous";
}

GripperKind parse_gripper_kind(const std::string& s) {
  if (s == "boolean") return GripperKind::kBoolean;
  if (s == "continuous") return GripperKind::kContinuous;
  throw LoadError("unknown gripper_kind '" + s + "'");
}

}  // namespace

bool Episode::has_view(const ViewRole& role) const {
  return std::any_of(views.begin(), views.end(), [&](const ViewStream& v) { return v.role == role; });
}

const ViewStream& Episode::view(const ViewRole& role) const {
  for (const auto& v : views)
    if (v.role == role) return v;
  throw LookupError("episode '" + id + "' has no view '" + role.str() + "'");
}

void canonicalize_views(std::vector<ViewStream>& views) {
  std::stable_sort(views.begin(), views.end(),
                   [](const ViewStream& a, const ViewStream& b) { return a.role < b.role; });
}

void validate(const Episode& ep) {
  if (ep.views.empty()) throw ValidationError("episode '" + ep.id + "' has no views");
  if (!(ep.fps > 0)) throw ValidationError("episode '" + ep.id + "' fps must be positive");
  std::set<ViewRole> roles;
  const int t = ep.views.front().frame_count();
  for (const auto& v : ep.views) {
    if (!roles.insert(v.role).second) {
      throw ValidationError("episode '" + ep.id + "' repeats view role " + v.role.str());
    }
    if (v.frame_count() != t) {
      throw ValidationError("episode '" + ep.id + "' view length mismatch: " +
                            ep.views.front().role.str() + " has " + std::to_string(t) + " frames, " +
                            v.role.str() + " has " + std::to_string(v.frame_count()));
    }
    if (v.frames.empty()) continue;
    const int h = v.frames.front().height, w = v.frames.front().width;
    if (h <= 0 || w <= 0) throw ValidationError("view " + v.role.str() + " has empty frames");
    for (const auto& f : v.frames) {
      if (f.height != h || f.width != w) {
        throw ValidationError("view " + v.role.str() + " changes frame size mid-stream");
      }
    }
  }
  if (t < 1) throw ValidationError("episode '" + ep.id + "' has zero frames");
  const auto& a = ep.actions;
  if (a.gripper.size() != static_cast<std::size_t>(t) || a.delta_pose.size() != a.gripper.size()) {
    throw ValidationError("episode '" + ep.id + "' action length mismatch: " +
                          std::to_string(a.gripper.size()) + " action rows vs " + std::to_string(t) +
                          " frames");
  }
  if (a.gripper_kind == GripperKind::kContinuous &&
      std::any_of(a.gripper.begin(), a.gripper.end(), [](double g) { return g < 0; })) {
    throw ValidationError("episode '" + ep.id + "' has negative continuous gripper aperture");
  }
}

std::string to_string(CurationDecision::Action action) {
  switch (action) {
    case CurationDecision::Action::kKeep: return "keep";
    case CurationDecision::Action::kDiscard: return "discard";
    case CurationDecision::Action::kCrop: return "crop";
  }
  return "?";
}

CurationDecision curate_length(const Episode& episode, int min_frames, int max_frames) {
  const int t = episode.frame_count();
  if (t < min_frames) return {CurationDecision::Action::kDiscard, std::nullopt};
  if (t > max_frames) return {CurationDecision::Action::kCrop, std::make_pair(0, max_frames)};
  return {};
}

Episode apply_curation(const Episode& episode, const CurationDecision& decision) {
  using A = CurationDecision::Action;
  if (decision.action == A::kDiscard) throw PreconditionError("cannot apply a discard decision");
  if (decision.action == A::kKeep) return episode;
  const auto [start, end] = *decision.crop_range;
  Episode out = episode;
  for (auto& v : out.views) v.frames = Video(episode.view(v.role).frames.begin() + start,
                                             episode.view(v.role).frames.begin() + end);
  out.actions.delta_pose.assign(episode.actions.delta_pose.begin() + start,
                                episode.actions.delta_pose.begin() + end);
  out.actions.gripper.assign(episode.actions.gripper.begin() + start,
                             episode.actions.gripper.begin() + end);
  return out;
}

std::string to_string(EntityMaskVideo::Entity entity) {
  return entity == EntityMaskVideo::Entity::kRobot ? "robot" : "object";
}

// --- Episode ----------------------------------------------------------------

fs::path save_artifact(const Episode& episode, const fs::path& dir) {
  validate(episode);
  ensure_dir(dir);
  json views = json::array();
  for (const auto& v : episode.views) {
    const std::string sub = "frames_" + v.role.str();
    save_frames(v.frames, dir / sub);
    views.push_back({{"role", v.role.str()},
                     {"frame_dir", sub},
                     {"count", v.frame_count()},
                     {"height", v.height()},
                     {"width", v.width()}});
  }
  json rows = json::array();
  for (std::size_t i = 0; i < episode.actions.size(); ++i) {
    json row = json::array();
    for (double d : episode.actions.delta_pose[i]) row.push_back(d);
    row.push_back(episode.actions.gripper[i]);
    rows.push_back(std::move(row));
  }
  json manifest = {{"id", episode.id},
                   {"fps", episode.fps},
                   {"instruction", episode.instruction},
                   {"source", episode.source},
                   {"views", views},
                   {"actions",
                    {{"columns", kActionColumns},
                     {"rows", rows},
                     {"gripper_kind", gripper_kind_name(episode.actions.gripper_kind)}}}};
  const fs::path path = dir / kEpisodeManifest;
  write_json(path, manifest);
  return path;
}

Episode load_episode(const fs::path& manifest_path) {
  const json j = read_json(manifest_path);
  const fs::path base = manifest_path.parent_path();
  Episode ep;
  ep.id = field<std::string>(j, "id", manifest_path);
  ep.fps = field<double>(j, "fps", manifest_path);
  ep.instruction = field<std::string>(j, "instruction", manifest_path);
  ep.source = j.value("source", std::string{});

  const json& views = j.contains("views") ? j.at("views") : throw LoadError("manifest lacks 'views'");
  // Validate declared lengths before touching pixels so the error names them.
  int first_count = -1;
  std::string first_role;
  for (const auto& v : views) {
    const int count = field<int>(v, "count", manifest_path);
    const auto role = field<std::string>(v, "role", manifest_path);
    if (first_count < 0) {
      first_count = count;
      first_role = role;
    } else if (count != first_count) {
      throw ValidationError("view length mismatch in '" + manifest_path.string() + "': " +
                            first_role + " has " + std::to_string(first_count) + " frames, " +
                            role + " has " + std::to_string(count));
    }
  }
  for (const auto& v : views) {
    ViewStream s;
    s.role = ViewRole::parse(field<std::string>(v, "role", manifest_path));
    s.frames = load_frames(base / field<std::string>(v, "frame_dir", manifest_path),
                           field<int>(v, "count", manifest_path), field<int>(v, "height", manifest_path),
                           field<int>(v, "width", manifest_path));
    ep.views.push_back(std::move(s));
  }
  canonicalize_views(ep.views);

  const json& actions = j.contains("actions") ? j.at("actions") : throw LoadError("manifest lacks 'actions'");
  const auto columns = field<std::vector<std::string>>(actions, "columns", manifest_path);
  if (columns != std::vector<std::string>(kActionColumns.begin(), kActionColumns.end())) {
    throw LoadError("unexpected action columns in '" + manifest_path.string() + "'");
  }
  ep.actions.gripper_kind = parse_gripper_kind(actions.value("gripper_kind", std::string("boolean")));
  for (const auto& row : field<std::vector<std::vector<double>>>(actions, "rows", manifest_path)) {
    if (row.size() != 7) throw LoadError("action row must have 7 columns");
    ep.actions.delta_pose.push_back({row[0], row[1], row[2], row[3], row[4], row[5]});
    ep.actions.gripper.push_back(row[6]);
  }
  validate(ep);
  return ep;
}

// --- EntityMaskVideo ----------------------------------------------------------

fs::path save_artifact(const EntityMaskVideo& m, const fs::path& dir) {
  ensure_dir(dir);
  save_masks(m.masks, dir / "masks");
  json points = json::array();
  for (const auto& p : m.prompt_points) points.push_back({p.x, p.y});
  const int h = m.masks.empty() ? 0 : m.masks.front().height;
  const int w = m.masks.empty() ? 0 : m.masks.front().width;
  json manifest = {{"entity", to_string(m.entity)},
                   {"view", m.view.str()},
                   {"frame_dir", "masks"},
                   {"count", m.masks.size()},
                   {"height", h},
                   {"width", w},
                   {"entity_absent", m.entity_absent},
                   {"anchor_index", m.anchor_index},
                   {"label", m.label},
                   {"prompt_points", points}};
  const fs::path path = dir / kMaskManifest;
  write_json(path, manifest);
  return path;
}

EntityMaskVideo load_mask_video(const fs::path& manifest_path) {
  const json j = read_json(manifest_path);
  EntityMaskVideo m;
  const auto entity = field<std::string>(j, "entity", manifest_path);
  if (entity != "robot" && entity != "object") throw LoadError("unknown entity '" + entity + "'");
  m.entity = entity == "robot" ? EntityMaskVideo::Entity::kRobot : EntityMaskVideo::Entity::kObject;
  m.view = ViewRole::parse(field<std::string>(j, "view", manifest_path));
  m.entity_absent = field<bool>(j, "entity_absent", manifest_path);
  m.anchor_index = field<int>(j, "anchor_index", manifest_path);
  m.label = field<std::string>(j, "label", manifest_path);
  for (const auto& p : field<std::vector<std::array<int, 2>>>(j, "prompt_points", manifest_path)) {
    m.prompt_points.push_back({p[0], p[1]});
  }
  m.masks = load_masks(manifest_path.parent_path() / field<std::string>(j, "frame_dir", manifest_path),
                       field<int>(j, "count", manifest_path), field<int>(j, "height", manifest_path),
                       field<int>(j, "width", manifest_path));
  return m;
}

// --- ConditioningVideo --------------------------------------------------------

fs::path save_artifact(const ConditioningVideo& c, const fs::path& dir) {
  if (c.frames.size() != c.keep_mask.size()) throw SaveError("conditioning frames/mask length differ");
  ensure_dir(dir);
  save_frames(c.frames, dir / "frames");
  save_masks(c.keep_mask, dir / "keep");
  const int h = c.frames.empty() ? 0 : c.frames.front().height;
  const int w = c.frames.empty() ? 0 : c.frames.front().width;
  json manifest = {{"view", c.view.str()}, {"frame_dir", "frames"}, {"mask_dir", "keep"},
                   {"count", c.frames.size()}, {"height", h}, {"width", w}};
  const fs::path path = dir / kConditioningManifest;
  write_json(path, manifest);
  return path;
}

ConditioningVideo load_conditioning_video(const fs::path& manifest_path) {
  const json j = read_json(manifest_path);
  const fs::path base = manifest_path.parent_path();
  ConditioningVideo c;
  c.view = ViewRole::parse(field<std::string>(j, "view", manifest_path));
  const int count = field<int>(j, "count", manifest_path);
  const int h = field<int>(j, "height", manifest_path), w = field<int>(j, "width", manifest_path);
  c.frames = load_frames(base / field<std::string>(j, "frame_dir", manifest_path), count, h, w);
  c.keep_mask = load_masks(base / field<std::string>(j, "mask_dir", manifest_path), count, h, w);
  return c;
}

}  // namespace mvaug
