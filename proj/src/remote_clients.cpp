// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/remote_clients.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mvaug/image_io.hpp"

namespace mvaug {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<long> g_call_counter{0};

json ctx_json(const CallContext& ctx) {
  return {{"episode_id", ctx.episode_id}, {"view", ctx.view.str()}, {"frame_index", ctx.frame_index}};
}

json read_result_json(const fs::path& path, const std::string& episode_id) {
  std::ifstream in(path);
  if (!in) throw ClientError(episode_id, "remote result '" + path.string() + "' missing");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ClientError(episode_id, std::string("malformed remote result: ") + e.what());
  }
}

// Removes a call directory when the request finishes.
struct CallDirGuard {
  fs::path dir;
  ~CallDirGuard() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

}  // namespace

RemoteBackend::RemoteBackend(std::vector<std::string> argv, fs::path work_dir, json passthrough)
    : work_dir_(std::move(work_dir)), passthrough_(std::move(passthrough)) {
  if (argv.empty()) throw ParameterError("remote backend needs a command");
  std::error_code ec;
  fs::create_directories(work_dir_, ec);
  if (ec) throw ClientError("", "cannot create remote work dir '" + work_dir_.string() + "'");

  // A dead child must surface as a ClientError, not kill us on write.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw ClientError("", "pipe() failed");
  const pid_t pid = fork();
  if (pid < 0) throw ClientError("", "fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = fdopen(out_pipe[0], "r");

  Call call = new_call();
  CallDirGuard guard{call.dir};
  const json r = request_json("", "info", call, json::object());
  info_ = {r.value("backend", std::string("remote")), r.value("version", std::string("unknown"))};
}

RemoteBackend::~RemoteBackend() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_) std::fclose(static_cast<std::FILE*>(from_child_));
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

BackendInfo RemoteBackend::info() const {
  std::lock_guard lock(mutex_);
  return info_;
}

RemoteBackend::Call RemoteBackend::new_call() {
  Call c;
  c.dir = work_dir_ / ("call_" + std::to_string(::getpid()) + "_" + std::to_string(g_call_counter++));
  fs::create_directories(c.dir);
  return c;
}

std::string RemoteBackend::add_image(Call& call, const Image& img) {
  const fs::path p = call.dir / ("in_" + std::to_string(call.payload.size()) + ".png");
  io::write_png(p, img);
  call.payload.push_back(p.string());
  return p.string();
}

fs::path RemoteBackend::request(const std::string& episode_id, const std::string& op, Call& call,
                                json params) {
  std::lock_guard lock(mutex_);
  for (auto& [k, v] : passthrough_.items()) {
    if (!params.contains(k)) params[k] = v;
  }
  const long id = next_id_++;
  json req = {{"id", id}, {"op", op}, {"payload_paths", call.payload}, {"params", std::move(params)},
              {"result_dir", call.dir.string()}};
  const std::string line = req.dump() + "\n";
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
    if (n <= 0) throw ClientError(episode_id, "remote backend unavailable (write failed) for op " + op);
    off += static_cast<std::size_t>(n);
  }
  char* buf = nullptr;
  std::size_t cap = 0;
  const ssize_t got = getline(&buf, &cap, static_cast<std::FILE*>(from_child_));
  std::string resp_line = got > 0 ? std::string(buf, static_cast<std::size_t>(got)) : std::string();
  std::free(buf);
  if (got <= 0) throw ClientError(episode_id, "remote backend closed the stream during op " + op);
  json resp;
  try {
    resp = json::parse(resp_line);
  } catch (const json::exception& e) {
    throw ClientError(episode_id, "malformed response for op " + op + ": " + e.what());
  }
  if (resp.value("id", -1L) != id) throw ClientError(episode_id, "response id mismatch for op " + op);
  if (resp.value("status", std::string()) != "ok") {
    throw ClientError(episode_id, "remote op " + op + " failed: " + resp.value("error", std::string("unknown")));
  }
  if (!resp.contains("result_path")) throw ClientError(episode_id, "response lacks result_path");
  return resp.at("result_path").get<std::string>();
}

json RemoteBackend::request_json(const std::string& episode_id, const std::string& op, Call& call,
                                 json params) {
  return read_result_json(request(episode_id, op, call, std::move(params)), episode_id);
}

std::string RemoteBackend::do_reason_object_name(const CallContext& ctx, const ViewStream& clip,
                                                 std::string_view question) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  for (const auto& f : clip.frames) add_image(call, f);
  const json r = request_json(ctx.episode_id, "reason_object_name", call,
                              {{"question", question}, {"ctx", ctx_json(ctx)}});
  return r.value("label", std::string());
}

MaskResult RemoteBackend::do_open_vocab_mask(const CallContext& ctx, const Image& frame,
                                             std::string_view query) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  add_image(call, frame);
  const fs::path p = request(ctx.episode_id, "open_vocab_mask", call, {{"query", query}, {"ctx", ctx_json(ctx)}});
  MaskResult r;
  try {
    r.mask = io::read_mask_png(p);
  } catch (const Error& e) {
    throw ClientError(ctx.episode_id, e.what());
  }
  r.warning = !r.mask.any();
  r.provenance = info();
  return r;
}

TrackResult RemoteBackend::do_track_video(const CallContext& ctx, const ViewStream& frames,
                                          const PointPrompt& prompts, int anchor_index,
                                          const Mask* anchor_mask) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  for (const auto& f : frames.frames) add_image(call, f);
  if (anchor_mask) {
    const fs::path p = call.dir / "anchor_mask.png";
    io::write_mask_png(p, *anchor_mask);
    call.payload.push_back(p.string());
  }
  json pts = json::array();
  for (const auto& p : prompts.points) pts.push_back({p.x, p.y});
  const json r = request_json(ctx.episode_id, "track_video", call,
                              {{"points", pts}, {"anchor_index", anchor_index},
                               {"has_mask", anchor_mask != nullptr}, {"ctx", ctx_json(ctx)}});
  TrackResult out;
  out.provenance = info();
  for (const auto& m : r.value("masks", json::array())) {
    try {
      out.masks.push_back(io::read_mask_png(m.get<std::string>()));
    } catch (const Error& e) {
      throw ClientError(ctx.episode_id, e.what());
    }
  }
  return out;
}

PanopticResult RemoteBackend::do_panoptic_segment(const CallContext& ctx, const Image& frame) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  add_image(call, frame);
  const json r = request_json(ctx.episode_id, "panoptic_segment", call, {{"ctx", ctx_json(ctx)}});
  PanopticResult out;
  out.provenance = info();
  for (const auto& reg : r.value("regions", json::array())) {
    out.regions.push_back({reg.at("label").get<std::string>(),
                           io::read_mask_png(reg.at("mask").get<std::string>()),
                           reg.value("score", 0.0)});
  }
  return out;
}

std::string RemoteBackend::do_caption(const CallContext& ctx, const Video& stitched,
                                      std::string_view instruction) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  for (const auto& f : stitched) add_image(call, f);
  const json r = request_json(ctx.episode_id, "caption", call,
                              {{"instruction", instruction}, {"ctx", ctx_json(ctx)}});
  return r.value("text", std::string());
}

long RemoteBackend::do_match_features(const Image& a, const Image& b, double confidence_threshold) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  add_image(call, a);
  add_image(call, b);
  const json r = request_json("", "match_features", call, {{"confidence_threshold", confidence_threshold}});
  return r.value("count", -1L);
}

double RemoteBackend::do_iqa(std::string_view asset_id, const Image& image) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  add_image(call, image);
  return request_json("", "iqa", call, {{"asset_id", asset_id}}).at("score").get<double>();
}

double RemoteBackend::do_clip_similarity(std::string_view asset_id, const Image& image,
                                         std::string_view text) {
  Call call = new_call();
  CallDirGuard guard{call.dir};
  add_image(call, image);
  return request_json("", "clip_similarity", call, {{"asset_id", asset_id}, {"text", text}})
      .at("score")
      .get<double>();
}

}  // namespace mvaug
