#include "hilt/surveillance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

namespace hilt {

std::vector<Track> emit_tracks(const std::vector<ActorState>& actors, const std::vector<bool>& equipped, TimeMs t_ms,
                               TimeMs latency_ms) {
  std::vector<Track> out;
  for (std::size_t i = 0; i < actors.size(); ++i) {
    const ActorState& a = actors[i];
    if (a.cls == ActorClass::atc || i >= equipped.size() || !equipped[i]) continue;
    Track t;
    t.actor_id = a.actor_id;
    t.callsign = a.callsign.value_or("");
    t.t_adsb_in_ms = t_ms;
    t.t_adsb_out_ms = t_ms + latency_ms;
    t.position = a.position;
    t.ground_speed_mps = a.ground_speed_mps;
    t.vertical_speed_mps = a.vertical_speed_mps;
    t.heading_deg = a.heading_deg;
    t.equipped = true;
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<double> compute_ttg(const Track& track, const Vec3& target, double stationary_eps_mps) {
  if (track.ground_speed_mps <= stationary_eps_mps) return std::nullopt;
  const Vec3 d = flat(target - track.position);
  const Vec3 v = heading_vector(track.heading_deg) * track.ground_speed_mps;
  if (dot(d, v) <= 0.0) return std::numeric_limits<double>::infinity();
  return norm_xy(d) / track.ground_speed_mps;
}

Cpa compute_cpa(const Track& a, const Track& b) {
  const Vec3 dp = b.position - a.position;
  const Vec3 dv = b.velocity() - a.velocity();
  const double vv = dot(dv, dv);
  double t = 0.0;
  if (vv > 1e-12) t = std::max(0.0, -dot(dp, dv) / vv);
  return Cpa{t, norm(dp + dv * t)};
}

std::optional<double> predicted_loss_time(const Track& a, const Track& b, double horizontal_m, double vertical_m,
                                          double lookahead_s) {
  const Vec3 dp = b.position - a.position;
  const Vec3 dv = b.velocity() - a.velocity();
  double lo = 0.0;
  double hi = lookahead_s;

  // Horizontal: |dp_h + dv_h t|^2 < H^2.
  const double qa = dv.x * dv.x + dv.y * dv.y;
  const double qb = 2.0 * (dp.x * dv.x + dp.y * dv.y);
  const double qc = dp.x * dp.x + dp.y * dp.y - horizontal_m * horizontal_m;
  if (qa < 1e-12) {
    if (qc >= 0.0) return std::nullopt;
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    lo = std::max(lo, (-qb - sq) / (2.0 * qa));
    hi = std::min(hi, (-qb + sq) / (2.0 * qa));
  }

  // Vertical: |dz + dvz t| < V.
  if (std::abs(dv.z) < 1e-12) {
    if (std::abs(dp.z) >= vertical_m) return std::nullopt;
  } else {
    const double t1 = (-vertical_m - dp.z) / dv.z;
    const double t2 = (vertical_m - dp.z) / dv.z;
    lo = std::max(lo, std::min(t1, t2));
    hi = std::min(hi, std::max(t1, t2));
  }
  if (lo >= hi) return std::nullopt;
  return lo;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::airplane: return "airplane";
    case ClassLabel::truck: return "truck";
    case ClassLabel::bird: return "bird";
  }
  return "airplane";
}

std::optional<ClassLabel> class_label_for(ActorClass cls) {
  switch (cls) {
    case ActorClass::aircraft: return ClassLabel::airplane;
    case ActorClass::vehicle: return ClassLabel::truck;
    case ActorClass::wildlife: return ClassLabel::bird;
    case ActorClass::atc: return std::nullopt;
  }
  return std::nullopt;
}

std::string_view to_string(OccupancySource source) {
  switch (source) {
    case OccupancySource::vision: return "vision";
    case OccupancySource::adsb: return "adsb";
    case OccupancySource::fused: return "fused";
  }
  return "vision";
}

Vec3 actor_dimensions(ActorClass cls) {
  switch (cls) {
    case ActorClass::aircraft: return {36.0, 34.0, 11.0};
    case ActorClass::vehicle: return {6.0, 2.5, 2.5};
    case ActorClass::wildlife: return {1.0, 0.6, 0.8};
    case ActorClass::atc: return {0.0, 0.0, 0.0};
  }
  return {};
}

CameraPose camera_pose(const CameraSpec& camera, const ActorState* mount) {
  CameraPose pose;
  if (!mount) {
    pose.position = camera.position;
    pose.yaw_deg = wrap_heading(camera.yaw_deg);
    pose.pitch_deg = camera.pitch_deg;
    return pose;
  }
  const Vec3 fwd = heading_vector(mount->heading_deg);
  const Vec3 right{fwd.y, -fwd.x, 0.0};
  pose.position = mount->position + right * camera.position.x + fwd * camera.position.y;
  pose.position.z += camera.position.z;
  pose.yaw_deg = wrap_heading(mount->heading_deg + camera.yaw_deg);
  pose.pitch_deg = camera.pitch_deg;
  return pose;
}

double detection_probability(double range_m, double visibility_m, double first_detect_range_m, double gamma) {
  const double reach = std::min(first_detect_range_m, visibility_m);
  if (reach <= 0.0) return 0.0;
  const double base = std::clamp(1.0 - range_m / reach, 0.0, 1.0);
  return std::pow(base, gamma);
}

double detection_confidence(double range_m, double effective_range_m, const VisionConfig& vision) {
  const double frac = effective_range_m > 0.0 ? std::clamp(range_m / effective_range_m, 0.0, 1.0) : 1.0;
  return vision.conf_near - (vision.conf_near - vision.conf_far) * frac;
}

namespace {

struct CameraFrame {
  Vec3 origin;
  Vec3 forward;
  Vec3 right;
  Vec3 up;
  double focal_px;
  double width;
  double height;
};

CameraFrame make_frame(const CameraPose& pose, double fov_deg, const VisionConfig& vision) {
  const double yaw = pose.yaw_deg * kDegToRad;
  const double pitch = pose.pitch_deg * kDegToRad;
  CameraFrame f;
  f.origin = pose.position;
  f.forward = {std::sin(yaw) * std::cos(pitch), std::cos(yaw) * std::cos(pitch), std::sin(pitch)};
  f.right = {std::cos(yaw), -std::sin(yaw), 0.0};
  f.up = cross(f.right, f.forward);
  f.width = vision.image_width_px;
  f.height = vision.image_height_px;
  f.focal_px = (f.width / 2.0) / std::tan(fov_deg * kDegToRad / 2.0);
  return f;
}

struct CamPoint {
  double x, y, z;  // right, up, forward
};

CamPoint to_camera(const CameraFrame& f, const Vec3& p) {
  const Vec3 d = p - f.origin;
  return {dot(d, f.right), dot(d, f.up), dot(d, f.forward)};
}

}  // namespace

std::optional<std::array<double, 2>> project_to_image(const CameraPose& pose, double fov_deg, const VisionConfig& vision,
                                                      const Vec3& p) {
  const CameraFrame cf = make_frame(pose, fov_deg, vision);
  const CamPoint c = to_camera(cf, p);
  if (c.z <= 0.1) return std::nullopt;
  const double u = cf.width / 2.0 + cf.focal_px * c.x / c.z;
  const double v = cf.height / 2.0 - cf.focal_px * c.y / c.z;
  return std::array<double, 2>{u / cf.width, v / cf.height};
}

std::vector<Detection> simulate_frame(const FrameContext& frame, const VisionConfig& vision, RandomStream& stream) {
  std::vector<Detection> out;
  const CameraSpec& cam = *frame.camera;
  const CameraFrame cf = make_frame(frame.pose, cam.fov_deg, vision);
  const double half_h = std::atan(std::tan(cam.fov_deg * kDegToRad / 2.0) * cf.height / cf.width);
  const double reach = vision.first_detect_range_m * frame.range_scale;

  for (const ActorState& a : *frame.actors) {
    const auto label = class_label_for(a.cls);
    if (!label) continue;
    const bool is_ego = cam.mounted_on && *cam.mounted_on == a.actor_id;
    if (is_ego) {
      if (cam.ego_mask) continue;
      // Unmasked ego airframe fills the bottom of the image.
      Detection d;
      d.camera_id = cam.camera_id;
      d.ts_ms = frame.t_frame_ms;
      d.t_vision_ms = frame.t_frame_ms + frame.latency_ms;
      d.class_label = *label;
      d.confidence = vision.conf_near;
      d.bbox = {0.25, 0.8, 0.5, 0.2};
      d.actor_id_truth = a.actor_id;
      out.push_back(std::move(d));
      continue;
    }
    const Vec3 dims = actor_dimensions(a.cls);
    const Vec3 center = a.position + Vec3{0.0, 0.0, dims.z / 2.0};
    const double range = norm(center - cf.origin);
    if (range > frame.visibility_m) continue;
    const CamPoint c = to_camera(cf, center);
    if (c.z <= 0.5) continue;
    if (std::abs(std::atan2(c.x, c.z)) > cam.fov_deg * kDegToRad / 2.0) continue;
    if (std::abs(std::atan2(c.y, c.z)) > half_h) continue;

    const double p_det = detection_probability(range, frame.visibility_m, reach, vision.gamma);
    if (!(stream.uniform() < p_det)) continue;

    const Vec3 fwd = heading_vector(a.heading_deg);
    const Vec3 right{fwd.y, -fwd.x, 0.0};
    double u_min = cf.width, u_max = 0.0, v_min = cf.height, v_max = 0.0;
    bool any = false;
    for (int i = 0; i < 8; ++i) {
      const double sl = (i & 1) ? 0.5 : -0.5;
      const double sw = (i & 2) ? 0.5 : -0.5;
      const double zh = (i & 4) ? dims.z : 0.0;
      const Vec3 corner = a.position + fwd * (sl * dims.x) + right * (sw * dims.y) + Vec3{0.0, 0.0, zh};
      const CamPoint p = to_camera(cf, corner);
      if (p.z <= 0.1) continue;
      const double u = cf.width / 2.0 + cf.focal_px * p.x / p.z;
      const double v = cf.height / 2.0 - cf.focal_px * p.y / p.z;
      u_min = std::min(u_min, u);
      u_max = std::max(u_max, u);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
      any = true;
    }
    if (!any) continue;
    u_min = std::clamp(u_min, 0.0, cf.width);
    u_max = std::clamp(u_max, 0.0, cf.width);
    v_min = std::clamp(v_min, 0.0, cf.height);
    v_max = std::clamp(v_max, 0.0, cf.height);
    if (u_max - u_min <= 0.0 || v_max - v_min <= 0.0) continue;

    Detection d;
    d.camera_id = cam.camera_id;
    d.ts_ms = frame.t_frame_ms;
    d.t_vision_ms = frame.t_frame_ms + frame.latency_ms;
    d.class_label = *label;
    d.confidence = detection_confidence(range, reach, vision);
    d.bbox = {u_min / cf.width, v_min / cf.height, (u_max - u_min) / cf.width, (v_max - v_min) / cf.height};
    d.range_m = range;
    d.actor_id_truth = a.actor_id;

    const double u_c = (u_min + u_max) / 2.0;
    const double xn = (u_c - cf.width / 2.0) / cf.focal_px;
    const double yn = -(v_max - cf.height / 2.0) / cf.focal_px;
    const Vec3 ray = cf.right * xn + cf.up * yn + cf.forward;
    if (ray.z < -1e-9) {
      const double t = -cf.origin.z / ray.z;
      Vec3 gp = cf.origin + ray * t;
      gp.z = 0.0;
      d.ground_point = gp;
    }
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------

bool Corroborator::on_frame(const std::string& camera_id, std::uint64_t frame_index, TimeMs now_ms,
                            const std::vector<Detection>& in_area) {
  const OccupancyFlag before = flag_;
  on_tick(now_ms);

  std::erase_if(hits_, [&](const Hit& h) { return h.at_ms < now_ms - policy_.window_ms; });

  bool qualifying = false;
  for (const auto& d : in_area) {
    const Vec3 gp = d.ground_point.value_or(Vec3{});
    hits_.push_back(Hit{camera_id, now_ms, d.confidence, gp});
    if (d.confidence >= policy_.tau_vis) qualifying = true;
  }

  Streak& st = streaks_[camera_id];
  if (qualifying) {
    st.length = (st.any && st.length > 0 && frame_index == st.last_frame + 1) ? st.length + 1 : 1;
  } else {
    st.length = 0;
  }
  st.last_frame = frame_index;
  st.any = true;

  if (!in_area.empty()) {
    flag_.last_confirm_ms = now_ms;
    const Vec3 gp = in_area.front().ground_point.value_or(Vec3{});
    auto prev = last_hit_by_camera_.find(camera_id);
    if (prev != last_hit_by_camera_.end() && now_ms > prev->second.at_ms &&
        now_ms - prev->second.at_ms <= policy_.window_ms) {
      const double speed = norm_xy(gp - prev->second.ground_point) * 1000.0 /
                           static_cast<double>(now_ms - prev->second.at_ms);
      if (speed > policy_.activity_speed_mps) last_motion_ms_ = now_ms;
    }
    last_hit_by_camera_[camera_id] = Hit{camera_id, now_ms, in_area.front().confidence, gp};
  }

  std::set<std::string> cams;
  double conf_sum = 0.0;
  for (const auto& h : hits_) {
    cams.insert(h.camera_id);
    conf_sum += h.confidence;
  }
  const bool by_cameras = static_cast<int>(cams.size()) >= policy_.k_cameras;
  const bool by_persistence = st.length >= policy_.m_frames;
  if ((by_cameras || by_persistence) && !flag_.occupied) {
    flag_.occupied = true;
    flag_.since_ms = now_ms;
  }
  if (flag_.occupied) {
    flag_.corroboration = std::max<int>(1, static_cast<int>(cams.size()));
    flag_.confidence = hits_.empty() ? flag_.confidence : conf_sum / static_cast<double>(hits_.size());
    flag_.camera_ids.assign(cams.begin(), cams.end());
    flag_.ground_points.clear();
    for (const auto& h : hits_) flag_.ground_points.push_back(h.ground_point);
    flag_.activity = last_motion_ms_ && now_ms - *last_motion_ms_ < policy_.staleness_ms;
  }
  return !(flag_ == before);
}

bool Corroborator::on_tick(TimeMs now_ms) {
  if (!flag_.occupied) return false;
  if (now_ms - flag_.last_confirm_ms < policy_.staleness_ms) {
    const bool active = last_motion_ms_ && now_ms - *last_motion_ms_ < policy_.staleness_ms;
    if (active == flag_.activity) return false;
    flag_.activity = active;
    return true;
  }
  OccupancyFlag cleared;
  cleared.runway = runway_;
  cleared.last_confirm_ms = flag_.last_confirm_ms;
  flag_ = cleared;
  return true;
}

}  // namespace hilt
