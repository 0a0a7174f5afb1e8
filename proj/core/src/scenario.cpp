#include "flexcouple/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace flexcouple {
namespace {

using nlohmann::json;

std::string face_name(Face face) {
  switch (face) {
    case Face::back: return "back";
    case Face::front: return "front";
    case Face::left_knob: return "left_knob";
    case Face::right_knob: return "right_knob";
    case Face::left_hole: return "left_hole";
    case Face::right_hole: return "right_hole";
  }
  return "?";
}

Face face_from_name(const std::string& name, const std::string& path) {
  for (Face f : {Face::back, Face::front, Face::left_knob, Face::right_knob,
                 Face::left_hole, Face::right_hole}) {
    if (face_name(f) == name) return f;
  }
  throw ConfigError(path + ": unknown face '" + name + "'");
}

PhaseKind phase_from_name(const std::string& name, const std::string& path) {
  if (name == "align") return PhaseKind::align;
  if (name == "goto") return PhaseKind::goto_goal;
  if (name == "velocity") return PhaseKind::velocity;
  if (name == "wiggle") return PhaseKind::wiggle;
  throw ConfigError(path + ": unknown behavior '" + name + "'");
}

// Typed accessors over one JSON object; finish() rejects unconsumed keys.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  const json* get(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const char* key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(child(key) + ": expected a number");
    return v->get<double>();
  }

  int integer(const char* key, int fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer())
      throw ConfigError(child(key) + ": expected an integer");
    return v->get<int>();
  }

  std::uint64_t unsigned64(const char* key, std::uint64_t fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!(v->is_number_unsigned() ||
          (v->is_number_integer() && v->get<std::int64_t>() >= 0)))
      throw ConfigError(child(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const char* key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(child(key) + ": expected a bool");
    return v->get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(child(key) + ": expected a string");
    return v->get<std::string>();
  }

  const json* array(const char* key) {
    const json* v = get(key);
    if (!v) return nullptr;
    if (!v->is_array()) throw ConfigError(child(key) + ": expected an array");
    return v;
  }

  std::string child(const char* key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw ConfigError(path_ + ": unknown field '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Pose2 parse_pose(const json& j, const std::string& path) {
  Fields f(j, path);
  Pose2 p;
  p.position.x = f.number("x_m", 0.0);
  p.position.y = f.number("y_m", 0.0);
  p.heading = f.number("theta_rad", 0.0);
  f.finish();
  return p;
}

void parse_footprint(const json& j, const std::string& path,
                     RobotFootprint& fp) {
  Fields f(j, path);
  fp.half_width = f.number("half_width_m", fp.half_width);
  fp.half_depth = f.number("half_depth_m", fp.half_depth);
  fp.anchor_length = f.number("anchor_length_m", fp.anchor_length);
  fp.seat_recess = f.number("seat_recess_m", fp.seat_recess);
  fp.mouth_halfwidth = f.number("mouth_halfwidth_m", fp.mouth_halfwidth);
  fp.mouth_max_angle = f.number("mouth_max_angle_rad", fp.mouth_max_angle);
  f.finish();
}

void parse_limits(const json& j, const std::string& path, ActuationLimits& l) {
  Fields f(j, path);
  l.v_max = f.number("v_max_mps", l.v_max);
  l.w_max = f.number("w_max_radps", l.w_max);
  l.vdot_max = f.number("vdot_max_mps2", l.vdot_max);
  l.wdot_max = f.number("wdot_max_radps2", l.wdot_max);
  l.butterfly_ratio = f.number("butterfly_ratio", l.butterfly_ratio);
  l.butterfly_printed_form =
      f.boolean("butterfly_printed_form", l.butterfly_printed_form);
  f.finish();
}

std::vector<ForceProfile::Knot> parse_knots(const json& j,
                                            const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array");
  std::vector<ForceProfile::Knot> knots;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& k = j[i];
    const std::string kp = path + "[" + std::to_string(i) + "]";
    if (!k.is_array() || k.size() != 2 || !k[0].is_number() ||
        !k[1].is_number())
      throw ConfigError(kp + ": expected [displacement_mm, force_n]");
    knots.emplace_back(k[0].get<double>() * 1e-3, k[1].get<double>());
  }
  return knots;
}

void parse_profile(const json& j, const std::string& path, ForceProfile& p) {
  Fields f(j, path);
  if (const json* v = f.get("forward_mm_n"))
    p.forward = parse_knots(*v, f.child("forward_mm_n"));
  if (const json* v = f.get("backward_mm_n"))
    p.backward = parse_knots(*v, f.child("backward_mm_n"));
  p.pullout_displacement =
      f.number("pullout_mm", p.pullout_displacement * 1e3) * 1e-3;
  p.slip_displacement = f.number("slip_mm", p.slip_displacement * 1e3) * 1e-3;
  p.hold_load_kg = f.number("hold_kg", p.hold_load_kg);
  f.finish();
}

void parse_anchor(const json& j, const std::string& path, AnchorParams& a) {
  Fields f(j, path);
  a.joint_travel = f.number("joint_travel_m", a.joint_travel);
  a.yaw_limit = f.number("yaw_limit_rad", a.yaw_limit);
  a.yaw_release_threshold =
      f.number("yaw_release_threshold_rad", a.yaw_release_threshold);
  a.yaw_window_s = f.number("yaw_window_s", a.yaw_window_s);
  a.push_force_max = f.number("push_force_max_n", a.push_force_max);
  a.force_speed_ref = f.number("force_speed_ref_mps", a.force_speed_ref);
  if (const json* v = f.get("profile"))
    parse_profile(*v, f.child("profile"), a.profile);
  f.finish();
}

void parse_wiggle(const json& j, const std::string& path, WiggleParams& w) {
  Fields f(j, path);
  w.v_bias = f.number("v_bias_mps", w.v_bias);
  w.w_amplitude = f.number("w_amplitude_radps", w.w_amplitude);
  w.angular_frequency =
      f.number("angular_frequency_radps", w.angular_frequency);
  f.finish();
}

void parse_weights(const json& j, const std::string& path, CostWeights& w) {
  Fields f(j, path);
  w.w_px = f.number("w_px", w.w_px);
  w.w_py = f.number("w_py", w.w_py);
  w.w_theta = f.number("w_theta", w.w_theta);
  w.w_gx = f.number("w_gx", w.w_gx);
  w.w_gy = f.number("w_gy", w.w_gy);
  w.w_vv = f.number("w_vv", w.w_vv);
  w.w_vw = f.number("w_vw", w.w_vw);
  w.w_final = f.number("w_final", w.w_final);
  w.w_stage = f.number("w_stage", w.w_stage);
  w.w_connected = f.number("w_connected", w.w_connected);
  w.w_smooth = f.number("w_smooth", w.w_smooth);
  w.w_butterfly = f.number("w_butterfly", w.w_butterfly);
  w.tan_cap = f.number("tan_cap", w.tan_cap);
  f.finish();
}

void parse_controller(const json& j, const std::string& path,
                      ControllerConfig& c) {
  Fields f(j, path);
  c.mpc.horizon = f.integer("horizon", c.mpc.horizon);
  c.mpc.constraint_horizon =
      f.integer("constraint_horizon", c.mpc.constraint_horizon);
  c.mpc.dt = f.number("dt_s", c.mpc.dt);
  c.mpc.epsilon = f.number("epsilon_m", c.mpc.epsilon);
  c.mpc.kkt_tol = f.number("kkt_tol", c.mpc.kkt_tol);
  c.mpc.feas_tol = f.number("feasibility_tol", c.mpc.feas_tol);
  c.mpc.max_iterations = f.integer("max_iterations", c.mpc.max_iterations);
  if (const json* v = f.get("weights"))
    parse_weights(*v, f.child("weights"), c.mpc.weights);
  c.softstart_solves = f.integer("softstart_solves", c.softstart_solves);
  c.softstart_cap = f.number("softstart_cap_m", c.softstart_cap);
  c.failsafe_decay = f.number("failsafe_decay", c.failsafe_decay);
  c.failsafe_limit = f.integer("failsafe_limit", c.failsafe_limit);
  f.finish();
}

void parse_contact(const json& j, const std::string& path, ContactConfig& c) {
  Fields f(j, path);
  c.slit_halfwidth_m = f.number("slit_halfwidth_m", c.slit_halfwidth_m);
  c.capture_depth_m = f.number("capture_depth_m", c.capture_depth_m);
  c.lateral_play_m = f.number("lateral_play_m", c.lateral_play_m);
  c.contact_slop_m = f.number("contact_slop_m", c.contact_slop_m);
  c.bend_jam_rad = f.number("bend_jam_rad", c.bend_jam_rad);
  c.jam_depth_m = f.number("jam_depth_m", c.jam_depth_m);
  f.finish();
}

void parse_target(const json& j, const std::string& path, TargetConfig& t) {
  Fields f(j, path);
  if (const json* v = f.array("slots")) {
    t.slots.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      t.slots.push_back(
          parse_pose((*v)[i], f.child("slots") + "[" + std::to_string(i) + "]"));
  }
  if (const json* v = f.array("pairs")) {
    t.pairs.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string pp = f.child("pairs") + "[" + std::to_string(i) + "]";
      Fields pf((*v)[i], pp);
      TargetConfig::SlotPair sp;
      sp.slot_a = pf.integer("slot_a", 0);
      sp.face_a = face_from_name(pf.text("face_a", "back"), pf.child("face_a"));
      sp.slot_b = pf.integer("slot_b", 0);
      sp.face_b = face_from_name(pf.text("face_b", "front"), pf.child("face_b"));
      pf.finish();
      t.pairs.push_back(sp);
    }
  }
  f.finish();
}

PhaseSpec parse_phase(const json& j, const std::string& path) {
  Fields f(j, path);
  PhaseSpec phase;
  phase.kind = phase_from_name(f.text("behavior", "align"), f.child("behavior"));
  phase.duration_s = f.number("duration_s", phase.duration_s);
  switch (phase.kind) {
    case PhaseKind::align:
      phase.stop_when_connected =
          f.boolean("stop_when_connected", phase.stop_when_connected);
      break;
    case PhaseKind::goto_goal: {
      const json* v = f.array("goals");
      if (!v) throw ConfigError(f.child("goals") + ": required for goto");
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string gp = f.child("goals") + "[" + std::to_string(i) + "]";
        Fields gf((*v)[i], gp);
        Point2 g{gf.number("x_m", 0.0), gf.number("y_m", 0.0)};
        gf.finish();
        phase.goals.push_back(g);
      }
      break;
    }
    case PhaseKind::velocity: {
      const json* v = f.array("commands");
      if (!v) throw ConfigError(f.child("commands") + ": required for velocity");
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string cp =
            f.child("commands") + "[" + std::to_string(i) + "]";
        Fields cf((*v)[i], cp);
        VelocityCommand cmd{cf.number("v_mps", 0.0), cf.number("w_radps", 0.0)};
        cf.finish();
        phase.commands.push_back(cmd);
      }
      break;
    }
    case PhaseKind::wiggle: {
      const json* v = f.array("robots");
      if (!v) throw ConfigError(f.child("robots") + ": required for wiggle");
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number_integer())
          throw ConfigError(f.child("robots") + "[" + std::to_string(i) +
                            "]: expected an integer");
        phase.wiggle_robots.push_back((*v)[i].get<int>());
      }
      phase.stop_when_decoupled =
          f.boolean("stop_when_decoupled", phase.stop_when_decoupled);
      break;
    }
  }
  f.finish();
  return phase;
}

json pose_json(const Pose2& p) {
  return {{"x_m", p.position.x}, {"y_m", p.position.y}, {"theta_rad", p.heading}};
}

json knots_json(const std::vector<ForceProfile::Knot>& knots) {
  json arr = json::array();
  for (const auto& [d, f] : knots) arr.push_back({d * 1e3, f});
  return arr;
}

}  // namespace

const char* to_string(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::align: return "align";
    case PhaseKind::goto_goal: return "goto";
    case PhaseKind::velocity: return "velocity";
    case PhaseKind::wiggle: return "wiggle";
  }
  return "?";
}

void ContactConfig::validate() const {
  if (!(slit_halfwidth_m > 0.0))
    throw std::invalid_argument("slit_halfwidth_m must be positive");
  if (!(capture_depth_m > 0.0))
    throw std::invalid_argument("capture_depth_m must be positive");
  if (lateral_play_m < 0.0)
    throw std::invalid_argument("lateral_play_m must be >= 0");
  if (contact_slop_m < 0.0)
    throw std::invalid_argument("contact_slop_m must be >= 0");
  if (!(bend_jam_rad > 0.0))
    throw std::invalid_argument("bend_jam_rad must be positive");
  if (!(jam_depth_m > 0.0))
    throw std::invalid_argument("jam_depth_m must be positive");
}

void ScenarioConfig::validate() const {
  if (robots.empty()) throw std::invalid_argument("scenario needs robots");
  if (!(sim_dt_s > 0.0) || !(control_dt_s > 0.0))
    throw std::invalid_argument("time steps must be positive");
  const double ratio = control_dt_s / sim_dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
    throw std::invalid_argument(
        "control_dt_s must be an integer multiple of sim_dt_s");
  footprint.validate();
  limits.validate();
  anchor.validate();
  wiggle.validate();
  controller.validate();
  contact.validate();
  if (contact.slit_halfwidth_m > footprint.mouth_halfwidth)
    throw std::invalid_argument("slit_halfwidth_m exceeds mouth_halfwidth_m");
  if (!target.slots.empty()) {
    target.validate();
    if (target.slots.size() > robots.size())
      throw std::invalid_argument("more target slots than robots");
  }
  for (int idx : preconnected) {
    if (idx < 0 || idx >= static_cast<int>(target.pairs.size()))
      throw std::invalid_argument("preconnected index out of range");
  }
  for (std::size_t i = 0; i < preconnected.size(); ++i)
    for (std::size_t j = i + 1; j < preconnected.size(); ++j)
      if (preconnected[i] == preconnected[j])
        throw std::invalid_argument("duplicate preconnected index");
  for (const PhaseSpec& phase : schedule) {
    if (!(phase.duration_s > 0.0))
      throw std::invalid_argument("phase duration_s must be positive");
    switch (phase.kind) {
      case PhaseKind::align:
        if (target.slots.empty())
          throw std::invalid_argument("align phase needs a target");
        break;
      case PhaseKind::goto_goal:
        if (phase.goals.size() != robots.size())
          throw std::invalid_argument("goto needs one goal per robot");
        break;
      case PhaseKind::velocity:
        if (phase.commands.size() != robots.size())
          throw std::invalid_argument("velocity needs one command per robot");
        break;
      case PhaseKind::wiggle:
        if (phase.wiggle_robots.empty())
          throw std::invalid_argument("wiggle needs at least one robot");
        for (int r : phase.wiggle_robots)
          if (r < 0 || r >= static_cast<int>(robots.size()))
            throw std::invalid_argument("wiggle robot index out of range");
        break;
    }
  }
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.robots = {Pose2{{0.0, 0.0}, 0.0}, Pose2{{-0.065, 0.0}, 0.0}};
  cfg.target.slots = {Pose2{{0.0, 0.0}, 0.0}, Pose2{{-0.045, 0.0}, 0.0}};
  cfg.target.pairs = {{0, Face::back, 1, Face::front}};
  PhaseSpec align;
  align.kind = PhaseKind::align;
  align.duration_s = 60.0;
  align.stop_when_connected = true;
  cfg.schedule = {align};
  return cfg;
}

ScenarioConfig default_decouple_scenario() {
  ScenarioConfig cfg;
  cfg.robots = {Pose2{{0.0, 0.0}, 0.0}, Pose2{{-0.045, 0.0}, 0.0}};
  cfg.target.slots = cfg.robots;
  cfg.target.pairs = {{0, Face::back, 1, Face::front}};
  cfg.preconnected = {0};
  PhaseSpec wig;
  wig.kind = PhaseKind::wiggle;
  wig.duration_s = 30.0;
  wig.wiggle_robots = {0};
  wig.stop_when_decoupled = true;
  cfg.schedule = {wig};
  return cfg;
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ScenarioConfig cfg;
  Fields f(root, "config");
  cfg.seed = f.unsigned64("seed", cfg.seed);
  cfg.sim_dt_s = f.number("sim_dt_s", cfg.sim_dt_s);
  cfg.control_dt_s = f.number("control_dt_s", cfg.control_dt_s);
  const json* robots = f.array("robots");
  if (!robots) throw ConfigError("config.robots: required");
  for (std::size_t i = 0; i < robots->size(); ++i)
    cfg.robots.push_back(
        parse_pose((*robots)[i], "config.robots[" + std::to_string(i) + "]"));
  if (const json* v = f.get("footprint"))
    parse_footprint(*v, f.child("footprint"), cfg.footprint);
  if (const json* v = f.get("limits"))
    parse_limits(*v, f.child("limits"), cfg.limits);
  if (const json* v = f.get("anchor"))
    parse_anchor(*v, f.child("anchor"), cfg.anchor);
  if (const json* v = f.get("wiggle"))
    parse_wiggle(*v, f.child("wiggle"), cfg.wiggle);
  if (const json* v = f.get("controller"))
    parse_controller(*v, f.child("controller"), cfg.controller);
  if (const json* v = f.get("contact"))
    parse_contact(*v, f.child("contact"), cfg.contact);
  if (const json* v = f.get("target"))
    parse_target(*v, f.child("target"), cfg.target);
  if (const json* v = f.array("preconnected")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer())
        throw ConfigError("config.preconnected[" + std::to_string(i) +
                          "]: expected an integer");
      cfg.preconnected.push_back((*v)[i].get<int>());
    }
  }
  if (const json* v = f.array("schedule")) {
    for (std::size_t i = 0; i < v->size(); ++i)
      cfg.schedule.push_back(
          parse_phase((*v)[i], "config.schedule[" + std::to_string(i) + "]"));
  }
  f.finish();
  // The planner's actuation model always matches the world's.
  cfg.controller.mpc.limits = cfg.limits;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["sim_dt_s"] = cfg.sim_dt_s;
  j["control_dt_s"] = cfg.control_dt_s;
  j["robots"] = json::array();
  for (const Pose2& p : cfg.robots) j["robots"].push_back(pose_json(p));
  j["footprint"] = {{"half_width_m", cfg.footprint.half_width},
                    {"half_depth_m", cfg.footprint.half_depth},
                    {"anchor_length_m", cfg.footprint.anchor_length},
                    {"seat_recess_m", cfg.footprint.seat_recess},
                    {"mouth_halfwidth_m", cfg.footprint.mouth_halfwidth},
                    {"mouth_max_angle_rad", cfg.footprint.mouth_max_angle}};
  j["limits"] = {{"v_max_mps", cfg.limits.v_max},
                 {"w_max_radps", cfg.limits.w_max},
                 {"vdot_max_mps2", cfg.limits.vdot_max},
                 {"wdot_max_radps2", cfg.limits.wdot_max},
                 {"butterfly_ratio", cfg.limits.butterfly_ratio},
                 {"butterfly_printed_form", cfg.limits.butterfly_printed_form}};
  j["anchor"] = {
      {"joint_travel_m", cfg.anchor.joint_travel},
      {"yaw_limit_rad", cfg.anchor.yaw_limit},
      {"yaw_release_threshold_rad", cfg.anchor.yaw_release_threshold},
      {"yaw_window_s", cfg.anchor.yaw_window_s},
      {"push_force_max_n", cfg.anchor.push_force_max},
      {"force_speed_ref_mps", cfg.anchor.force_speed_ref},
      {"profile",
       {{"forward_mm_n", knots_json(cfg.anchor.profile.forward)},
        {"backward_mm_n", knots_json(cfg.anchor.profile.backward)},
        {"pullout_mm", cfg.anchor.profile.pullout_displacement * 1e3},
        {"slip_mm", cfg.anchor.profile.slip_displacement * 1e3},
        {"hold_kg", cfg.anchor.profile.hold_load_kg}}}};
  j["wiggle"] = {{"v_bias_mps", cfg.wiggle.v_bias},
                 {"w_amplitude_radps", cfg.wiggle.w_amplitude},
                 {"angular_frequency_radps", cfg.wiggle.angular_frequency}};
  const MpcConfig& m = cfg.controller.mpc;
  j["controller"] = {{"horizon", m.horizon},
                     {"constraint_horizon", m.constraint_horizon},
                     {"dt_s", m.dt},
                     {"epsilon_m", m.epsilon},
                     {"kkt_tol", m.kkt_tol},
                     {"feasibility_tol", m.feas_tol},
                     {"max_iterations", m.max_iterations},
                     {"weights",
                      {{"w_px", m.weights.w_px},
                       {"w_py", m.weights.w_py},
                       {"w_theta", m.weights.w_theta},
                       {"w_gx", m.weights.w_gx},
                       {"w_gy", m.weights.w_gy},
                       {"w_vv", m.weights.w_vv},
                       {"w_vw", m.weights.w_vw},
                       {"w_final", m.weights.w_final},
                       {"w_stage", m.weights.w_stage},
                       {"w_connected", m.weights.w_connected},
                       {"w_smooth", m.weights.w_smooth},
                       {"w_butterfly", m.weights.w_butterfly},
                       {"tan_cap", m.weights.tan_cap}}},
                     {"softstart_solves", cfg.controller.softstart_solves},
                     {"softstart_cap_m", cfg.controller.softstart_cap},
                     {"failsafe_decay", cfg.controller.failsafe_decay},
                     {"failsafe_limit", cfg.controller.failsafe_limit}};
  j["contact"] = {{"slit_halfwidth_m", cfg.contact.slit_halfwidth_m},
                  {"capture_depth_m", cfg.contact.capture_depth_m},
                  {"lateral_play_m", cfg.contact.lateral_play_m},
                  {"contact_slop_m", cfg.contact.contact_slop_m},
                  {"bend_jam_rad", cfg.contact.bend_jam_rad},
                  {"jam_depth_m", cfg.contact.jam_depth_m}};
  json slots = json::array();
  for (const Pose2& p : cfg.target.slots) slots.push_back(pose_json(p));
  json tpairs = json::array();
  for (const auto& sp : cfg.target.pairs)
    tpairs.push_back({{"slot_a", sp.slot_a},
                      {"face_a", face_name(sp.face_a)},
                      {"slot_b", sp.slot_b},
                      {"face_b", face_name(sp.face_b)}});
  j["target"] = {{"slots", slots}, {"pairs", tpairs}};
  j["preconnected"] = cfg.preconnected;
  json schedule = json::array();
  for (const PhaseSpec& phase : cfg.schedule) {
    json p{{"behavior", to_string(phase.kind)},
           {"duration_s", phase.duration_s}};
    switch (phase.kind) {
      case PhaseKind::align:
        p["stop_when_connected"] = phase.stop_when_connected;
        break;
      case PhaseKind::goto_goal: {
        json goals = json::array();
        for (const Point2& g : phase.goals)
          goals.push_back({{"x_m", g.x}, {"y_m", g.y}});
        p["goals"] = goals;
        break;
      }
      case PhaseKind::velocity: {
        json cmds = json::array();
        for (const VelocityCommand& c : phase.commands)
          cmds.push_back({{"v_mps", c.v}, {"w_radps", c.w}});
        p["commands"] = cmds;
        break;
      }
      case PhaseKind::wiggle:
        p["robots"] = phase.wiggle_robots;
        p["stop_when_decoupled"] = phase.stop_when_decoupled;
        break;
    }
    schedule.push_back(p);
  }
  j["schedule"] = schedule;
  return j.dump();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  return fnv1a64(serialize_scenario(cfg));
}

}  // namespace flexcouple
