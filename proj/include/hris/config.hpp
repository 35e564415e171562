#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hris/agent.hpp"
#include "hris/env.hpp"
#include "hris/error.hpp"
#include "hris/units.hpp"

namespace hris {

using Json = nlohmann::json;

/// Scenario as written in a config file. Powers are kept in the units the file uses (dBm or W)
/// and converted to SI once by make_env_config().
struct ScenarioConfig {
  int users = 2;
  int ris_elements = 20;
  int ehs_elements = 20;
  Vec3 bs_pos{20.0, 0.0, 0.0};
  Vec3 ris_pos{5.0, 3.0, 0.0};
  Vec3 ehs_pos{5.0, 3.0, 5.0};
  Vec3 es_pos{5.0, -2.0, 5.0};
  Vec3 ris_axis{0.0, 1.0, 0.0};
  Vec3 ehs_axis{0.0, 1.0, 0.0};
  Vec3 user_center{0.0, 0.0, 0.0};
  double user_radius = 0.5;
  bool random_user_angles = false;
  LinkSet links;
  double noise_bs_dbm = -80.0;
  double noise_ris_dbm = -70.0;
  double p_circuit_dbm = -10.0;
  double p_amp_dc_dbm = -5.0;
  double p_rf_dc_w = 2.1e-6;
  double xi = 1.1;
  double eta_eh = 0.8;
  double p_es_dbm = 38.0;
  double frame_s = 1.0;
  double q_min = 5.0;
  double p_max_w = 0.1;
  double rho_max = 100.0;
  double e_ref_j = 1e-3;
  double kappa = 100.0;
  Scheme scheme = Scheme::hybrid;
  StateLayout state_layout = StateLayout::per_element;
  bool no_ris_without_ehs = false;
};

struct TrainSettings {
  PpoConfig ppo;
  int checkpoint_interval = 20;  ///< iterations between checkpoints; 0 writes only the final one
};

enum class SweepAxis { es_power, n_elements, ris_distance, q_min };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::es_power: return "es_power";
    case SweepAxis::n_elements: return "n_elements";
    case SweepAxis::ris_distance: return "ris_distance";
    case SweepAxis::q_min: return "q_min";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  for (SweepAxis a : {SweepAxis::es_power, SweepAxis::n_elements, SweepAxis::ris_distance,
                      SweepAxis::q_min}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown sweep axis '" + s + "'");
}

inline std::vector<double> default_axis_values(SweepAxis a) {
  switch (a) {
    case SweepAxis::es_power: return {30, 35, 40, 45, 50};
    case SweepAxis::n_elements: return {4, 8, 12, 16, 20};
    case SweepAxis::ris_distance: return {0, 2, 4, 6, 8, 10};
    case SweepAxis::q_min: return {2, 3, 4, 5, 6};
  }
  return {};
}

struct SweepSettings {
  SweepAxis axis = SweepAxis::es_power;
  std::vector<double> values;  ///< empty: axis defaults
  std::vector<Scheme> schemes{Scheme::hybrid, Scheme::no_ris};
  bool train_fresh = true;     ///< false: load checkpoints from checkpoint_dir
  std::string checkpoint_dir;
};

struct EvalSettings {
  int draws = 100;
  bool uniform_rho_oracle = true;
  std::vector<Scheme> oracle_schemes{Scheme::hybrid, Scheme::active_passive, Scheme::active,
                                     Scheme::passive, Scheme::no_ris};
};

struct SeedSettings {
  std::vector<std::uint64_t> train{1, 2, 3, 4, 5};
  std::uint64_t eval = 20240101;
};

struct ExperimentConfig {
  ScenarioConfig env;
  TrainSettings train;
  SweepSettings sweep;
  EvalSettings eval;
  SeedSettings seeds;
  std::string output_dir = "out";
};

// ---------------------------------------------------------------------------------------------
// JSON mapping

namespace detail {

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 json_vec3(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(key + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json link_json(const LinkParams& l) {
  return {{"ref_loss_db", l.ref_loss_db},
          {"exponent", l.exponent},
          {"rician_k", l.rician_k},
          {"spacing_ratio", l.spacing_ratio}};
}

inline LinkParams json_link(const Json& j) {
  LinkParams l;
  l.ref_loss_db = j.at("ref_loss_db").get<double>();
  l.exponent = j.at("exponent").get<double>();
  l.rician_k = j.at("rician_k").get<double>();
  l.spacing_ratio = j.at("spacing_ratio").get<double>();
  return l;
}

inline Json schemes_json(const std::vector<Scheme>& v) {
  Json a = Json::array();
  for (Scheme s : v) a.push_back(to_string(s));
  return a;
}

inline std::vector<Scheme> json_schemes(const Json& j) {
  std::vector<Scheme> v;
  for (const auto& s : j) v.push_back(parse_scheme(s.get<std::string>()));
  return v;
}

/// Overlays `user` onto `base`; every user key must exist in base. Arrays replace wholesale.
inline void merge_strict(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  const ScenarioConfig& e = c.env;
  Json env = {
      {"users", e.users},
      {"ris_elements", e.ris_elements},
      {"ehs_elements", e.ehs_elements},
      {"bs_pos", detail::vec3_json(e.bs_pos)},
      {"ris_pos", detail::vec3_json(e.ris_pos)},
      {"ehs_pos", detail::vec3_json(e.ehs_pos)},
      {"es_pos", detail::vec3_json(e.es_pos)},
      {"ris_axis", detail::vec3_json(e.ris_axis)},
      {"ehs_axis", detail::vec3_json(e.ehs_axis)},
      {"user_center", detail::vec3_json(e.user_center)},
      {"user_radius", e.user_radius},
      {"random_user_angles", e.random_user_angles},
      {"links",
       {{"ub", detail::link_json(e.links.ub)},
        {"ur", detail::link_json(e.links.ur)},
        {"rb", detail::link_json(e.links.rb)},
        {"es", detail::link_json(e.links.es)}}},
      {"noise_bs_dbm", e.noise_bs_dbm},
      {"noise_ris_dbm", e.noise_ris_dbm},
      {"p_circuit_dbm", e.p_circuit_dbm},
      {"p_amp_dc_dbm", e.p_amp_dc_dbm},
      {"p_rf_dc_w", e.p_rf_dc_w},
      {"xi", e.xi},
      {"eta_eh", e.eta_eh},
      {"p_es_dbm", e.p_es_dbm},
      {"frame_s", e.frame_s},
      {"q_min", e.q_min},
      {"p_max_w", e.p_max_w},
      {"rho_max", e.rho_max},
      {"e_ref_j", e.e_ref_j},
      {"kappa", e.kappa},
      {"scheme", to_string(e.scheme)},
      {"state_layout", to_string(e.state_layout)},
      {"no_ris_without_ehs", e.no_ris_without_ehs},
  };
  const PpoConfig& p = c.train.ppo;
  Json ppo = {
      {"lr_actor", p.lr_actor},
      {"lr_critic", p.lr_critic},
      {"clip_eps", p.clip_eps},
      {"gamma", p.gamma},
      {"gae_lambda", p.gae_lambda},
      {"entropy_coef", p.entropy_coef},
      {"buffer", p.buffer},
      {"minibatch", p.minibatch},
      {"epochs", p.epochs},
      {"hidden", p.hidden},
      {"iterations", p.iterations},
      {"normalize_advantages", p.normalize_advantages},
      {"optimizer", to_string(p.optimizer)},
      {"checkpoint_interval", c.train.checkpoint_interval},
  };
  Json sweep = {
      {"axis", to_string(c.sweep.axis)},
      {"values", c.sweep.values},
      {"schemes", detail::schemes_json(c.sweep.schemes)},
      {"train_fresh", c.sweep.train_fresh},
      {"checkpoint_dir", c.sweep.checkpoint_dir},
  };
  Json eval = {
      {"draws", c.eval.draws},
      {"uniform_rho_oracle", c.eval.uniform_rho_oracle},
      {"oracle_schemes", detail::schemes_json(c.eval.oracle_schemes)},
  };
  Json seeds = {{"train", c.seeds.train}, {"eval", c.seeds.eval}};
  return {{"env", env}, {"ppo", ppo}, {"sweep", sweep}, {"eval", eval}, {"seeds", seeds},
          {"output_dir", c.output_dir}};
}

inline void validate_experiment(const ExperimentConfig& c);

/// Reads a complete document (as produced by to_json) into a config. Throws ConfigError.
inline ExperimentConfig from_json(const Json& j) {
  ExperimentConfig c;
  try {
    const Json& e = j.at("env");
    ScenarioConfig& s = c.env;
    s.users = e.at("users").get<int>();
    s.ris_elements = e.at("ris_elements").get<int>();
    s.ehs_elements = e.at("ehs_elements").get<int>();
    s.bs_pos = detail::json_vec3(e.at("bs_pos"), "env.bs_pos");
    s.ris_pos = detail::json_vec3(e.at("ris_pos"), "env.ris_pos");
    s.ehs_pos = detail::json_vec3(e.at("ehs_pos"), "env.ehs_pos");
    s.es_pos = detail::json_vec3(e.at("es_pos"), "env.es_pos");
    s.ris_axis = detail::json_vec3(e.at("ris_axis"), "env.ris_axis");
    s.ehs_axis = detail::json_vec3(e.at("ehs_axis"), "env.ehs_axis");
    s.user_center = detail::json_vec3(e.at("user_center"), "env.user_center");
    s.user_radius = e.at("user_radius").get<double>();
    s.random_user_angles = e.at("random_user_angles").get<bool>();
    const Json& l = e.at("links");
    s.links.ub = detail::json_link(l.at("ub"));
    s.links.ur = detail::json_link(l.at("ur"));
    s.links.rb = detail::json_link(l.at("rb"));
    s.links.es = detail::json_link(l.at("es"));
    s.noise_bs_dbm = e.at("noise_bs_dbm").get<double>();
    s.noise_ris_dbm = e.at("noise_ris_dbm").get<double>();
    s.p_circuit_dbm = e.at("p_circuit_dbm").get<double>();
    s.p_amp_dc_dbm = e.at("p_amp_dc_dbm").get<double>();
    s.p_rf_dc_w = e.at("p_rf_dc_w").get<double>();
    s.xi = e.at("xi").get<double>();
    s.eta_eh = e.at("eta_eh").get<double>();
    s.p_es_dbm = e.at("p_es_dbm").get<double>();
    s.frame_s = e.at("frame_s").get<double>();
    s.q_min = e.at("q_min").get<double>();
    s.p_max_w = e.at("p_max_w").get<double>();
    s.rho_max = e.at("rho_max").get<double>();
    s.e_ref_j = e.at("e_ref_j").get<double>();
    s.kappa = e.at("kappa").get<double>();
    s.scheme = parse_scheme(e.at("scheme").get<std::string>());
    s.state_layout = parse_state_layout(e.at("state_layout").get<std::string>());
    s.no_ris_without_ehs = e.at("no_ris_without_ehs").get<bool>();

    const Json& p = j.at("ppo");
    PpoConfig& q = c.train.ppo;
    q.lr_actor = p.at("lr_actor").get<double>();
    q.lr_critic = p.at("lr_critic").get<double>();
    q.clip_eps = p.at("clip_eps").get<double>();
    q.gamma = p.at("gamma").get<double>();
    q.gae_lambda = p.at("gae_lambda").get<double>();
    q.entropy_coef = p.at("entropy_coef").get<double>();
    q.buffer = p.at("buffer").get<int>();
    q.minibatch = p.at("minibatch").get<int>();
    q.epochs = p.at("epochs").get<int>();
    q.hidden = p.at("hidden").get<int>();
    q.iterations = p.at("iterations").get<int>();
    q.normalize_advantages = p.at("normalize_advantages").get<bool>();
    q.optimizer = parse_optimizer(p.at("optimizer").get<std::string>());
    c.train.checkpoint_interval = p.at("checkpoint_interval").get<int>();

    const Json& w = j.at("sweep");
    c.sweep.axis = parse_axis(w.at("axis").get<std::string>());
    c.sweep.values = w.at("values").get<std::vector<double>>();
    c.sweep.schemes = detail::json_schemes(w.at("schemes"));
    c.sweep.train_fresh = w.at("train_fresh").get<bool>();
    c.sweep.checkpoint_dir = w.at("checkpoint_dir").get<std::string>();

    const Json& v = j.at("eval");
    c.eval.draws = v.at("draws").get<int>();
    c.eval.uniform_rho_oracle = v.at("uniform_rho_oracle").get<bool>();
    c.eval.oracle_schemes = detail::json_schemes(v.at("oracle_schemes"));

    const Json& sd = j.at("seeds");
    c.seeds.train = sd.at("train").get<std::vector<std::uint64_t>>();
    c.seeds.eval = sd.at("eval").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  } catch (const InputError& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  validate_experiment(c);
  return c;
}

/// Defaults overlaid with a (possibly partial) user document.
inline ExperimentConfig config_from_json(const Json& user) {
  Json merged = to_json(ExperimentConfig{});
  detail::merge_strict(merged, user, "");
  return from_json(merged);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json user;
  try {
    user = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("config '" + path + "': " + ex.what());
  }
  return config_from_json(user);
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json(a) == to_json(b);
}

// ---------------------------------------------------------------------------------------------
// Derived objects

inline EnvConfig make_env_config(const ScenarioConfig& s) {
  EnvConfig c;
  Geometry& g = c.geometry;
  g.bs_pos = s.bs_pos;
  g.ris_pos = s.ris_pos;
  g.ehs_pos = s.ehs_pos;
  g.es_pos = s.es_pos;
  g.ris_axis = s.ris_axis;
  g.ehs_axis = s.ehs_axis;
  g.ris_elements = s.ris_elements;
  g.ehs_elements = s.ehs_elements;
  g.user_pos = place_users_equal(s.users, s.user_center, s.user_radius);
  c.links = s.links;
  SystemParams& p = c.sys;
  p.noise_bs = dbm_to_watt(s.noise_bs_dbm);
  p.noise_ris = dbm_to_watt(s.noise_ris_dbm);
  p.p_circuit = dbm_to_watt(s.p_circuit_dbm);
  p.p_amp_dc = dbm_to_watt(s.p_amp_dc_dbm);
  p.p_rf_dc = s.p_rf_dc_w;
  p.xi = s.xi;
  p.eta_eh = s.eta_eh;
  p.p_es = dbm_to_watt(s.p_es_dbm);
  p.frame = s.frame_s;
  p.q_min = s.q_min;
  p.p_max = s.p_max_w;
  p.rho_max = s.rho_max;
  c.e_ref = s.e_ref_j;
  c.kappa = s.kappa;
  c.scheme = s.scheme;
  c.state_layout = s.state_layout;
  c.no_ris_without_ehs = s.no_ris_without_ehs;
  c.random_user_angles = s.random_user_angles;
  c.user_center = s.user_center;
  c.user_radius = s.user_radius;
  return c;
}

inline void validate_experiment(const ExperimentConfig& c) {
  const ScenarioConfig& s = c.env;
  if (s.users < 1) throw ConfigError("env.users must be >= 1");
  if (s.ris_elements < 1 || s.ehs_elements < 1) throw ConfigError("env: element counts must be >= 1");
  if (!(s.user_radius >= 0.0)) throw ConfigError("env.user_radius must be >= 0");
  const PpoConfig& p = c.train.ppo;
  if (p.buffer < 1 || p.minibatch < 1 || p.epochs < 1 || p.hidden < 1 || p.iterations < 0) {
    throw ConfigError("ppo: buffer, minibatch, epochs, hidden must be >= 1 and iterations >= 0");
  }
  if (!(p.lr_actor > 0.0) || !(p.lr_critic > 0.0)) throw ConfigError("ppo: learning rates must be > 0");
  if (!(p.clip_eps > 0.0)) throw ConfigError("ppo.clip_eps must be > 0");
  if (!(p.gamma >= 0.0 && p.gamma <= 1.0) || !(p.gae_lambda >= 0.0 && p.gae_lambda <= 1.0)) {
    throw ConfigError("ppo: gamma and gae_lambda must lie in [0, 1]");
  }
  if (!(p.entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef must be >= 0");
  if (c.train.checkpoint_interval < 0) throw ConfigError("ppo.checkpoint_interval must be >= 0");
  if (c.eval.draws < 1) throw ConfigError("eval.draws must be >= 1");
  if (c.seeds.train.empty()) throw ConfigError("seeds.train must not be empty");
  if (c.sweep.schemes.empty()) throw ConfigError("sweep.schemes must not be empty");
  if (!c.sweep.train_fresh && c.sweep.checkpoint_dir.empty()) {
    throw ConfigError("sweep.checkpoint_dir is required when sweep.train_fresh is false");
  }
  if (c.sweep.axis == SweepAxis::n_elements) {
    for (double v : c.sweep.values) {
      if (v < 1 || v != static_cast<int>(v)) throw ConfigError("sweep: n_elements values must be integers >= 1");
    }
  }
  try {
    validate_env_config(make_env_config(s));
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("env: ") + ex.what());
  }
}

/// Applies one sweep-axis value to a scenario.
inline void apply_axis(ScenarioConfig& s, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::es_power: s.p_es_dbm = value; break;
    case SweepAxis::n_elements: s.ris_elements = static_cast<int>(value); break;
    case SweepAxis::ris_distance:
      s.ris_pos.x() = value;
      s.ehs_pos.x() = value;
      break;
    case SweepAxis::q_min: s.q_min = value; break;
  }
}

inline std::vector<double> sweep_values(const SweepSettings& s) {
  return s.values.empty() ? default_axis_values(s.axis) : s.values;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Identifies the scenario and network shape a checkpoint belongs to. Iteration count and
/// checkpoint cadence are excluded so a run can be extended.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  Json key = {{"env", j["env"]}, {"ppo", j["ppo"]}};
  key["ppo"].erase("iterations");
  key["ppo"].erase("checkpoint_interval");
  return fnv1a(key.dump());
}

}  // namespace hris
