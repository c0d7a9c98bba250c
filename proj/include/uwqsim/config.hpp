#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uwqsim/photonics.hpp"
#include "uwqsim/serialize.hpp"

namespace uwq {

/// Everything one orchestrated run needs: link realization, which of the
/// six canonical states to send, integration times, analyzer scan layout,
/// optional noise calibration and output routing.
struct ExperimentPlan {
  LinkConfig link;
  std::vector<StateLabel> states{StateLabel::H, StateLabel::V, StateLabel::D,
                                 StateLabel::A, StateLabel::R, StateLabel::L};
  double tomography_duration_s = 1.0;
  std::vector<double> scan_angles_rad;
  std::vector<StateLabel> scan_states{StateLabel::H, StateLabel::V,
                                      StateLabel::D, StateLabel::A};
  double scan_duration_s = 1.0;
  bool calibrate = false;
  double visibility_target = 0.0;
  std::string output_directory = "out";
  std::vector<std::string> formats{"json", "csv"};
  bool seed_provided = false;

  ExperimentPlan() {
    scan_angles_rad.reserve(13);
    for (int k = 0; k <= 12; ++k)
      scan_angles_rad.push_back(static_cast<double>(k) * M_PI / 12.0);
  }
};

inline void validate(const ExperimentPlan& plan) {
  validate(plan.link);
  if (plan.states.empty())
    throw ConfigError("states", "at least one state label is required");
  if (!plan.seed_provided)
    throw ConfigError("link.seed", "a seed is required (config or --seed)");
  if (plan.tomography_duration_s <= 0.0)
    throw ConfigError("tomography.duration_s", "must be > 0");
  if (plan.scan_duration_s <= 0.0)
    throw ConfigError("scan.duration_s", "must be > 0");
  if (!plan.scan_states.empty()) {
    CorrelationScan probe;
    for (double a : plan.scan_angles_rad) probe.points.push_back({a, 0.0});
    try {
      validate(probe);
    } catch (const InvalidInput& e) {
      throw ConfigError("scan.angles_rad", e.what());
    }
  }
  if (plan.formats.empty())
    throw ConfigError("output.formats", "at least one format is required");
  for (const std::string& f : plan.formats)
    if (f != "json" && f != "csv")
      throw ConfigError("output.formats", "unknown format '" + f + "'");
  if (plan.calibrate &&
      (plan.visibility_target <= 0.0 || plan.visibility_target >= 1.0))
    throw ConfigError("calibration.visibility_target", "must be in (0, 1)");
}

namespace detail {

inline void reject_unknown_keys(const ojson& obj,
                                std::initializer_list<const char*> known,
                                const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw ConfigError(path.empty() ? it.key() : path + "." + it.key(),
                        "unknown key");
  }
}

inline const ojson* child_object(const ojson& obj, const char* key,
                                 const std::string& path) {
  if (!obj.contains(key)) return nullptr;
  const ojson& v = obj[key];
  if (!v.is_object())
    throw ConfigError(path.empty() ? key : path + "." + key,
                      "must be an object");
  return &v;
}

inline void assign_number(const ojson& obj, const char* key,
                          const std::string& path, double& out) {
  if (!obj.contains(key)) return;
  const ojson& v = obj[key];
  if (!v.is_number())
    throw ConfigError(path + "." + key, "must be a number");
  out = v.get<double>();
}

inline void assign_bool(const ojson& obj, const char* key,
                        const std::string& path, bool& out) {
  if (!obj.contains(key)) return;
  const ojson& v = obj[key];
  if (!v.is_boolean())
    throw ConfigError(path + "." + key, "must be a boolean");
  out = v.get<bool>();
}

inline void assign_string(const ojson& obj, const char* key,
                          const std::string& path, std::string& out) {
  if (!obj.contains(key)) return;
  const ojson& v = obj[key];
  if (!v.is_string())
    throw ConfigError(path + "." + key, "must be a string");
  out = v.get<std::string>();
}

inline bool assign_seed(const ojson& obj, const char* key,
                        const std::string& path, std::uint64_t& out) {
  if (!obj.contains(key)) return false;
  const ojson& v = obj[key];
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(path + "." + key, "must be a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw ConfigError(path + "." + key, "must be a non-negative integer");
  out = v.get<std::uint64_t>();
  return true;
}

inline std::vector<StateLabel> parse_state_list(const ojson& v,
                                                const std::string& path) {
  if (!v.is_array())
    throw ConfigError(path, "must be an array of state labels");
  std::vector<StateLabel> out;
  for (const ojson& e : v) {
    if (!e.is_string())
      throw ConfigError(path, "labels must be strings");
    try {
      out.push_back(parse_state_label(e.get<std::string>()));
    } catch (const InvalidInput& err) {
      throw ConfigError(path, err.what());
    }
  }
  return out;
}

}  // namespace detail

/// Built-in configuration presets. `paper55m` is the bundled 55 m link:
/// alpha 0.16 per meter, 1.8 dB of extra optics loss (40 dB system total),
/// a 0.37-photon 1 GHz source at 532 nm, 600/200 per-second detector
/// backgrounds, and the depolarizing weight calibrated so the average scan
/// visibility hits 0.907.
inline ojson preset_config(const std::string& name) {
  if (name == "paper55m") {
    ojson angles = ojson::array();
    for (int k = 0; k <= 12; ++k)
      angles.push_back(static_cast<double>(k) * M_PI / 12.0);
    return ojson{
        {"link",
         {{"alpha_per_m", 0.16},
          {"length_m", 55.0},
          {"extra_loss_db", 1.8},
          {"source",
           {{"mean_photon_number", 0.37},
            {"repetition_rate_hz", 1.0e9},
            {"wavelength_m", 532.0e-9}}},
          {"detectors",
           {{"dark_rate_1_hz", 600.0},
            {"dark_rate_2_hz", 200.0},
            {"efficiency", 0.3},
            {"apd1_on_transmitted", true}}},
          {"noise", {{"rotation_rad", 0.0}, {"depolarizing_weight", 0.0}}},
          {"fluctuation", {{"relative_amplitude", 0.0}, {"period_s", 120.0}}},
          {"seed", 1}}},
        {"states", {"H", "V", "D", "A", "R", "L"}},
        {"tomography", {{"duration_s", 10.0}}},
        {"scan",
         {{"angles_rad", std::move(angles)},
          {"states", {"H", "V", "D", "A"}},
          {"duration_s", 1.0}}},
        {"calibration", {{"visibility_target", 0.907}}},
        {"output", {{"directory", "out"}, {"formats", {"json", "csv"}}}}};
  }
  throw ConfigError("preset", "unknown preset '" + name +
                                  "'; available: paper55m");
}

/// Overlay wins; objects merge recursively, scalars and arrays replace.
inline ojson merge_configs(ojson base, const ojson& overlay) {
  if (!base.is_object() || !overlay.is_object()) return overlay;
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() &&
        it.value().is_object())
      base[it.key()] = merge_configs(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
  return base;
}

/// Parse a config document into a plan. Unknown keys are rejected, not
/// ignored, so typos fail loudly. A top-level "preset" key expands first
/// and the remaining keys override it.
inline ExperimentPlan plan_from_json(ojson config) {
  if (!config.is_object())
    throw ConfigError("(root)", "config must be a JSON object");
  if (config.contains("preset")) {
    if (!config["preset"].is_string())
      throw ConfigError("preset", "must be a string");
    const std::string name = config["preset"].get<std::string>();
    config.erase("preset");
    config = merge_configs(preset_config(name), config);
  }
  detail::reject_unknown_keys(
      config, {"link", "states", "tomography", "scan", "calibration", "output"},
      "");

  ExperimentPlan plan;
  if (const ojson* link = detail::child_object(config, "link", "")) {
    detail::reject_unknown_keys(*link,
                                {"alpha_per_m", "length_m", "extra_loss_db",
                                 "source", "detectors", "noise", "fluctuation",
                                 "seed"},
                                "link");
    detail::assign_number(*link, "alpha_per_m", "link", plan.link.alpha_per_m);
    detail::assign_number(*link, "length_m", "link", plan.link.length_m);
    detail::assign_number(*link, "extra_loss_db", "link",
                          plan.link.extra_loss_db);
    if (const ojson* src = detail::child_object(*link, "source", "link")) {
      detail::reject_unknown_keys(
          *src, {"mean_photon_number", "repetition_rate_hz", "wavelength_m"},
          "link.source");
      detail::assign_number(*src, "mean_photon_number", "link.source",
                            plan.link.source.mean_photon_number);
      detail::assign_number(*src, "repetition_rate_hz", "link.source",
                            plan.link.source.repetition_rate_hz);
      detail::assign_number(*src, "wavelength_m", "link.source",
                            plan.link.source.wavelength_m);
    }
    if (const ojson* det = detail::child_object(*link, "detectors", "link")) {
      detail::reject_unknown_keys(*det,
                                  {"dark_rate_1_hz", "dark_rate_2_hz",
                                   "efficiency", "apd1_on_transmitted"},
                                  "link.detectors");
      detail::assign_number(*det, "dark_rate_1_hz", "link.detectors",
                            plan.link.detectors.dark_rate_1_hz);
      detail::assign_number(*det, "dark_rate_2_hz", "link.detectors",
                            plan.link.detectors.dark_rate_2_hz);
      detail::assign_number(*det, "efficiency", "link.detectors",
                            plan.link.detectors.efficiency);
      detail::assign_bool(*det, "apd1_on_transmitted", "link.detectors",
                          plan.link.detectors.apd1_on_transmitted);
    }
    if (const ojson* noise = detail::child_object(*link, "noise", "link")) {
      detail::reject_unknown_keys(
          *noise, {"rotation_rad", "depolarizing_weight"}, "link.noise");
      detail::assign_number(*noise, "rotation_rad", "link.noise",
                            plan.link.noise.rotation_rad);
      detail::assign_number(*noise, "depolarizing_weight", "link.noise",
                            plan.link.noise.depolarizing_weight);
    }
    if (const ojson* fl = detail::child_object(*link, "fluctuation", "link")) {
      detail::reject_unknown_keys(
          *fl, {"relative_amplitude", "period_s"}, "link.fluctuation");
      detail::assign_number(*fl, "relative_amplitude", "link.fluctuation",
                            plan.link.fluctuation.relative_amplitude);
      detail::assign_number(*fl, "period_s", "link.fluctuation",
                            plan.link.fluctuation.period_s);
    }
    plan.seed_provided =
        detail::assign_seed(*link, "seed", "link", plan.link.seed);
  }
  if (config.contains("states"))
    plan.states = detail::parse_state_list(config["states"], "states");
  if (const ojson* tomo = detail::child_object(config, "tomography", "")) {
    detail::reject_unknown_keys(*tomo, {"duration_s"}, "tomography");
    detail::assign_number(*tomo, "duration_s", "tomography",
                          plan.tomography_duration_s);
  }
  if (const ojson* scan = detail::child_object(config, "scan", "")) {
    detail::reject_unknown_keys(*scan, {"angles_rad", "states", "duration_s"},
                                "scan");
    if (scan->contains("angles_rad")) {
      const ojson& v = (*scan)["angles_rad"];
      if (!v.is_array())
        throw ConfigError("scan.angles_rad", "must be an array of numbers");
      plan.scan_angles_rad.clear();
      for (const ojson& e : v) {
        if (!e.is_number())
          throw ConfigError("scan.angles_rad", "must be an array of numbers");
        plan.scan_angles_rad.push_back(e.get<double>());
      }
    }
    if (scan->contains("states"))
      plan.scan_states =
          detail::parse_state_list((*scan)["states"], "scan.states");
    detail::assign_number(*scan, "duration_s", "scan", plan.scan_duration_s);
  }
  if (const ojson* cal = detail::child_object(config, "calibration", "")) {
    detail::reject_unknown_keys(*cal, {"visibility_target"}, "calibration");
    if (cal->contains("visibility_target")) {
      plan.calibrate = true;
      detail::assign_number(*cal, "visibility_target", "calibration",
                            plan.visibility_target);
    }
  }
  if (const ojson* out = detail::child_object(config, "output", "")) {
    detail::reject_unknown_keys(*out, {"directory", "formats"}, "output");
    detail::assign_string(*out, "directory", "output", plan.output_directory);
    if (out->contains("formats")) {
      const ojson& v = (*out)["formats"];
      if (!v.is_array())
        throw ConfigError("output.formats", "must be an array of strings");
      plan.formats.clear();
      for (const ojson& e : v) {
        if (!e.is_string())
          throw ConfigError("output.formats", "must be an array of strings");
        plan.formats.push_back(e.get<std::string>());
      }
    }
  }
  return plan;
}

inline ExperimentPlan plan_from_json_text(const std::string& text,
                                          const std::string& source_name) {
  ojson parsed;
  try {
    parsed = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("(root)",
                      source_name + " is not valid JSON: " + e.what());
  }
  return plan_from_json(parsed);
}

/// Canonical fully explicit form of a plan, so two configs that parse to
/// the same plan serialize identically. Report provenance hashes this form
/// minus the output section.
inline ojson plan_to_json(const ExperimentPlan& plan) {
  ojson states = ojson::array();
  for (StateLabel s : plan.states) states.push_back(to_string(s));
  ojson scan_states = ojson::array();
  for (StateLabel s : plan.scan_states) scan_states.push_back(to_string(s));
  ojson angles = ojson::array();
  for (double a : plan.scan_angles_rad) angles.push_back(a);
  ojson formats = ojson::array();
  for (const std::string& f : plan.formats) formats.push_back(f);
  ojson cal = ojson::object();
  if (plan.calibrate) cal["visibility_target"] = plan.visibility_target;
  return ojson{
      {"link",
       {{"alpha_per_m", plan.link.alpha_per_m},
        {"length_m", plan.link.length_m},
        {"extra_loss_db", plan.link.extra_loss_db},
        {"source",
         {{"mean_photon_number", plan.link.source.mean_photon_number},
          {"repetition_rate_hz", plan.link.source.repetition_rate_hz},
          {"wavelength_m", plan.link.source.wavelength_m}}},
        {"detectors",
         {{"dark_rate_1_hz", plan.link.detectors.dark_rate_1_hz},
          {"dark_rate_2_hz", plan.link.detectors.dark_rate_2_hz},
          {"efficiency", plan.link.detectors.efficiency},
          {"apd1_on_transmitted", plan.link.detectors.apd1_on_transmitted}}},
        {"noise",
         {{"rotation_rad", plan.link.noise.rotation_rad},
          {"depolarizing_weight", plan.link.noise.depolarizing_weight}}},
        {"fluctuation",
         {{"relative_amplitude", plan.link.fluctuation.relative_amplitude},
          {"period_s", plan.link.fluctuation.period_s}}},
        {"seed", plan.link.seed}}},
      {"states", std::move(states)},
      {"tomography", {{"duration_s", plan.tomography_duration_s}}},
      {"scan",
       {{"angles_rad", std::move(angles)},
        {"states", std::move(scan_states)},
        {"duration_s", plan.scan_duration_s}}},
      {"calibration", std::move(cal)},
      {"output",
       {{"directory", plan.output_directory},
        {"formats", std::move(formats)}}}};
}

}  // namespace uwq
