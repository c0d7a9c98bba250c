#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "uwqsim/config.hpp"
#include "uwqsim/experiment.hpp"
#include "uwqsim/serialize.hpp"
#include "uwqsim/tomography.hpp"
#include "uwqsim/version.hpp"

namespace {

namespace fs = std::filesystem;

// Exit-code contract: 0 ok, 2 configuration or bad input, 3 numerical
// non-convergence, 4 I/O failure, 1 anything else.
constexpr int kExitUsage = 2;
constexpr int kExitNumerics = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* format_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config_path, "JSON config file (may name a 'preset' to extend)");
  sub->add_option("--preset", o.preset, "built-in preset (paper55m)");
  o.seed_opt = sub->add_option("--seed", o.seed, "RNG seed override");
  o.out_opt = sub->add_option("--out", o.out_dir, "output directory");
  o.format_opt = sub->add_option("--format", o.format, "output format")
                     ->check(CLI::IsMember({"json", "csv"}));
}

uwq::ExperimentPlan plan_from(const CommonOpts& o) {
  uwq::ojson cfg = uwq::ojson::object();
  if (!o.config_path.empty()) {
    const std::string text = uwq::read_text_file(o.config_path);
    try {
      cfg = uwq::ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw uwq::ConfigError("(root)", o.config_path +
                                           " is not valid JSON: " + e.what());
    }
  }
  if (!o.preset.empty())
    cfg = uwq::merge_configs(uwq::preset_config(o.preset), cfg);
  uwq::ExperimentPlan plan = uwq::plan_from_json(cfg);
  if (o.seed_opt != nullptr && o.seed_opt->count() > 0) {
    plan.link.seed = o.seed;
    plan.seed_provided = true;
  }
  if (o.out_opt != nullptr && o.out_opt->count() > 0)
    plan.output_directory = o.out_dir;
  if (o.format_opt != nullptr && o.format_opt->count() > 0)
    plan.formats = {o.format};
  return plan;
}

void flatten_json(const uwq::ojson& j, const std::string& path,
                  std::string& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), path.empty() ? it.key() : path + "." + it.key(),
                   out);
  } else if (j.is_array()) {
    size_t i = 0;
    for (const uwq::ojson& v : j)
      flatten_json(v, path + "[" + std::to_string(i++) + "]", out);
  } else if (j.is_string()) {
    out += path + "," + j.get<std::string>() + "\n";
  } else {
    out += path + "," + j.dump() + "\n";
  }
}

std::string render_result(const uwq::ojson& j, const std::string& format) {
  if (format == "csv") {
    std::string out = "key,value\n";
    flatten_json(j, "", out);
    return out;
  }
  return j.dump(2) + "\n";
}

/// Print the result and, when --out was given, also persist it.
void emit_result(const uwq::ojson& j, const CommonOpts& o,
                 const std::string& stem) {
  const std::string format =
      (o.format_opt != nullptr && o.format_opt->count() > 0) ? o.format
                                                             : "json";
  const std::string text = render_result(j, format);
  std::cout << text;
  if (o.out_opt != nullptr && o.out_opt->count() > 0) {
    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec)
      throw uwq::IoError("cannot create output directory '" + o.out_dir +
                         "': " + ec.message());
    uwq::write_text_file(
        fs::path(o.out_dir) / (stem + (format == "csv" ? ".csv" : ".json")),
        text);
  }
}

uwq::ojson count_record_json(const uwq::CountRecord& r) {
  return {{"setting_angle_rad", r.setting_angle_rad},
          {"counts_t", r.counts_t},
          {"counts_r", r.counts_r},
          {"duration_s", r.duration_s}};
}

int cmd_simulate(const CommonOpts& o) {
  const uwq::ExperimentPlan plan = plan_from(o);
  const uwq::ExperimentReport report = uwq::run_full_experiment(plan);
  const fs::path dir = plan.output_directory;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw uwq::IoError("cannot create output directory '" + dir.string() +
                       "': " + ec.message());
  const auto has_format = [&](const char* f) {
    for (const std::string& s : plan.formats)
      if (s == f) return true;
    return false;
  };
  if (has_format("csv")) {
    for (const uwq::StateResult& s : report.states) {
      const std::vector<uwq::CountRecord> recs{s.counts.z, s.counts.x,
                                               s.counts.y};
      uwq::write_text_file(
          dir / (std::string("counts_") + uwq::to_string(s.label) + ".csv"),
          uwq::count_records_to_csv(recs));
    }
    for (const uwq::ScanResult& s : report.scans)
      uwq::write_text_file(
          dir / (std::string("scan_") + uwq::to_string(s.label) + ".csv"),
          uwq::count_records_to_csv(s.records));
  }
  if (has_format("json")) {
    uwq::ojson all;
    all["states"] = uwq::ojson::array();
    for (const uwq::StateResult& s : report.states) {
      uwq::ojson rec = {{"label", uwq::to_string(s.label)},
                        {"z", count_record_json(s.counts.z)},
                        {"x", count_record_json(s.counts.x)},
                        {"y", count_record_json(s.counts.y)}};
      all["states"].push_back(std::move(rec));
    }
    all["scans"] = uwq::ojson::array();
    for (const uwq::ScanResult& s : report.scans) {
      uwq::ojson recs = uwq::ojson::array();
      for (const uwq::CountRecord& r : s.records)
        recs.push_back(count_record_json(r));
      all["scans"].push_back(
          {{"state", uwq::to_string(s.label)}, {"records", std::move(recs)}});
    }
    uwq::write_text_file(dir / "counts.json", all.dump(2) + "\n");
  }
  std::cout << "wrote count records to " << dir.string() << "\n";
  return 0;
}

int cmd_state_tomo(const CommonOpts& o, const std::string& input,
                   const std::string& reference) {
  const auto recs =
      uwq::count_records_from_csv(uwq::read_text_file(input), input);
  if (recs.size() != 3)
    throw uwq::InvalidInput(
        "state tomography input must contain exactly 3 records in Z, X, Y "
        "row order; got " +
        std::to_string(recs.size()));
  const uwq::TomographyDataset data{recs[0], recs[1], recs[2]};
  const uwq::MleResult mle = uwq::reconstruct_mle(data);
  const uwq::BlochVector bloch = uwq::bloch_of(mle.rho);
  uwq::ojson out = {{"rho", uwq::density_to_json(mle.rho)},
                    {"bloch", {bloch.x, bloch.y, bloch.z}},
                    {"purity", uwq::purity(mle.rho)},
                    {"mle_iterations", mle.iterations},
                    {"mean_log_likelihood", mle.mean_log_likelihood}};
  if (!reference.empty()) {
    const uwq::StateLabel label = uwq::parse_state_label(reference);
    const double f = uwq::state_fidelity(
        uwq::density_of(uwq::universal_state(label)), mle.rho);
    out["reference"] = reference;
    out["fidelity"] = f;
    out["fidelity_squared"] = f * f;
  }
  emit_result(out, o, "state_tomo");
  return 0;
}

int cmd_process_tomo(const CommonOpts& o, const std::string& input) {
  uwq::ojson parsed;
  try {
    parsed = uwq::ojson::parse(uwq::read_text_file(input));
  } catch (const nlohmann::json::parse_error& e) {
    throw uwq::IoError(input + " is not valid JSON: " + e.what());
  }
  if (!parsed.is_array())
    throw uwq::IoError(input +
                       ": expected a JSON array of {input, output} pairs");
  uwq::ProcessDataset pairs;
  for (const uwq::ojson& item : parsed) {
    if (!item.is_object() || !item.contains("input") ||
        !item.contains("output"))
      throw uwq::IoError(input + ": each pair needs 'input' and 'output'");
    pairs.push_back({uwq::density_from_json(item["input"]),
                     uwq::density_from_json(item["output"])});
  }
  const uwq::ProcessTomographyResult proc = uwq::reconstruct_process(pairs);
  const double f =
      uwq::process_fidelity(proc.chi, uwq::ProcessMatrix::ideal());
  const uwq::ojson out = {{"chi", uwq::chi_to_json(proc.chi)},
                          {"chi_polar", uwq::chi_polar_json(proc.chi)},
                          {"fidelity_to_ideal", f},
                          {"ls_residual", proc.ls_residual},
                          {"projection_cycles", proc.projection_cycles}};
  emit_result(out, o, "process_tomo");
  return 0;
}

int cmd_fit_visibility(const CommonOpts& o, const std::string& input,
                       bool poisson_weighted, const std::string& port) {
  const std::string text = uwq::read_text_file(input);
  // Accept both the two-column scan format and the four-column CountRecord
  // format written by `run` and `simulate`; for the latter, --port picks
  // which detector's counts to fit.
  uwq::CorrelationScan scan;
  if (text.rfind(uwq::kCountCsvHeader, 0) == 0) {
    const auto recs = uwq::count_records_from_csv(text, input);
    scan = uwq::scan_from_records(recs, port != "r");
  } else {
    scan = uwq::scan_from_csv(text, input);
  }
  const uwq::SinusoidFit fit = uwq::fit_malus(scan, poisson_weighted);
  emit_result(uwq::fit_to_json(fit), o, "visibility_fit");
  return 0;
}

int cmd_link_budget(const CommonOpts& o) {
  const uwq::ExperimentPlan plan = plan_from(o);
  const uwq::LinkBudget b = uwq::link_budget(plan.link);
  const uwq::ojson out = {
      {"channel_db", b.channel_db},
      {"extra_db", b.extra_db},
      {"total_db", b.total_db},
      {"survival_probability", b.survival_probability},
      {"expected_signal_rate_hz", b.expected_signal_rate_hz},
      {"expected_background_t_hz", b.expected_background_t_hz},
      {"expected_background_r_hz", b.expected_background_r_hz},
      {"pulse_energy_j", b.pulse_energy_j},
      {"source_power_w", b.source_power_w}};
  emit_result(out, o, "link_budget");
  return 0;
}

int exit_code_for_category(const std::string& category) {
  if (category == "config") return kExitUsage;
  if (category == "nonconvergence") return kExitNumerics;
  if (category == "io") return kExitIo;
  return 1;
}

int cmd_run(const CommonOpts& o) {
  const uwq::ExperimentPlan plan = plan_from(o);
  try {
    const uwq::ExperimentReport report = uwq::run_full_experiment(plan);
    uwq::write_report_files(report, plan.output_directory);
    std::cout << "report written to "
              << (fs::path(plan.output_directory) / "report.json").string()
              << "\n"
              << "average_fidelity " << report.average_fidelity << "\n"
              << "average_purity " << report.average_purity << "\n";
    if (report.process)
      std::cout << "process_fidelity " << report.process->fidelity_to_ideal
                << "\n";
    if (report.average_scan_visibility)
      std::cout << "average_scan_visibility "
                << *report.average_scan_visibility << "\n";
    return 0;
  } catch (const uwq::StageFailure& e) {
    try {
      std::error_code ec;
      fs::create_directories(plan.output_directory, ec);
      if (!ec)
        uwq::write_text_file(
            fs::path(plan.output_directory) / "report_partial.json",
            e.partial_report.dump(2) + "\n");
    } catch (const std::exception&) {
      // partial results are best effort; the diagnostic below still lands
    }
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for_category(e.category);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polarization-encoded underwater link simulator and "
               "tomography toolkit"};
  app.set_version_flag("--version", uwq::kVersion);
  app.require_subcommand(1);

  CommonOpts o_simulate, o_state, o_process, o_fit, o_budget, o_run;
  std::string state_input, state_reference, process_input, fit_input;
  std::string fit_port = "t";
  bool poisson_weighted = false;
  std::function<int()> action;

  CLI::App* sim = app.add_subcommand(
      "simulate", "generate tomography and analyzer-scan count records");
  add_common(sim, o_simulate);
  sim->callback([&] { action = [&] { return cmd_simulate(o_simulate); }; });

  CLI::App* st = app.add_subcommand(
      "state-tomo", "reconstruct a density matrix from count records");
  add_common(st, o_state);
  st->add_option("--input", state_input,
                 "CountRecord CSV with rows in Z, X, Y order")
      ->required();
  st->add_option("--reference", state_reference,
                 "state label to compute fidelity against (H V D A R L)");
  st->callback([&] {
    action = [&] { return cmd_state_tomo(o_state, state_input, state_reference); };
  });

  CLI::App* pt = app.add_subcommand(
      "process-tomo", "reconstruct a chi matrix from input/output states");
  add_common(pt, o_process);
  pt->add_option("--input", process_input,
                 "JSON array of {input, output} density-matrix pairs")
      ->required();
  pt->callback(
      [&] { action = [&] { return cmd_process_tomo(o_process, process_input); }; });

  CLI::App* fv = app.add_subcommand(
      "fit-visibility", "fit a Malus curve to an analyzer scan");
  add_common(fv, o_fit);
  fv->add_option("--input", fit_input,
                 "scan CSV (angle_rad,counts or a CountRecord file)")
      ->required();
  fv->add_option("--port", fit_port, "detector port for CountRecord input")
      ->check(CLI::IsMember({"t", "r"}));
  fv->add_flag("--poisson-weighted", poisson_weighted,
               "weight points by 1/max(count, 1)");
  fv->callback([&] {
    action = [&] {
      return cmd_fit_visibility(o_fit, fit_input, poisson_weighted, fit_port);
    };
  });

  CLI::App* lb = app.add_subcommand(
      "link-budget", "loss, rate and background budget for a link config");
  add_common(lb, o_budget);
  lb->callback([&] { action = [&] { return cmd_link_budget(o_budget); }; });

  CLI::App* run = app.add_subcommand(
      "run", "full pipeline: simulate, reconstruct, fit, report");
  add_common(run, o_run);
  run->callback([&] { action = [&] { return cmd_run(o_run); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    return action();
  } catch (const uwq::StageFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for_category(e.category);
  } catch (const uwq::TomographyNonconvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerics;
  } catch (const uwq::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const uwq::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const uwq::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
