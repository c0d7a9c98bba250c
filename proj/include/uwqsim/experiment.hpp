#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uwqsim/analysis.hpp"
#include "uwqsim/channel.hpp"
#include "uwqsim/config.hpp"
#include "uwqsim/photonics.hpp"
#include "uwqsim/serialize.hpp"
#include "uwqsim/tomography.hpp"
#include "uwqsim/version.hpp"

namespace uwq {

/// Port whose counts are fitted in the correlation scan of each input
/// state. H and D land on the transmitted detector, V and A on the
/// reflected one, so the two detector backgrounds show up in different
/// scans.
inline bool scan_fit_port_transmitted(StateLabel label) {
  return label == StateLabel::H || label == StateLabel::D ||
         label == StateLabel::R;
}

/// Expected fitted average scan visibility as a function of the
/// depolarizing weight, everything else held at the plan's values. For a
/// linear input state the fitted port's sinusoid has amplitude (1-w) S/2
/// and offset S/2 + B_port, so
/// V_avg(w) = (1-w) S mean_over_fitted_ports(1 / (S + 2 B_port)).

inline double predicted_average_visibility(const LinkConfig& link,
                                           const std::vector<StateLabel>& scan_states,
                                           double weight) {
  const LinkBudget budget = link_budget(link);
  const double s = budget.expected_signal_rate_hz;
  double acc = 0.0;
  for (StateLabel st : scan_states) {
    const double b = scan_fit_port_transmitted(st)
                         ? budget.expected_background_t_hz
                         : budget.expected_background_r_hz;
    acc += s / (s + 2.0 * b);
  }
  return (1.0 - weight) * acc / static_cast<double>(scan_states.size());
}

/// One-dimensional search for the depolarizing weight that makes the
/// predicted average visibility hit `target`. Bisection on [0, 1]; the
/// predicted visibility is strictly decreasing in the weight.
inline double calibrate_depolarizing_weight(
    const LinkConfig& link, const std::vector<StateLabel>& scan_states,
    double target) {
  if (scan_states.empty())
    throw ConfigError("scan.states",
                      "calibration needs at least one scan state");
  for (StateLabel st : scan_states)
    if (st == StateLabel::R || st == StateLabel::L)
      throw ConfigError("scan.states",
                        "calibration assumes linear scan states (H, V, D, A); "
                        "a linear analyzer sees no contrast on circular input");
  if (target <= 0.0 || target >= 1.0)
    throw ConfigError("calibration.visibility_target", "must be in (0, 1)");
  const double v0 = predicted_average_visibility(link, scan_states, 0.0);
  if (target > v0)
    throw ConfigError("calibration.visibility_target",
                      "unreachable: background alone caps the average "
                      "visibility at " +
                          std::to_string(v0));
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (predicted_average_visibility(link, scan_states, mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct StateResult {
  StateLabel label = StateLabel::H;
  TomographyDataset counts;
  DensityMatrix rho = DensityMatrix::maximally_mixed();
  BlochVector bloch;
  double fidelity = 0.0;  // sqrt convention, F = tr sqrt(sqrt(s) r sqrt(s))
  double fidelity_squared = 0.0;
  double purity = 0.0;
  int mle_iterations = 0;
};

struct ScanResult {
  StateLabel label = StateLabel::H;
  bool transmitted_port = true;
  std::vector<CountRecord> records;
  SinusoidFit fit;
};

struct ProcessResult {
  ProcessMatrix chi;
  double fidelity_to_ideal = 0.0;
  double ls_residual = 0.0;
  int projection_cycles = 0;
};

struct ExperimentReport {
  ExperimentPlan plan;  // effective plan, pre-calibration
  double depolarizing_weight_used = 0.0;
  bool calibrated = false;
  LinkBudget budget;
  std::vector<StateResult> states;
  std::optional<ProcessResult> process;
  std::vector<ScanResult> scans;
  double average_fidelity = 0.0;
  double average_purity = 0.0;
  double min_fidelity = 0.0;
  std::optional<double> average_scan_visibility;
  std::string config_hash;
};

/// Carries whatever part of the report was already assembled when a stage
/// failed, so callers can persist partial results next to the diagnostic.
/// `category` preserves the class of the underlying failure for exit-code
/// mapping: "config", "nonconvergence", "io" or "runtime".
class StageFailure : public StageError {
 public:
  StageFailure(const std::string& stage, const std::string& cause,
               std::string category, ojson partial)
      : StageError(stage, cause),
        category(std::move(category)),
        partial_report(std::move(partial)) {}
  std::string category;
  ojson partial_report;
};

inline ojson report_to_json(const ExperimentReport& report);

namespace detail {

template <typename Fn>
auto run_stage(const char* stage, const ExperimentReport& partial, Fn&& fn) {
  try {
    return fn();
  } catch (const StageFailure&) {
    throw;
  } catch (const TomographyNonconvergence& e) {
    throw StageFailure(stage, e.what(), "nonconvergence",
                       report_to_json(partial));
  } catch (const ConfigError& e) {
    throw StageFailure(stage, e.what(), "config", report_to_json(partial));
  } catch (const IoError& e) {
    throw StageFailure(stage, e.what(), "io", report_to_json(partial));
  } catch (const std::exception& e) {
    throw StageFailure(stage, e.what(), "runtime", report_to_json(partial));
  }
}

}  // namespace detail

/// Full pipeline: prepare each requested state, push it through the link
/// channel, Monte Carlo the tomography counts, reconstruct by maximum
/// likelihood, reconstruct the process from all states, run the analyzer
/// scans and fit visibilities. Deterministic for a given (plan, seed):
/// every setting draws from its own substream keyed by state and setting,
/// independent of execution order.
inline ExperimentReport run_full_experiment(const ExperimentPlan& plan) {
  validate(plan);
  ExperimentReport report;
  report.plan = plan;
  // The provenance hash identifies the experiment, not the destination:
  // rerunning the same plan into a different directory must produce a
  // byte-identical report.
  ojson hashed = plan_to_json(plan);
  hashed.erase("output");
  report.config_hash = config_hash(hashed);

  LinkConfig link = plan.link;
  if (plan.calibrate) {
    link.noise.depolarizing_weight = detail::run_stage(
        "calibration", report, [&] {
          return calibrate_depolarizing_weight(link, plan.scan_states,
                                               plan.visibility_target);
        });
    report.calibrated = true;
  }
  report.depolarizing_weight_used = link.noise.depolarizing_weight;
  report.budget = link_budget(link);

  const LinkChannel channel = build_link_channel(link);
  const Rng root(link.seed);

  for (StateLabel label : plan.states) {
    StateResult res;
    res.label = label;
    const DensityMatrix sent = density_of(universal_state(label));
    const DensityMatrix arrived = apply_channel(channel.chi, sent);
    const Rng state_stream =
        root.substream(std::string("state/") + to_string(label));

    res.counts = detail::run_stage("simulate-counts", report, [&] {
      TomographyDataset data;
      const auto record = [&](Basis b) {
        const Measurement m = Measurement::pauli_basis(b);
        return simulate_counts(arrived, m, link, plan.tomography_duration_s,
                               state_stream.substream(m.stream_tag()));
      };
      data.z = record(Basis::Z);
      data.x = record(Basis::X);
      data.y = record(Basis::Y);
      return data;
    });

    detail::run_stage("state-tomography", report, [&] {
      const MleResult mle = reconstruct_mle(res.counts);
      res.rho = mle.rho;
      res.mle_iterations = mle.iterations;
      return 0;
    });

    res.bloch = bloch_of(res.rho);
    res.fidelity = state_fidelity(sent, res.rho);
    res.fidelity_squared = res.fidelity * res.fidelity;
    res.purity = purity(res.rho);
    report.states.push_back(std::move(res));
  }

  double fid_sum = 0.0;
  double pur_sum = 0.0;
  report.min_fidelity = 1.0;
  for (const StateResult& s : report.states) {
    fid_sum += s.fidelity;
    pur_sum += s.purity;
    report.min_fidelity = std::min(report.min_fidelity, s.fidelity);
  }
  report.average_fidelity = fid_sum / static_cast<double>(report.states.size());
  report.average_purity = pur_sum / static_cast<double>(report.states.size());

  if (report.states.size() >= 4) {
    ProcessDataset pairs;
    for (const StateResult& s : report.states)
      pairs.push_back({density_of(universal_state(s.label)), s.rho});
    const bool spans = [&] {
      Eigen::MatrixXd span(static_cast<Eigen::Index>(pairs.size()), 4);
      for (Eigen::Index i = 0; i < span.rows(); ++i)
        for (int m = 0; m < 4; ++m)
          span(i, m) = (pauli(m) * pairs[static_cast<size_t>(i)].input.matrix())
                           .trace()
                           .real();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(span);
      return svd.singularValues()[3] > 1e-9 * svd.singularValues()[0];
    }();
    if (spans) {
      detail::run_stage("process-tomography", report, [&] {
        const ProcessTomographyResult proc = reconstruct_process(pairs);
        report.process = ProcessResult{
            proc.chi, process_fidelity(proc.chi, ProcessMatrix::ideal()),
            proc.ls_residual, proc.projection_cycles};
        return 0;
      });
    }
  }

  for (StateLabel label : plan.scan_states) {
    ScanResult scan;
    scan.label = label;
    scan.transmitted_port = scan_fit_port_transmitted(label);
    const DensityMatrix arrived =
        apply_channel(channel.chi, density_of(universal_state(label)));
    const Rng state_stream =
        root.substream(std::string("state/") + to_string(label));
    detail::run_stage("scan", report, [&] {
      for (double angle : plan.scan_angles_rad) {
        const Measurement m = Measurement::analyzer(angle);
        scan.records.push_back(simulate_counts(
            arrived, m, link, plan.scan_duration_s,
            state_stream.substream(m.stream_tag())));
      }
      scan.fit = fit_malus(
          scan_from_records(scan.records, scan.transmitted_port));
      return 0;
    });
    report.scans.push_back(std::move(scan));
  }
  if (!report.scans.empty()) {
    std::vector<SinusoidFit> fits;
    for (const ScanResult& s : report.scans) fits.push_back(s.fit);
    report.average_scan_visibility = average_visibility(fits);
  }

  return report;
}

inline ojson report_to_json(const ExperimentReport& report) {
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  j["provenance"] = {{"config_hash", report.config_hash},
                     {"seed", report.plan.link.seed},
                     {"tool_version", kVersion}};
  j["link_budget"] = {
      {"channel_db", report.budget.channel_db},
      {"extra_db", report.budget.extra_db},
      {"total_db", report.budget.total_db},
      {"survival_probability", report.budget.survival_probability},
      {"expected_signal_rate_hz", report.budget.expected_signal_rate_hz},
      {"expected_background_t_hz", report.budget.expected_background_t_hz},
      {"expected_background_r_hz", report.budget.expected_background_r_hz},
      {"pulse_energy_j", report.budget.pulse_energy_j},
      {"source_power_w", report.budget.source_power_w}};
  j["channel"] = {{"rotation_rad", report.plan.link.noise.rotation_rad},
                  {"depolarizing_weight", report.depolarizing_weight_used},
                  {"calibrated", report.calibrated}};
  ojson states = ojson::array();
  for (const StateResult& s : report.states) {
    ojson counts = ojson::array();
    for (const CountRecord* r : {&s.counts.z, &s.counts.x, &s.counts.y})
      counts.push_back({{"setting_angle_rad", r->setting_angle_rad},
                        {"counts_t", r->counts_t},
                        {"counts_r", r->counts_r},
                        {"duration_s", r->duration_s}});
    states.push_back({{"label", to_string(s.label)},
                      {"rho", density_to_json(s.rho)},
                      {"bloch", {s.bloch.x, s.bloch.y, s.bloch.z}},
                      {"fidelity", s.fidelity},
                      {"fidelity_squared", s.fidelity_squared},
                      {"purity", s.purity},
                      {"mle_iterations", s.mle_iterations},
                      {"counts", std::move(counts)}});
  }
  j["states"] = std::move(states);
  j["aggregates"] = {{"average_fidelity", report.average_fidelity},
                     {"average_purity", report.average_purity},
                     {"min_fidelity", report.min_fidelity}};
  if (report.process) {
    j["process"] = {{"chi", chi_to_json(report.process->chi)},
                    {"chi_polar", chi_polar_json(report.process->chi)},
                    {"fidelity_to_ideal", report.process->fidelity_to_ideal},
                    {"ls_residual", report.process->ls_residual},
                    {"projection_cycles", report.process->projection_cycles}};
  } else {
    j["process"] = nullptr;
  }
  ojson scans = ojson::array();
  for (const ScanResult& s : report.scans)
    scans.push_back({{"state", to_string(s.label)},
                     {"port", s.transmitted_port ? "t" : "r"},
                     {"fit", fit_to_json(s.fit)}});
  j["scans"] = std::move(scans);
  if (report.average_scan_visibility)
    j["average_scan_visibility"] = *report.average_scan_visibility;
  else
    j["average_scan_visibility"] = nullptr;
  return j;
}

/// Write report artifacts into `dir`: report.json when "json" is among the
/// formats, per-state tomography CSVs and per-scan CSVs when "csv" is.
inline void write_report_files(const ExperimentReport& report,
                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir.string() +
                  "': " + ec.message());
  const auto has_format = [&](const char* f) {
    for (const std::string& s : report.plan.formats)
      if (s == f) return true;
    return false;
  };
  if (has_format("json"))
    write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  if (has_format("csv")) {
    for (const StateResult& s : report.states) {
      const std::vector<CountRecord> recs{s.counts.z, s.counts.x, s.counts.y};
      write_text_file(dir / (std::string("counts_") + to_string(s.label) +
                             ".csv"),
                      count_records_to_csv(recs));
    }
    for (const ScanResult& s : report.scans)
      write_text_file(dir / (std::string("scan_") + to_string(s.label) +
                             ".csv"),
                      count_records_to_csv(s.records));
  }
}

}  // namespace uwq
