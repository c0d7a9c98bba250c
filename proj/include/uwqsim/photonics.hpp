#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "uwqsim/channel.hpp"
#include "uwqsim/qstate.hpp"
#include "uwqsim/rng.hpp"

namespace uwq {

inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kLightSpeed = 299792458.0;      // m/s

/// Weak-coherent pulsed source.
struct SourceConfig {
  double mean_photon_number = 0.37;   // photons per pulse (mu)
  double repetition_rate_hz = 1e9;
  double wavelength_m = 532e-9;
};

inline void validate(const SourceConfig& s) {
  if (s.mean_photon_number <= 0.0)
    throw InvalidInput("source mean photon number must be > 0");
  if (s.repetition_rate_hz <= 0.0)
    throw InvalidInput("source repetition rate must be > 0");
  if (s.wavelength_m <= 400e-9 || s.wavelength_m >= 700e-9)
    throw InvalidInput("source wavelength outside (400, 700) nm");
}

/// Two single-photon detectors behind the analyzing PBS. Detector "1" sits
/// on the transmitted port by default; the assignment is configurable since
/// either wiring is plausible.
struct DetectorConfig {
  double dark_rate_1_hz = 600.0;
  double dark_rate_2_hz = 200.0;
  double efficiency = 0.3;            // folded overall detection efficiency
  bool apd1_on_transmitted = true;
};

inline void validate(const DetectorConfig& d) {
  if (d.dark_rate_1_hz < 0.0 || d.dark_rate_2_hz < 0.0)
    throw InvalidInput("detector dark rates must be >= 0");
  if (d.efficiency <= 0.0 || d.efficiency > 1.0)
    throw InvalidInput("detector efficiency must be in (0, 1]");
}

/// Unitary rotation plus depolarization picked up in the channel.
struct PolarizationNoise {
  double rotation_rad = 0.0;
  double depolarizing_weight = 0.0;
};

/// Optional slow modulation of the received flux (beam wandering makes the
/// observed rate drift on timescales much longer than one integration
/// window). Phase is drawn per setting from the seeded stream.
struct FluctuationConfig {
  double relative_amplitude = 0.0;    // 0 disables
  double period_s = 120.0;
};

/// Full description of one link realization: channel, source, detectors,
/// polarization noise and the master seed.
struct LinkConfig {
  double alpha_per_m = 0.16;
  double length_m = 55.0;
  double extra_loss_db = 1.8;         // interfaces + optics on top of the water path
  SourceConfig source;
  DetectorConfig detectors;
  PolarizationNoise noise;
  FluctuationConfig fluctuation;
  std::uint64_t seed = 1;
};

inline void validate(const LinkConfig& cfg) {
  if (cfg.alpha_per_m < 0.0) throw InvalidInput("alpha must be >= 0");
  if (cfg.length_m <= 0.0) throw InvalidInput("channel length must be > 0");
  if (cfg.extra_loss_db < 0.0) throw InvalidInput("extra loss must be >= 0 dB");
  validate(cfg.source);
  validate(cfg.detectors);
  if (cfg.noise.depolarizing_weight < 0.0 || cfg.noise.depolarizing_weight > 1.0)
    throw InvalidInput("depolarizing weight must be in [0, 1]");
  if (cfg.fluctuation.relative_amplitude < 0.0 ||
      cfg.fluctuation.relative_amplitude >= 1.0)
    throw InvalidInput("fluctuation amplitude must be in [0, 1)");
  if (cfg.fluctuation.period_s <= 0.0)
    throw InvalidInput("fluctuation period must be > 0");
}

/// Click tallies for one measurement setting: transmitted and reflected
/// ports recorded simultaneously over `duration_s`.
struct CountRecord {
  double setting_angle_rad = 0.0;
  std::int64_t counts_t = 0;
  std::int64_t counts_r = 0;
  double duration_s = 0.0;
};

inline void validate(const CountRecord& rec) {
  if (rec.counts_t < 0 || rec.counts_r < 0)
    throw InvalidInput("counts must be >= 0");
  if (rec.duration_s <= 0.0) throw InvalidInput("duration must be > 0");
}

// ---------------------------------------------------------------------------
// Measurement settings

/// Measurement bases used for tomography: Z is H/V, X is D/A, Y is R/L.
enum class Basis { Z, X, Y };

inline const char* to_string(Basis b) {
  switch (b) {
    case Basis::Z: return "Z";
    case Basis::X: return "X";
    case Basis::Y: return "Y";
  }
  return "?";
}

/// A projective measurement at the receiver: either one of the three Pauli
/// bases (dual-port, both outcomes recorded) or a linear analyzer at a given
/// polarization angle for correlation scans.
class Measurement {
 public:
  static Measurement pauli_basis(Basis b) { return Measurement(b); }
  static Measurement analyzer(double angle_rad) {
    return Measurement(angle_rad);
  }

  bool is_analyzer() const { return analyzer_; }
  Basis basis() const {
    if (analyzer_) throw InvalidInput("analyzer setting has no Pauli basis");
    return basis_;
  }

  /// Projector on the transmitted port.
  Mat2 projector_plus() const {
    if (analyzer_) {
      Vec2 v(std::cos(angle_rad_), std::sin(angle_rad_));
      return v * v.adjoint();
    }
    switch (basis_) {
      case Basis::Z: return density_of(universal_state(StateLabel::H)).matrix();
      case Basis::X: return density_of(universal_state(StateLabel::D)).matrix();
      case Basis::Y: return density_of(universal_state(StateLabel::R)).matrix();
    }
    throw InvalidInput("bad basis");
  }

  /// Angle recorded in CountRecord CSVs: the analyzer angle for scans, the
  /// projection-stage plate angle for tomography bases (HWP 0 for Z,
  /// HWP pi/8 for X, QWP pi/4 for Y).
  double setting_angle() const {
    if (analyzer_) return angle_rad_;
    switch (basis_) {
      case Basis::Z: return 0.0;
      case Basis::X: return M_PI / 8.0;
      case Basis::Y: return M_PI / 4.0;
    }
    return 0.0;
  }

  std::string description() const {
    if (analyzer_) return "analyzer/" + std::to_string(angle_rad_);
    return std::string("basis/") + to_string(basis_);
  }

  /// Substream tag; distinct settings get independent random substreams.
  std::uint64_t stream_tag() const {
    if (analyzer_)
      return fnv1a("analyzer") ^ detail::mix64(std::bit_cast<std::uint64_t>(angle_rad_));
    return fnv1a("basis") ^ detail::mix64(static_cast<std::uint64_t>(basis_));
  }

 private:
  explicit Measurement(Basis b) : analyzer_(false), basis_(b) {}
  explicit Measurement(double angle) : analyzer_(true), angle_rad_(angle) {}

  bool analyzer_;
  Basis basis_ = Basis::Z;
  double angle_rad_ = 0.0;
};

// ---------------------------------------------------------------------------
// Source statistics and link budget

/// Poissonian photon-number distribution of a weak coherent pulse,
/// P(n) = exp(-mu) mu^n / n!, truncated where the remaining tail drops
/// below 1e-12 and renormalized.
inline std::vector<double> photon_number_distribution(double mu) {
  if (mu <= 0.0) throw InvalidInput("mean photon number must be > 0");
  std::vector<double> probs;
  double p = std::exp(-mu);
  double cdf = 0.0;
  int n = 0;
  while (1.0 - cdf >= 1e-12) {
    probs.push_back(p);
    cdf += p;
    ++n;
    p *= mu / n;
  }
  for (double& q : probs) q /= cdf;
  return probs;
}

/// Mean optical energy per pulse, mu * h * c / lambda (joules).
inline double mean_pulse_energy(const SourceConfig& src) {
  validate(src);
  return src.mean_photon_number * kPlanck * kLightSpeed / src.wavelength_m;
}

/// Mean optical power of the pulsed source (watts).
inline double mean_power(const SourceConfig& src) {
  return mean_pulse_energy(src) * src.repetition_rate_hz;
}

struct LinkBudget {
  double channel_db = 0.0;
  double extra_db = 0.0;
  double total_db = 0.0;
  double survival_probability = 0.0;  // channel + extra losses, no detector
  double expected_signal_rate_hz = 0.0;
  double expected_background_t_hz = 0.0;
  double expected_background_r_hz = 0.0;
  double pulse_energy_j = 0.0;
  double source_power_w = 0.0;
};

inline LinkBudget link_budget(const LinkConfig& cfg) {
  validate(cfg);
  LinkBudget b;
  const double t_channel = transmittance(cfg.alpha_per_m, cfg.length_m);
  b.channel_db = loss_db(t_channel);
  b.extra_db = cfg.extra_loss_db;
  b.total_db = b.channel_db + cfg.extra_loss_db;
  b.survival_probability = t_channel * db_to_transmittance(cfg.extra_loss_db);
  b.expected_signal_rate_hz = cfg.source.repetition_rate_hz *
                              cfg.source.mean_photon_number *
                              db_to_transmittance(b.total_db) *
                              cfg.detectors.efficiency;
  b.expected_background_t_hz = cfg.detectors.apd1_on_transmitted
                                   ? cfg.detectors.dark_rate_1_hz
                                   : cfg.detectors.dark_rate_2_hz;
  b.expected_background_r_hz = cfg.detectors.apd1_on_transmitted
                                   ? cfg.detectors.dark_rate_2_hz
                                   : cfg.detectors.dark_rate_1_hz;
  b.pulse_energy_j = mean_pulse_energy(cfg.source);
  b.source_power_w = mean_power(cfg.source);
  return b;
}

// ---------------------------------------------------------------------------
// Link channel and Monte Carlo detection

/// Polarization process of the link, kept separate from the scalar photon
/// survival probability: loss acts classically on the flux while the chi
/// matrix describes what happens to the polarization of the photons that
/// do arrive.
struct LinkChannel {
  ProcessMatrix chi;
  double survival_probability;
};

inline LinkChannel build_link_channel(const LinkConfig& cfg) {
  validate(cfg);
  const double theta = cfg.noise.rotation_rad;
  const double w = cfg.noise.depolarizing_weight;
  Mat2 rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  // eps(rho) = (1-w) U rho U^dag + w I/2; chi is linear in the map.
  const Mat4 chi_rot = ProcessMatrix::of_unitary(rot).chi();
  const Mat4 chi_mix = 0.25 * Mat4::Identity();
  const double survival = transmittance(cfg.alpha_per_m, cfg.length_m) *
                          db_to_transmittance(cfg.extra_loss_db);
  return {ProcessMatrix((1.0 - w) * chi_rot + w * chi_mix), survival};
}

namespace detail {

/// Mean flux multiplier of the slow modulation over one integration window
/// starting at phase `phi`: averages 1 + m sin(w t + phi) over the window.
inline double fluctuation_multiplier(const FluctuationConfig& f, double phi,
                                     double duration_s) {
  if (f.relative_amplitude == 0.0) return 1.0;
  const double omega = 2.0 * M_PI / f.period_s;
  const double span = omega * duration_s;
  return 1.0 +
         f.relative_amplitude * (std::cos(phi) - std::cos(phi + span)) / span;
}

}  // namespace detail

/// Poisson-sample detector clicks for one setting using an explicit random
/// stream (per-detector substreams are derived from it).
inline CountRecord simulate_counts(const DensityMatrix& rho_out,
                                   const Measurement& m, const LinkConfig& cfg,
                                   double duration_s, const Rng& stream) {
  validate(cfg);
  if (duration_s <= 0.0) throw InvalidInput("duration must be > 0");
  const LinkBudget budget = link_budget(cfg);

  Rng fluct_stream = stream.substream("fluctuation");
  const double phi = fluct_stream.uniform(0.0, 2.0 * M_PI);
  const double s_rate =
      budget.expected_signal_rate_hz *
      detail::fluctuation_multiplier(cfg.fluctuation, phi, duration_s);

  const Mat2 proj = m.projector_plus();
  const double p_plus =
      std::clamp((proj * rho_out.matrix()).trace().real(), 0.0, 1.0);

  const double mean_t =
      (s_rate * p_plus + budget.expected_background_t_hz) * duration_s;
  const double mean_r =
      (s_rate * (1.0 - p_plus) + budget.expected_background_r_hz) * duration_s;

  Rng rng_t = stream.substream("detector/t");
  Rng rng_r = stream.substream("detector/r");
  CountRecord rec;
  rec.setting_angle_rad = m.setting_angle();
  rec.counts_t = rng_t.poisson(mean_t);
  rec.counts_r = rng_r.poisson(mean_r);
  rec.duration_s = duration_s;
  return rec;
}

/// Convenience overload: stream derived from the link seed and the setting
/// tag. Deterministic for a given (config, seed) no matter in which order
/// settings are simulated.
inline CountRecord simulate_counts(const DensityMatrix& rho_out,
                                   const Measurement& m, const LinkConfig& cfg,
                                   double duration_s) {
  return simulate_counts(rho_out, m, cfg, duration_s,
                         Rng(cfg.seed).substream(m.stream_tag()));
}

/// Dual-detector ratio, immune to overall flux fluctuation:
/// counts_t / (counts_t + counts_r).
inline double normalized_probability(const CountRecord& rec) {
  validate(rec);
  const std::int64_t total = rec.counts_t + rec.counts_r;
  if (total == 0)
    throw InvalidInput("cannot normalize a record with zero total counts");
  return static_cast<double>(rec.counts_t) / static_cast<double>(total);
}

}  // namespace uwq
