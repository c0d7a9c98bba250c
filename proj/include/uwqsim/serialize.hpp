#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwqsim/analysis.hpp"
#include "uwqsim/channel.hpp"
#include "uwqsim/photonics.hpp"
#include "uwqsim/qstate.hpp"
#include "uwqsim/rng.hpp"

namespace uwq {

/// Insertion-ordered JSON keeps report key order deterministic.
using ojson = nlohmann::ordered_json;

namespace detail {

/// Shortest-round-trip double formatting is already deterministic in the
/// JSON emitter; CSV cells use a fixed %.17g which round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Matrix>
ojson matrix_part_json(const Matrix& m, bool imag) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(imag ? m(r, c).imag() : m(r, c).real());
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Matrix>
Matrix matrix_from_parts(const ojson& re, const ojson& im, Eigen::Index dim,
                         const std::string& what) {
  if (!re.is_array() || !im.is_array() ||
      re.size() != static_cast<size_t>(dim) ||
      im.size() != static_cast<size_t>(dim))
    throw IoError(what + ": 're'/'im' must be " + std::to_string(dim) + "x" +
                  std::to_string(dim) + " arrays");
  Matrix m;
  for (Eigen::Index r = 0; r < dim; ++r) {
    const ojson& re_row = re[static_cast<size_t>(r)];
    const ojson& im_row = im[static_cast<size_t>(r)];
    if (!re_row.is_array() || !im_row.is_array() ||
        re_row.size() != static_cast<size_t>(dim) ||
        im_row.size() != static_cast<size_t>(dim))
      throw IoError(what + ": ragged matrix rows");
    for (Eigen::Index c = 0; c < dim; ++c) {
      const ojson& re_v = re_row[static_cast<size_t>(c)];
      const ojson& im_v = im_row[static_cast<size_t>(c)];
      if (!re_v.is_number() || !im_v.is_number())
        throw IoError(what + ": matrix entries must be numbers");
      m(r, c) = Complex(re_v.get<double>(), im_v.get<double>());
    }
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Density matrices and chi matrices

inline ojson density_to_json(const DensityMatrix& rho) {
  return {{"re", detail::matrix_part_json(rho.matrix(), false)},
          {"im", detail::matrix_part_json(rho.matrix(), true)}};
}

inline DensityMatrix density_from_json(const ojson& j) {
  if (!j.is_object() || !j.contains("re") || !j.contains("im"))
    throw IoError("density matrix JSON must be an object with 're' and 'im'");
  return DensityMatrix(
      detail::matrix_from_parts<Mat2>(j["re"], j["im"], 2, "density matrix"));
}

inline ojson chi_to_json(const ProcessMatrix& chi) {
  return {{"basis", {"I", "X", "Y", "Z"}},
          {"re", detail::matrix_part_json(chi.chi(), false)},
          {"im", detail::matrix_part_json(chi.chi(), true)}};
}

inline ProcessMatrix chi_from_json(const ojson& j) {
  if (!j.is_object() || !j.contains("re") || !j.contains("im"))
    throw IoError("chi JSON must be an object with 're' and 'im'");
  if (j.contains("basis")) {
    const ojson expected = {"I", "X", "Y", "Z"};
    if (j["basis"] != expected)
      throw IoError("chi JSON basis must be [\"I\",\"X\",\"Y\",\"Z\"]");
  }
  return ProcessMatrix(
      detail::matrix_from_parts<Mat4>(j["re"], j["im"], 4, "chi matrix"));
}

/// Per-element modulus and argument of chi, the bar-chart view of the
/// process matrix.
inline ojson chi_polar_json(const ProcessMatrix& chi) {
  ojson mod = ojson::array();
  ojson arg = ojson::array();
  for (int r = 0; r < 4; ++r) {
    ojson mrow = ojson::array();
    ojson arow = ojson::array();
    for (int c = 0; c < 4; ++c) {
      mrow.push_back(std::abs(chi.chi()(r, c)));
      arow.push_back(std::arg(chi.chi()(r, c)));
    }
    mod.push_back(std::move(mrow));
    arg.push_back(std::move(arow));
  }
  return {{"basis", {"I", "X", "Y", "Z"}},
          {"modulus", std::move(mod)},
          {"argument", std::move(arg)}};
}

inline ojson fit_to_json(const SinusoidFit& fit) {
  ojson cov = ojson::array();
  for (int r = 0; r < 3; ++r) {
    ojson row = ojson::array();
    for (int c = 0; c < 3; ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(std::move(row));
  }
  return {{"amplitude", fit.amplitude},
          {"offset", fit.offset},
          {"phase_rad", fit.phase_rad},
          {"visibility", fit.visibility},
          {"rms_residual", fit.rms_residual},
          {"covariance_basis", {"cos2theta", "sin2theta", "offset"}},
          {"covariance", std::move(cov)}};
}

// ---------------------------------------------------------------------------
// Plain files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return std::move(ss).str();
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCountCsvHeader =
    "setting_angle_rad,counts_t,counts_r,duration_s";

inline std::string count_records_to_csv(const std::vector<CountRecord>& recs) {
  std::string out = kCountCsvHeader;
  out += '\n';
  for (const CountRecord& r : recs) {
    out += detail::format_double(r.setting_angle_rad);
    out += ',';
    out += std::to_string(r.counts_t);
    out += ',';
    out += std::to_string(r.counts_r);
    out += ',';
    out += detail::format_double(r.duration_s);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_csv_double(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": not a number: '" + s + "'");
  }
}

inline std::int64_t parse_csv_int(const std::string& s,
                                  const std::string& where) {
  try {
    size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": not an integer: '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<CountRecord> count_records_from_csv(
    const std::string& text, const std::string& source_name = "counts csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw IoError(source_name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCountCsvHeader)
    throw IoError(source_name + ": expected header '" +
                  std::string(kCountCsvHeader) + "', got '" + line + "'");
  std::vector<CountRecord> recs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = source_name + " line " + std::to_string(lineno);
    if (fields.size() != 4)
      throw IoError(where + ": expected 4 fields, got " +
                    std::to_string(fields.size()));
    CountRecord r;
    r.setting_angle_rad = detail::parse_csv_double(fields[0], where);
    r.counts_t = detail::parse_csv_int(fields[1], where);
    r.counts_r = detail::parse_csv_int(fields[2], where);
    r.duration_s = detail::parse_csv_double(fields[3], where);
    try {
      validate(r);
    } catch (const InvalidInput& e) {
      throw IoError(where + ": " + e.what());
    }
    recs.push_back(r);
  }
  return recs;
}

inline std::string scan_to_csv(const CorrelationScan& scan) {
  std::string out = "angle_rad,counts\n";
  for (const ScanPoint& p : scan.points) {
    out += detail::format_double(p.angle_rad);
    out += ',';
    out += detail::format_double(p.value);
    out += '\n';
  }
  return out;
}

/// Accepts either value column name; the fit treats raw counts and
/// normalized probabilities identically.
inline CorrelationScan scan_from_csv(const std::string& text,
                                     const std::string& source_name =
                                         "scan csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(source_name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "angle_rad,counts" && line != "angle_rad,normalized")
    throw IoError(source_name +
                  ": expected header 'angle_rad,counts' or "
                  "'angle_rad,normalized', got '" +
                  line + "'");
  CorrelationScan scan;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = source_name + " line " + std::to_string(lineno);
    if (fields.size() != 2)
      throw IoError(where + ": expected 2 fields, got " +
                    std::to_string(fields.size()));
    scan.points.push_back({detail::parse_csv_double(fields[0], where),
                           detail::parse_csv_double(fields[1], where)});
  }
  return scan;
}

/// Stable hash of the effective configuration, recorded in report
/// provenance.
inline std::string config_hash(const ojson& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

}  // namespace uwq
