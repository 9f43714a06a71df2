#ifndef WALKLINE_IO_HPP
#define WALKLINE_IO_HPP

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "walkline/core_model.hpp"

namespace walkline {

using json = nlohmann::json;

class IoError : public Error {
 public:
  using Error::Error;
};

/// Shortest text that parses back to exactly 17 significant digits of v.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_real(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("not a number: '" + std::string(s) + "'");
  return v;
}

/// Grid axis from "lo:hi:count" (count points, both ends included) or a single value.
inline std::vector<double> parse_range(std::string_view spec) {
  const auto c1 = spec.find(':');
  if (c1 == std::string_view::npos) return {parse_real(spec)};
  const auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw IoError("range needs lo:hi:count, got '" + std::string(spec) + "'");
  const double lo = parse_real(spec.substr(0, c1));
  const double hi = parse_real(spec.substr(c1 + 1, c2 - c1 - 1));
  const std::string_view cs = spec.substr(c2 + 1);
  std::size_t count = 0;
  const auto res = std::from_chars(cs.data(), cs.data() + cs.size(), count);
  if (res.ec != std::errc() || res.ptr != cs.data() + cs.size())
    throw IoError("bad range count in '" + std::string(spec) + "'");
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {lo};
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(i + 1 == count ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return out;
}

// --- CSV ----------------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& cols) { row_strings(cols); }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

  void row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double c : cells) s.push_back(format_real(c));
    row_strings(s);
  }

 private:
  std::ostream& os_;
};

// --- JSON --------------------------------------------------------------------------------

namespace detail {

inline json real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json energy_json(const Energy& e) { return e.is_forbidden() ? json(nullptr) : json(e.value()); }

inline Energy energy_from_json(const json& j) {
  if (j.is_null()) return Energy::forbidden();
  return Energy(j.get<double>());
}

template <class T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// {"cutoff", "structure", "wall_mode", "rows": dense (M+1)x(M+1) table of P(y|x)}
inline json kernel_to_json(const WalkKernel& k) {
  json rows = json::array();
  for (std::size_t x = 0; x < k.states(); ++x) {
    json r = json::array();
    for (std::size_t y = 0; y < k.states(); ++y) r.push_back(k.prob(x, y));
    rows.push_back(std::move(r));
  }
  return json{{"cutoff", k.cutoff()},
              {"structure", std::string(to_string(k.structure()))},
              {"wall_mode", std::string(to_string(k.wall_mode()))},
              {"rows", std::move(rows)}};
}

inline WalkKernel kernel_from_json(const json& j) {
  const auto structure = parse_structure(detail::required<std::string>(j, "structure"));
  const auto wall = parse_wall_mode(detail::required<std::string>(j, "wall_mode"));
  if (!structure || !wall) throw IoError("unknown structure or wall_mode");
  const auto rows = detail::required<std::vector<std::vector<double>>>(j, "rows");
  const auto cutoff = detail::required<std::size_t>(j, "cutoff");
  if (rows.size() != cutoff + 1) throw IoError("kernel rows do not match the cutoff");
  for (const auto& r : rows)
    if (r.size() != rows.size()) throw IoError("kernel table is not square");
  return WalkKernel::from_dense(rows, *structure, *wall);
}

/// W(X,X) and W(X,X+1) go to "W_diag" and "W_offdiag"; wider models add "W_band" with
/// W_band[d][x] = W(x, x+d). null marks a forbidden pair.
inline json sos_to_json(const SosModel& m) {
  auto band = [&](std::size_t d) {
    json b = json::array();
    for (std::size_t x = 0; x + d < m.states(); ++x) b.push_back(detail::energy_json(m.W(x, x + d)));
    return b;
  };
  json V = json::array();
  for (double v : m.V) V.push_back(detail::real_or_null(v));
  json j{{"cutoff", m.cutoff()}, {"V", std::move(V)}, {"W_diag", band(0)}, {"W_offdiag", band(1)}};
  if (m.W.bandwidth() > 1) {
    json bands = json::array();
    for (std::size_t d = 0; d <= m.W.bandwidth(); ++d) bands.push_back(band(d));
    j["W_band"] = std::move(bands);
  }
  j["step_energy"] = m.step_energy;
  j["tail"] = m.tail ? json{{"delta", m.tail->delta}, {"gamma", m.tail->gamma}} : json(nullptr);
  if (!m.notes.empty()) j["notes"] = m.notes;
  return j;
}

inline SosModel sos_from_json(const json& j) {
  SosModel m;
  const auto cutoff = detail::required<std::size_t>(j, "cutoff");
  if (!j.contains("V") || !j["V"].is_array()) throw IoError("missing V");
  for (const auto& v : j["V"]) {
    if (v.is_null()) throw IoError("V must be finite");
    m.V.push_back(v.get<double>());
  }
  if (m.V.size() != cutoff + 1) throw IoError("V does not match the cutoff");
  json bands = json::array();
  if (j.contains("W_band")) {
    bands = j["W_band"];
  } else {
    if (!j.contains("W_diag") || !j.contains("W_offdiag")) throw IoError("missing W_diag / W_offdiag");
    bands.push_back(j["W_diag"]);
    bands.push_back(j["W_offdiag"]);
  }
  if (!bands.is_array() || bands.empty()) throw IoError("W bands must be a nonempty list");
  m.W = SymmetricEnergies(m.states(), bands.size() - 1);
  for (std::size_t d = 0; d < bands.size(); ++d) {
    if (!bands[d].is_array() || bands[d].size() != m.states() - std::min(d, m.states()))
      throw IoError("W band " + std::to_string(d) + " has the wrong length");
    for (std::size_t x = 0; x + d < m.states(); ++x) m.W.set(x, x + d, detail::energy_from_json(bands[d][x]));
  }
  m.step_energy = j.value("step_energy", 0.0);
  if (j.contains("tail") && !j["tail"].is_null())
    m.tail = PowerTail{detail::required<double>(j["tail"], "delta"), detail::required<double>(j["tail"], "gamma")};
  if (j.contains("notes")) m.notes = j["notes"].get<std::vector<std::string>>();
  return m;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace walkline

#endif  // WALKLINE_IO_HPP
