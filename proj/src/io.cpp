#include "mmiq/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmiq/errors.hpp"

namespace mmiq::io {

namespace {

std::pair<int, int> line_and_column(std::string_view text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

double number(const json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw ParseError(std::string("missing integer field \"") + key + "\"");
  return j.at(key).get<int>();
}

const json& array_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array())
    throw ParseError(std::string("missing array field \"") + key + "\"");
  return j.at(key);
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json pair_json(const ModePair& p) { return json::array({p.first, p.second}); }

std::vector<ModePair> pairs_from_json(const json& a) {
  std::vector<ModePair> pairs;
  for (const auto& p : a) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
        !p[1].is_number_integer())
      throw ParseError("pair labels must be two-element integer arrays");
    try {
      pairs.push_back(make_mode_pair(p[0].get<int>(), p[1].get<int>()));
    } catch (const ValidationError& e) {
      throw ParseError(e.what());
    }
  }
  return pairs;
}

Eigen::MatrixXd real_grid(const json& a, const char* what) {
  if (!a.is_array() || a.empty() || !a[0].is_array())
    throw ParseError(std::string(what) + " must be a non-empty array of arrays");
  const auto cols = a[0].size();
  Eigen::MatrixXd m(a.size(), cols);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array() || a[i].size() != cols)
      throw ShapeError(std::string(what) + " is ragged at row " + std::to_string(i + 1));
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = number(a[i][k], what);
  }
  return m;
}

json real_grid_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(nullable(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("JSON parse error at line " + std::to_string(line) + ", column " +
                     std::to_string(column) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw FileError("write failed for " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf, end);
}

json to_json(const TransitionMatrix& m) {
  json entries = json::array();
  for (int i = 0; i < m.n_inputs(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.n_outputs(); ++k) {
      const Complex z = m.entries()(i, k);
      row.push_back(json::array({z.real(), z.imag()}));
    }
    entries.push_back(std::move(row));
  }
  return {{"n_inputs", m.n_inputs()}, {"n_outputs", m.n_outputs()}, {"entries", entries}};
}

TransitionMatrix matrix_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("matrix JSON must be an object");
  const int n_in = integer(j, "n_inputs");
  const int n_out = integer(j, "n_outputs");
  const auto& entries = array_field(j, "entries");
  if (static_cast<int>(entries.size()) != n_in)
    throw ShapeError("\"entries\" has " + std::to_string(entries.size()) + " rows, n_inputs is " +
                     std::to_string(n_in));
  std::vector<std::vector<Complex>> rows;
  for (const auto& row : entries) {
    if (!row.is_array() || static_cast<int>(row.size()) != n_out)
      throw ShapeError("every row of \"entries\" needs n_outputs = " + std::to_string(n_out) +
                       " entries");
    std::vector<Complex> r;
    for (const auto& z : row) {
      if (!z.is_array() || z.size() != 2)
        throw ParseError("matrix entries must be [re, im] pairs");
      r.emplace_back(number(z[0], "re"), number(z[1], "im"));
    }
    rows.push_back(std::move(r));
  }
  return make_transition_matrix(rows);
}

json to_json(const VisibilityMatrix& v) {
  json in = json::array(), out = json::array(), values = json::array();
  for (const auto& p : v.input_pairs()) in.push_back(pair_json(p));
  for (const auto& p : v.output_pairs()) out.push_back(pair_json(p));
  for (int r = 0; r < v.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < v.cols(); ++c) row.push_back(nullable(v.at(r, c)));
    values.push_back(std::move(row));
  }
  return {{"input_pairs", in}, {"output_pairs", out}, {"values", values}};
}

VisibilityMatrix visibility_from_json(const json& j) {
  VisibilityMatrix v(pairs_from_json(array_field(j, "input_pairs")),
                     pairs_from_json(array_field(j, "output_pairs")));
  const auto& values = array_field(j, "values");
  if (static_cast<int>(values.size()) != v.rows())
    throw ShapeError("\"values\" row count does not match input_pairs");
  for (int r = 0; r < v.rows(); ++r) {
    const auto& row = values[r];
    if (!row.is_array() || static_cast<int>(row.size()) != v.cols())
      throw ShapeError("\"values\" column count does not match output_pairs");
    for (int c = 0; c < v.cols(); ++c)
      v.set(r, c, row[c].is_null() ? std::nullopt : std::optional(number(row[c], "visibility")));
  }
  return v;
}

json to_json(const MagnitudeGrid& g) {
  json j = {{"values", real_grid_json(g.values)}};
  if (g.uncertainty) j["uncertainty"] = real_grid_json(*g.uncertainty);
  return j;
}

MagnitudeGrid magnitudes_from_json(const json& j) {
  MagnitudeGrid g;
  if (j.is_array()) {
    g.values = real_grid(j, "magnitudes");
  } else {
    g.values = real_grid(array_field(j, "values"), "magnitudes");
    if (j.contains("uncertainty") && !j.at("uncertainty").is_null())
      g.uncertainty = real_grid(j.at("uncertainty"), "uncertainty");
  }
  g.validate();
  return g;
}

json to_json(const DipFit& fit) {
  return {{"visibility", fit.visibility},
          {"visibility_stderr", fit.visibility_stderr},
          {"fwhm_um", fit.fwhm_um},
          {"baseline", fit.baseline},
          {"slope", fit.slope},
          {"center_um", fit.center_um},
          {"residual_rms", fit.residual_rms},
          {"chi2", fit.chi2},
          {"iterations", fit.iterations}};
}

json to_json(const ReconstructionOptions& o) {
  return {{"mode", o.mode == ReconstructionMode::fixed_magnitudes ? "fixed-magnitudes"
                                                                   : "joint-refinement"},
          {"magnitude_penalty_weight", o.magnitude_penalty_weight},
          {"default_relative_uncertainty", o.default_relative_uncertainty},
          {"starts", o.starts},
          {"seed", o.seed},
          {"max_iterations", o.max_iterations},
          {"convergence_tol", o.convergence_tol},
          {"gradient_step", o.gradient_step},
          {"c_min", o.c_min}};
}

json to_json(const ReconstructionResult& result, const VisibilityMatrix& measured) {
  json per_start = json::array(), per_start_iterations = json::array();
  for (const auto& s : result.starts) {
    per_start.push_back(nullable(s.objective));
    per_start_iterations.push_back(s.iterations);
  }
  json excluded = json::array();
  for (const auto& c : result.excluded_cells)
    excluded.push_back({{"input", pair_json(c.input)}, {"output", pair_json(c.output)}});
  json table = json::array();
  for (const auto& row : residual_report(result, measured))
    table.push_back({{"input", pair_json(row.input)},
                     {"output", pair_json(row.output)},
                     {"measured", nullable(row.measured)},
                     {"reconstructed", nullable(row.reconstructed)},
                     {"residual", nullable(row.residual)},
                     {"included", row.included}});
  json alternatives = json::array();
  for (const auto& m : result.alternative_solutions) alternatives.push_back(to_json(m));
  return {{"matrix", to_json(result.matrix)},
          {"conjugated", result.conjugated},
          {"objective", result.objective},
          {"best_start", result.best_start},
          {"iterations_used", result.iterations_used},
          {"underdetermined", result.underdetermined},
          {"per_start_objectives", per_start},
          {"per_start_iterations", per_start_iterations},
          {"excluded_cells", excluded},
          {"residuals", table},
          {"alternative_solutions", alternatives},
          {"options", to_json(result.options)}};
}

json to_json(const std::map<PhotonConfiguration, double>& distribution) {
  json out = json::array();
  for (const auto& [config, p] : distribution)
    out.push_back({{"output", config.occupations}, {"probability", p}});
  return out;
}

std::string trace_to_csv(const DipTrace& trace) {
  const bool acc = trace.has_accidentals();
  std::string out = acc ? "delay_um,coincidences,accidentals\n" : "delay_um,coincidences\n";
  for (const auto& s : trace.samples) {
    out += format_double(s.delay_um);
    out += ',';
    out += format_double(s.coincidences);
    if (acc) {
      out += ',';
      out += format_double(*s.accidentals);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
  }
  return fields;
}

double parse_number(std::string_view field, int line) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [end, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc{} || end != last)
    throw ParseError("trace CSV line " + std::to_string(line) + ": cannot read number \"" +
                     std::string(field) + "\"");
  return v;
}

}  // namespace

DipTrace trace_from_csv(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  DipTrace trace;
  bool header_seen = false;
  bool with_accidentals = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto fields = split(line);
    if (!header_seen) {
      if (fields.size() < 2 || fields.size() > 3 || fields[0] != "delay_um" ||
          fields[1] != "coincidences" || (fields.size() == 3 && fields[2] != "accidentals"))
        throw ParseError("trace CSV header must be delay_um,coincidences[,accidentals]");
      with_accidentals = fields.size() == 3;
      header_seen = true;
      continue;
    }
    if (fields.size() != (with_accidentals ? 3u : 2u))
      throw ParseError("trace CSV line " + std::to_string(line_no) + ": expected " +
                       (with_accidentals ? "3" : "2") + " fields");
    DipSample s{parse_number(fields[0], line_no), parse_number(fields[1], line_no),
                std::nullopt};
    if (with_accidentals) s.accidentals = parse_number(fields[2], line_no);
    trace.samples.push_back(s);
  }
  if (!header_seen) throw ParseError("trace CSV is empty");
  try {
    trace.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string("trace CSV: ") + e.what());
  }
  return trace;
}

}  // namespace mmiq::io
