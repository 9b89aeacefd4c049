#include "enkf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace enkf {

namespace {

using nlohmann::ordered_json;

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_field_double(const std::string& s, const std::string& path) {
  if (s.empty()) return 0.0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw IoError("malformed number '" + s + "' in " + path);
  }
  return v;
}

long long parse_field_int(const std::string& s, const std::string& path) {
  if (s.empty()) return 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw IoError("malformed integer '" + s + "' in " + path);
  }
  return v;
}

constexpr const char* kResultsHeader =
    "row_kind,j,epsilon,replicate,phi,error,rms,rms_stderr,dg,max_gap";

ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json mat_json(const Mat& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

ordered_json config_echo(const SweepConfig& c) {
  ordered_json j;
  j["dim_d"] = c.family.dim_d();
  j["dim_k"] = c.family.dim_k();
  j["a_matrix"] = mat_json(c.family.a_matrix);
  j["b_vector"] = vec_json(c.family.b_vector);
  j["h_matrix"] = mat_json(c.family.h_matrix);
  j["h_offset"] = vec_json(c.family.h_offset);
  j["sigma"] = mat_json(c.family.sigma);
  j["gamma"] = mat_json(c.family.gamma);
  j["n_steps"] = c.n_steps;
  j["j_values"] = c.j_values;
  j["epsilon_values"] = c.epsilon_values;
  j["n_replicates"] = c.n_replicates;
  j["test_functions"] = c.test_functions;
  j["base_seed"] = c.base_seed;
  j["grid"] = {{"cells", c.grid_cells},
               {"joint_y_cells", c.joint_y_cells},
               {"padding_sigmas", c.grid_padding},
               {"extent", {c.extent_lo, c.extent_hi}}};
  j["bands"] = {{"j_slope", {c.j_slope_lo, c.j_slope_hi}},
                {"eps_slope", {c.eps_slope_lo, c.eps_slope_hi}}};
  return j;
}

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
};

struct PlotData {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotPoint> points;
};

PlotData plot_data(const std::vector<ResultsRow>& rows) {
  PlotData data;
  const bool eps_sweep =
      std::any_of(rows.begin(), rows.end(), [](const ResultsRow& r) {
        return r.row_kind == "epsilon";
      });
  if (eps_sweep) {
    data.title = "sweep-eps";
    data.x_label = "epsilon";
    data.y_label = "d_g";
    for (const ResultsRow& r : rows) {
      if (r.row_kind == "epsilon" && r.epsilon > 0.0 && r.dg > 0.0) {
        data.points.push_back({r.epsilon, r.dg});
      }
    }
  } else {
    data.title = "sweep-j";
    data.x_label = "J";
    data.y_label = "rms error";
    std::string phi0;
    for (const ResultsRow& r : rows) {
      if (r.row_kind != "aggregate") continue;
      if (phi0.empty()) phi0 = r.phi;
      if (r.phi == phi0 && r.j > 0 && r.rms > 0.0) {
        data.points.push_back({static_cast<double>(r.j), r.rms});
      }
    }
  }
  if (data.points.empty()) {
    throw InsufficientDataError("rates plot: no plottable sweep cells");
  }
  return data;
}

void render_svg(std::ostream& os, const PlotData& data) {
  constexpr int kW = 640;
  constexpr int kH = 480;
  constexpr int kLeft = 78;
  constexpr int kRight = 24;
  constexpr int kTop = 46;
  constexpr int kBottom = 64;
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  for (const PlotPoint& p : data.points) {
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
    y_min = std::min(y_min, p.y);
    y_max = std::max(y_max, p.y);
  }
  double lx0 = std::floor(std::log10(x_min));
  double lx1 = std::ceil(std::log10(x_max));
  double ly0 = std::floor(std::log10(y_min));
  double ly1 = std::ceil(std::log10(y_max));
  if (lx1 <= lx0) lx1 = lx0 + 1.0;
  if (ly1 <= ly0) ly1 = ly0 + 1.0;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  const auto px = [&](double x) {
    return kLeft + (std::log10(x) - lx0) / (lx1 - lx0) * plot_w;
  };
  const auto py = [&](double y) {
    return kH - kBottom - (std::log10(y) - ly0) / (ly1 - ly0) * plot_h;
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
     << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
     << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH
     << "\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"26\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"16\">"
     << data.title << " (log-log)</text>\n";

  // Decade gridlines and tick labels.
  for (int e = static_cast<int>(lx0); e <= static_cast<int>(lx1); ++e) {
    const double x = px(std::pow(10.0, e));
    os << "<line x1=\"" << fmt2(x) << "\" y1=\"" << kTop << "\" x2=\""
       << fmt2(x) << "\" y2=\"" << kH - kBottom
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt2(x) << "\" y=\"" << kH - kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">1e"
       << e << "</text>\n";
  }
  for (int e = static_cast<int>(ly0); e <= static_cast<int>(ly1); ++e) {
    const double y = py(std::pow(10.0, e));
    os << "<line x1=\"" << kLeft << "\" y1=\"" << fmt2(y) << "\" x2=\""
       << kW - kRight << "\" y2=\"" << fmt2(y)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt2(y + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">1e"
       << e << "</text>\n";
  }
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
     << fmt2(plot_w) << "\" height=\"" << fmt2(plot_h)
     << "\" fill=\"none\" stroke=\"#444444\"/>\n";

  // Fitted rate line over the data range, when a fit is possible.
  if (data.points.size() >= 3) {
    std::vector<std::pair<double, double>> pts;
    for (const PlotPoint& p : data.points) pts.emplace_back(p.x, p.y);
    bool fitted = true;
    RateFit fit;
    try {
      fit = fit_rate(pts);
    } catch (const Error&) {
      fitted = false;
    }
    if (fitted) {
      const double ya = std::exp(fit.intercept) * std::pow(x_min, fit.slope);
      const double yb = std::exp(fit.intercept) * std::pow(x_max, fit.slope);
      os << "<line x1=\"" << fmt2(px(x_min)) << "\" y1=\"" << fmt2(py(ya))
         << "\" x2=\"" << fmt2(px(x_max)) << "\" y2=\"" << fmt2(py(yb))
         << "\" stroke=\"#d07020\" stroke-width=\"2\"/>\n";
      char label[64];
      std::snprintf(label, sizeof(label), "slope %.3f", fit.slope);
      os << "<text x=\"" << kW - kRight - 8 << "\" y=\"" << kTop + 18
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
            "font-size=\"12\" fill=\"#d07020\">"
         << label << "</text>\n";
    }
  }

  for (const PlotPoint& p : data.points) {
    os << "<circle cx=\"" << fmt2(px(p.x)) << "\" cy=\"" << fmt2(py(p.y))
       << "\" r=\"4\" fill=\"#3b6ea5\"/>\n";
  }

  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 18
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\">"
     << data.x_label << "</text>\n";
  os << "<text x=\"20\" y=\"" << kTop + plot_h / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\" transform=\"rotate(-90 20 "
     << fmt2(kTop + plot_h / 2) << ")\">" << data.y_label << "</text>\n";
  os << "</svg>\n";
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for checksum: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

// ---------------------------------------------------------------------------
// results.csv

std::vector<ResultsRow> rows_from_report(const SweepReport& report) {
  std::vector<ResultsRow> rows;
  const std::vector<std::string>& phis = report.config.test_functions;
  for (const RunRecord& rec : report.records) {
    for (std::size_t p = 0; p < phis.size(); ++p) {
      ResultsRow row;
      row.row_kind = "replicate";
      row.j = rec.j;
      row.epsilon = rec.epsilon;
      row.replicate = rec.replicate;
      row.phi = phis[p];
      row.error = rec.phi_errors[p].back();
      rows.push_back(std::move(row));
    }
  }
  for (const CellAggregate& cell : report.cells) {
    for (std::size_t p = 0; p < phis.size(); ++p) {
      ResultsRow row;
      row.row_kind = "aggregate";
      row.j = cell.j;
      row.epsilon = cell.epsilon;
      row.phi = phis[p];
      row.rms = cell.rms[p];
      row.rms_stderr = cell.rms_stderr[p];
      rows.push_back(std::move(row));
    }
  }
  if (report.kind == "sweep-eps") {
    for (const CellAggregate& cell : report.cells) {
      ResultsRow row;
      row.row_kind = "epsilon";
      row.epsilon = cell.epsilon;
      row.dg = cell.dg;
      row.max_gap = cell.max_gap;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_results_csv(const SweepReport& report, const std::string& path) {
  std::ofstream out = open_out(path);
  out << kResultsHeader << "\n";
  for (const ResultsRow& row : rows_from_report(report)) {
    out << row.row_kind << ",";
    if (row.row_kind == "replicate") {
      out << row.j << "," << fmt17(row.epsilon) << "," << row.replicate << ","
          << row.phi << "," << fmt17(row.error) << ",,,,";
    } else if (row.row_kind == "aggregate") {
      out << row.j << "," << fmt17(row.epsilon) << ",," << row.phi << ",,"
          << fmt17(row.rms) << "," << fmt17(row.rms_stderr) << ",,";
    } else {  // epsilon
      out << "," << fmt17(row.epsilon) << ",,,,,," << fmt17(row.dg) << ","
          << fmt17(row.max_gap);
    }
    out << "\n";
  }
  finish_out(out, path);
}

std::vector<ResultsRow> parse_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw IoError("unexpected results.csv header in " + path);
  }
  std::vector<ResultsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 10) {
      throw IoError("wrong field count in results row of " + path);
    }
    ResultsRow row;
    row.row_kind = f[0];
    if (row.row_kind != "replicate" && row.row_kind != "aggregate" &&
        row.row_kind != "epsilon") {
      throw IoError("unknown row kind '" + row.row_kind + "' in " + path);
    }
    row.j = parse_field_int(f[1], path);
    row.epsilon = parse_field_double(f[2], path);
    row.replicate = static_cast<int>(parse_field_int(f[3], path));
    row.phi = f[4];
    row.error = parse_field_double(f[5], path);
    row.rms = parse_field_double(f[6], path);
    row.rms_stderr = parse_field_double(f[7], path);
    row.dg = parse_field_double(f[8], path);
    row.max_gap = parse_field_double(f[9], path);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// report.json / rates.svg / manifest.json

void write_report_json(const SweepReport& report, const std::string& path) {
  ordered_json root;
  root["schema_version"] = kSchemaVersion;
  root["kind"] = report.kind;
  const ordered_json config = config_echo(report.config);
  root["config"] = config;
  root["config_hash"] = hash_hex(fnv1a64(config.dump()));
  root["seeds"] = {{"base_seed", report.config.base_seed}};
  ordered_json rates = ordered_json::array();
  for (std::size_t i = 0; i < report.rate_fits.size(); ++i) {
    rates.push_back({{"label", report.rate_labels[i]},
                     {"slope", report.rate_fits[i].slope},
                     {"intercept", report.rate_fits[i].intercept},
                     {"slope_stderr", report.rate_fits[i].slope_stderr}});
  }
  root["rates"] = rates;
  if (report.kind == "sweep-eps") {
    root["epsilon_floor"] = report.epsilon_floor;
    root["epsilon_zero_dg"] = report.epsilon_zero_dg;
    root["refinement_delta"] = report.refinement_delta;
  }
  ordered_json cells = ordered_json::array();
  for (const CellAggregate& cell : report.cells) {
    ordered_json c;
    c["j"] = cell.j;
    c["epsilon"] = cell.epsilon;
    c["rms"] = cell.rms;
    c["rms_stderr"] = cell.rms_stderr;
    if (report.kind == "sweep-eps") {
      c["dg"] = cell.dg;
      c["max_gap"] = cell.max_gap;
    }
    cells.push_back(c);
  }
  root["cells"] = cells;
  std::ofstream out = open_out(path);
  out << root.dump(2) << "\n";
  finish_out(out, path);
}

void write_rates_svg(const SweepReport& report, const std::string& path) {
  write_rates_svg(rows_from_report(report), path);
}

void write_rates_svg(const std::vector<ResultsRow>& rows,
                     const std::string& path) {
  const PlotData data = plot_data(rows);
  std::ofstream out = open_out(path);
  render_svg(out, data);
  finish_out(out, path);
}

ArtifactPaths emit_report(const SweepReport& report,
                          const std::string& out_dir) {
  if (report.records.empty()) {
    throw InsufficientDataError("emit_report: report holds no run records");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);
  ArtifactPaths paths;
  const std::string results = out_dir + "/results.csv";
  const std::string json_path = out_dir + "/report.json";
  const std::string svg = out_dir + "/rates.svg";
  write_results_csv(report, results);
  write_report_json(report, json_path);
  write_rates_svg(report, svg);
  paths.paths = {results, json_path, svg};
  return paths;
}

void write_manifest(const std::string& out_dir, std::uint64_t config_hash,
                    std::uint64_t seed,
                    const std::vector<std::string>& artifact_paths) {
  ordered_json root;
  root["schema_version"] = kSchemaVersion;
  root["config_hash"] = hash_hex(config_hash);
  root["seed"] = seed;
  ordered_json artifacts = ordered_json::array();
  for (const std::string& p : artifact_paths) {
    artifacts.push_back(
        {{"path", std::filesystem::path(p).filename().string()},
         {"checksum", hash_hex(file_checksum(p))}});
  }
  root["artifacts"] = artifacts;
  const std::string path = out_dir + "/manifest.json";
  std::ofstream out = open_out(path);
  out << root.dump(2) << "\n";
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Trajectory / posterior / density CSV

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  if (traj.states.empty()) {
    throw InsufficientDataError("write_trajectory_csv: empty trajectory");
  }
  const Eigen::Index d = traj.states[0].size();
  const Eigen::Index k =
      traj.observations.empty() ? 0 : traj.observations[0].size();
  const Eigen::Index width = std::max(d, k);
  std::ofstream out = open_out(path);
  out << "kind,step";
  for (Eigen::Index c = 0; c < width; ++c) out << ",c" << c;
  out << "\n";
  const auto write_row = [&](const char* kind, std::size_t step,
                             const Vec& v) {
    out << kind << "," << step;
    for (Eigen::Index c = 0; c < width; ++c) {
      out << ",";
      if (c < v.size()) out << fmt17(v[c]);
    }
    out << "\n";
  };
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    write_row("state", n, traj.states[n]);
  }
  for (std::size_t n = 0; n < traj.observations.size(); ++n) {
    write_row("obs", n + 1, traj.observations[n]);
  }
  finish_out(out, path);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("kind,step", 0) != 0) {
    throw IoError("unexpected trajectory header in " + path);
  }
  std::vector<std::pair<std::size_t, Vec>> states;
  std::vector<std::pair<std::size_t, Vec>> observations;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() < 3) throw IoError("short trajectory row in " + path);
    std::vector<double> vals;
    for (std::size_t i = 2; i < f.size(); ++i) {
      if (!f[i].empty()) vals.push_back(parse_field_double(f[i], path));
    }
    Vec v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = vals[i];
    }
    const auto step =
        static_cast<std::size_t>(parse_field_int(f[1], path));
    if (f[0] == "state") {
      states.emplace_back(step, std::move(v));
    } else if (f[0] == "obs") {
      observations.emplace_back(step, std::move(v));
    } else {
      throw IoError("unknown trajectory row kind '" + f[0] + "' in " + path);
    }
  }
  Trajectory traj;
  traj.states.resize(states.size());
  traj.observations.resize(observations.size());
  for (auto& [step, v] : states) {
    if (step >= states.size()) throw IoError("state steps not contiguous in " + path);
    traj.states[step] = std::move(v);
  }
  for (auto& [step, v] : observations) {
    if (step < 1 || step > observations.size()) {
      throw IoError("observation steps not contiguous in " + path);
    }
    traj.observations[step - 1] = std::move(v);
  }
  if (traj.states.size() != traj.observations.size() + 1) {
    throw IoError("trajectory must hold N+1 states and N observations: " +
                  path);
  }
  return traj;
}

void write_posterior_csv(const std::vector<GaussianMoments>& posteriors,
                         const std::string& path) {
  if (posteriors.empty()) {
    throw InsufficientDataError("write_posterior_csv: no posteriors");
  }
  const int d = posteriors[0].dim();
  std::ofstream out = open_out(path);
  out << "step";
  for (int i = 0; i < d; ++i) out << ",mean_" << i;
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) out << ",cov_" << r << "_" << c;
  }
  out << "\n";
  for (std::size_t n = 0; n < posteriors.size(); ++n) {
    out << (n + 1);
    for (int i = 0; i < d; ++i) out << "," << fmt17(posteriors[n].mean[i]);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        out << "," << fmt17(posteriors[n].cov(r, c));
      }
    }
    out << "\n";
  }
  finish_out(out, path);
}

void write_density_csv(const GridDensity& density, const std::string& path) {
  std::ofstream out = open_out(path);
  for (int a = 0; a < density.dim(); ++a) {
    out << "c" << a << ",";
  }
  out << "value\n";
  for (Eigen::Index i = 0; i < density.n_cells(); ++i) {
    const Vec c = density.center(i);
    for (int a = 0; a < density.dim(); ++a) out << fmt17(c[a]) << ",";
    out << fmt17(density.values[i]) << "\n";
  }
  finish_out(out, path);
}

}  // namespace enkf
