#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "icl_sfm/errors.hpp"
#include "icl_sfm/harness.hpp"

namespace icl_sfm {

// %.17g, so values round-trip exactly.
[[nodiscard]] inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Column order of the run CSV. The leading block is fixed; world-frame and
// ISS columns follow it.
[[nodiscard]] inline std::vector<std::string> run_csv_header(std::size_t n) {
  std::vector<std::string> h{"t"};
  const auto per = [&](const std::string& stem) {
    for (std::size_t i = 0; i < n; ++i) {
      h.push_back(stem + "_" + std::to_string(i));
    }
  };
  for (const char* kind : {"true", "hat", "tilde"}) {
    per(std::string("d_c_s_") + kind);
    h.push_back(std::string("d_c_g_") + kind);
    per(std::string("d_g_s_") + kind);
  }
  for (const char* stem : {"p_cg", "p_hat_cg", "v_c"}) {
    for (const char* axis : {"x", "y", "z"}) {
      h.push_back(std::string(stem) + "_" + axis);
    }
  }
  per("sigma_Y");
  per("tau_flag");
  h.push_back("L");
  h.push_back("Jstar");
  per("cond");
  h.push_back("cost");
  for (const char* stem : {"p_cg_world", "p_hat_cg_world", "v_world", "v_world_literal"}) {
    for (const char* axis : {"x", "y", "z"}) {
      h.push_back(std::string(stem) + "_" + axis);
    }
  }
  h.push_back("iss_threshold");
  per("d_g_s_batch");
  return h;
}

namespace detail {

inline void join_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

inline void push3(std::vector<std::string>& c, const Vec3& v) {
  for (int k = 0; k < 3; ++k) c.push_back(format_number(v(k)));
}

}  // namespace detail

inline void write_run_csv(std::ostream& os, const RunLog& log) {
  const std::size_t n = log.n_features;
  detail::join_line(os, run_csv_header(n));
  std::vector<std::string> c;
  for (const RunRow& r : log.rows) {
    c.clear();
    c.push_back(format_number(r.t));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.d_c_s_true[i]));
    c.push_back(format_number(r.d_c_g_true));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.d_g_s_true[i]));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.d_c_s_hat[i]));
    c.push_back(format_number(r.d_c_g_hat));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.d_g_s_hat[i]));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.d_c_s_tilde(i)));
    c.push_back(format_number(r.d_c_g_tilde()));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.d_g_s_tilde(i)));
    detail::push3(c, r.p_c_g);
    detail::push3(c, r.p_hat_c_g);
    detail::push3(c, r.v_c);
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.sigma_y[i]));
    for (std::size_t i = 0; i < n; ++i) c.push_back(std::to_string(r.tau_flag[i]));
    c.push_back(format_number(r.lyapunov));
    c.push_back(format_number(r.j_star));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.cond[i]));
    c.push_back(format_number(r.cost));
    detail::push3(c, r.p_c_g_world);
    detail::push3(c, r.p_hat_c_g_world);
    detail::push3(c, r.v_world);
    detail::push3(c, r.v_world_literal);
    c.push_back(format_number(r.iss_threshold));
    for (std::size_t i = 0; i < n; ++i) c.push_back(format_number(r.batch[i]));
    detail::join_line(os, c);
  }
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& s) {
  os << "gamma,avg_cond,final_pos_err,total_cost\n";
  for (const SweepRow& r : s.rows) {
    os << format_number(r.gamma) << ',' << format_number(r.avg_cond) << ',' << format_number(r.final_pos_err)
       << ',' << format_number(r.total_cost) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Minimal SVG line and bar charts. Coordinates are printed with fixed
// precision so output bytes depend only on the data.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::size_t max_points = 2000;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return colors[i % (sizeof colors / sizeof colors[0])];
}

inline std::string fx(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace detail

[[nodiscard]] inline std::string render_line_plot(const PlotSpec& plot, const std::vector<Series>& series) {
  constexpr double W = 800, H = 500, L = 80, R = 160, T = 50, B = 60;
  const auto ty = [&](double y) { return plot.log_y ? std::log10(std::max(std::abs(y), 1e-300)) : y; };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Series& s : series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if (plot.log_y && s.y[k] == 0.0) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  }
  if (!std::isfinite(x0)) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << detail::escape(plot.title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const double xp = L + (W - L - R) * k / 4.0;
    const double yp = H - B - (H - T - B) * k / 4.0;
    os << "<text x=\"" << detail::fx(xp) << "\" y=\"" << H - B + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << detail::tick(xv) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << detail::fx(yp + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << (plot.log_y ? "1e" + detail::tick(yv) : detail::tick(yv)) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << detail::escape(plot.x_label)
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 18 " << (T + H - B) / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << detail::escape(plot.y_label)
     << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / std::max<std::size_t>(1, plot.max_points));
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << detail::palette(si) << "\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < s.x.size(); k += stride) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k]) || (plot.log_y && s.y[k] == 0.0)) continue;
      if (!first) os << ' ';
      os << detail::fx(px(s.x[k])) << ',' << detail::fx(py(s.y[k]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = T + 16 + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << detail::palette(si) << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << detail::escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Bar chart of average condition number per gamma, with the table printed
// beneath it.
[[nodiscard]] inline std::string render_sweep_plot(const SweepResult& s) {
  constexpr double W = 800, H = 520, L = 80, R = 40, T = 50, B = 200;
  double ymax = 0.0;
  for (const SweepRow& r : s.rows) {
    if (std::isfinite(r.avg_cond)) ymax = std::max(ymax, r.avg_cond);
  }
  if (ymax <= 0.0) ymax = 1.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2
     << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">Average condition number vs "
        "orthogonality penalty</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  const std::size_t n = s.rows.size();
  const double slot = n ? (W - L - R) / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const SweepRow& r = s.rows[i];
    const double h = std::isfinite(r.avg_cond) ? r.avg_cond / ymax * (H - T - B) : 0.0;
    const double x = L + slot * static_cast<double>(i) + 0.15 * slot;
    os << "<rect x=\"" << detail::fx(x) << "\" y=\"" << detail::fx(H - B - h) << "\" width=\"" << detail::fx(0.7 * slot)
       << "\" height=\"" << detail::fx(h) << "\" fill=\"#1f77b4\"/>\n";
    os << "<text x=\"" << detail::fx(x + 0.35 * slot) << "\" y=\"" << H - B + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">gamma=" << detail::tick(r.gamma)
       << "</text>\n";
  }
  os << "<text x=\"" << L - 6 << "\" y=\"" << T + 4
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::tick(ymax) << "</text>\n";
  os << "<text x=\"" << L - 6 << "\" y=\"" << H - B + 4
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">0</text>\n";
  double row_y = H - B + 50;
  os << "<text x=\"" << L << "\" y=\"" << row_y
     << "\" font-family=\"monospace\" font-size=\"12\">gamma      avg_cond       final_pos_err  total_cost</text>\n";
  for (const SweepRow& r : s.rows) {
    row_y += 16;
    char line[160];
    std::snprintf(line, sizeof line, "%-10.4g %-14.6g %-14.6g %-14.6g", r.gamma, r.avg_cond, r.final_pos_err,
                  r.total_cost);
    os << "<text x=\"" << L << "\" y=\"" << row_y << "\" font-family=\"monospace\" font-size=\"12\" xml:space=\"preserve\">"
       << line << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open for writing: " + path.string());
  }
  f << content;
  f.flush();
  if (!f) {
    throw IoError("write failed: " + path.string());
  }
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory: " + dir.string());
  }
}

template <typename F>
Series series_of(const RunLog& log, std::string label, F value) {
  Series s{std::move(label), {}, {}};
  s.x.reserve(log.rows.size());
  s.y.reserve(log.rows.size());
  for (const RunRow& r : log.rows) {
    s.x.push_back(r.t);
    s.y.push_back(value(r));
  }
  return s;
}

}  // namespace detail

// Writes run.csv and one SVG per plotted quantity. Returns the files written.
inline std::vector<std::filesystem::path> emit_artifacts(const RunLog& log, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  std::vector<std::filesystem::path> files;
  const auto put = [&](const std::string& name, const std::string& content) {
    const auto path = out_dir / name;
    detail::write_file(path, content);
    files.push_back(path);
  };

  std::ostringstream csv;
  write_run_csv(csv, log);
  put("run.csv", csv.str());

  const std::size_t n = log.n_features;
  const auto per_feature = [&](const std::string& stem, auto value) {
    std::vector<Series> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(detail::series_of(log, stem + " " + std::to_string(i), [&](const RunRow& r) { return value(r, i); }));
    }
    return out;
  };

  put("error_d_c_s.svg",
      render_line_plot({"Camera-to-feature distance error", "t [s]", "|error| [m]", true},
                       per_feature("feature", [](const RunRow& r, std::size_t i) { return std::abs(r.d_c_s_tilde(i)); })));
  put("error_d_c_g.svg",
      render_line_plot({"Camera-to-goal distance error", "t [s]", "|error| [m]", true},
                       {detail::series_of(log, "goal", [](const RunRow& r) { return std::abs(r.d_c_g_tilde()); })}));
  put("error_d_g_s.svg",
      render_line_plot({"Goal-to-feature distance error", "t [s]", "|error| [m]", true},
                       per_feature("feature", [](const RunRow& r, std::size_t i) { return std::abs(r.d_g_s_tilde(i)); })));

  std::vector<Series> pos;
  const char* axes[] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    pos.push_back(detail::series_of(log, std::string("p ") + axes[k], [k](const RunRow& r) { return r.p_c_g(k); }));
  }
  for (int k = 0; k < 3; ++k) {
    pos.push_back(
        detail::series_of(log, std::string("p_hat ") + axes[k], [k](const RunRow& r) { return r.p_hat_c_g(k); }));
  }
  put("position.svg", render_line_plot({"Camera-to-goal position", "t [s]", "[m]", false}, pos));

  std::vector<Series> vel;
  for (int k = 0; k < 3; ++k) {
    vel.push_back(detail::series_of(log, std::string("v ") + axes[k], [k](const RunRow& r) { return r.v_c(k); }));
  }
  put("velocity.svg", render_line_plot({"Camera velocity command", "t [s]", "[m/s]", false}, vel));

  put("lyapunov.svg",
      render_line_plot({"Estimation and regulation Lyapunov functions", "t [s]", "value", true},
                       {detail::series_of(log, "L", [](const RunRow& r) { return r.lyapunov; }),
                        detail::series_of(log, "J*", [](const RunRow& r) { return r.j_star; })}));
  put("excitation.svg",
      render_line_plot({"History stack excitation", "t [s]", "sigma_Y", true},
                       per_feature("feature", [](const RunRow& r, std::size_t i) { return r.sigma_y[i]; })));
  put("conditioning.svg",
      render_line_plot({"Gram accumulator condition number", "t [s]", "cond", true},
                       per_feature("feature", [](const RunRow& r, std::size_t i) { return r.cond[i]; })));
  return files;
}

inline std::vector<std::filesystem::path> emit_artifacts(const SweepResult& s, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  std::ostringstream csv;
  write_sweep_csv(csv, s);
  const auto table = out_dir / "sweep.csv";
  const auto plot = out_dir / "sweep.svg";
  detail::write_file(table, csv.str());
  detail::write_file(plot, render_sweep_plot(s));
  return {table, plot};
}

}  // namespace icl_sfm
