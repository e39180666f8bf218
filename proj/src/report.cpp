#include "mgsddp/errors.hpp"
#include "mgsddp/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mgsddp {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string case_cell(const MetricsReport& r) {
  return r.case_number > 0 ? std::to_string(r.case_number) : "custom";
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const json& a) {
  const auto v = a.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_vector(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const json& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::VectorXd r = to_eigen(rows[i]);
    if (r.size() != cols) throw ValidationError("report: trace rows differ in length");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

}  // namespace

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> columns{
      "case",           "method",         "total_eur",         "load_shedding_eur",
      "diesel_eur",     "dod_eur",        "soc_up_eur",        "soc_down_eur",
      "lifetime_years", "vres_mwh",       "h2_charge_mwh",     "h2_discharge_mwh",
      "battery_charge_mwh", "battery_discharge_mwh"};
  return columns;
}

void write_report_csv(const std::vector<MetricsReport>& reports, std::ostream& out) {
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : reports) {
    out << case_cell(r) << ',' << r.method << ',' << fixed(r.total_cost, 2) << ','
        << fixed(r.shedding_cost, 2) << ',' << fixed(r.diesel_cost, 2) << ',' << fixed(r.dod_cost, 2)
        << ',' << fixed(r.soc_up_cost, 2) << ',' << fixed(r.soc_dn_cost, 2) << ','
        << fixed(r.lifetime_years, 2) << ',' << fixed(r.vres_mwh, 3) << ',' << fixed(r.h2_charge_mwh, 3)
        << ',' << fixed(r.h2_discharge_mwh, 3) << ',' << fixed(r.battery_charge_mwh, 3) << ','
        << fixed(r.battery_discharge_mwh, 3) << '\n';
  }
}

json report_to_json(const MetricsReport& r, bool with_traces) {
  json doc = {{"label", r.label},
              {"case", r.case_number},
              {"method", std::string(1, r.method)},
              {"hours", r.hours},
              {"operating_cost", {{"total", r.total_cost}, {"load_shedding", r.shedding_cost}, {"diesel", r.diesel_cost}}},
              {"degradation_cost", {{"dod", r.dod_cost}, {"soc_up", r.soc_up_cost}, {"soc_down", r.soc_dn_cost}}},
              {"lifetime_years", r.lifetime_years},
              {"energy_mwh",
               {{"vres", r.vres_mwh},
                {"h2_charge", r.h2_charge_mwh},
                {"h2_discharge", r.h2_discharge_mwh},
                {"battery_charge", r.battery_charge_mwh},
                {"battery_discharge", r.battery_discharge_mwh}}}};
  if (with_traces) {
    const SimulationTraces& t = r.traces;
    json stamps = json::array();
    for (const auto& s : t.timestamps) stamps.push_back(format_timestamp(s));
    doc["traces"] = {{"timestamps", stamps},
                     {"storages", t.storage_names},
                     {"soc_max", to_vector(t.soc_max)},
                     {"generation", to_vector(t.generation)},
                     {"vres_available", to_vector(t.vres_available)},
                     {"vres_used", to_vector(t.vres_used)},
                     {"demand", to_vector(t.demand)},
                     {"shedding", to_vector(t.shedding)},
                     {"charge", matrix_rows(t.charge)},
                     {"discharge", matrix_rows(t.discharge)},
                     {"soc", matrix_rows(t.soc)}};
  }
  return doc;
}

MetricsReport report_from_json(const json& doc) {
  MetricsReport r;
  try {
    r.label = doc.at("label").get<std::string>();
    r.case_number = doc.at("case").get<int>();
    const auto m = doc.at("method").get<std::string>();
    r.method = m.empty() ? '-' : m[0];
    r.hours = doc.at("hours").get<double>();
    const json& op = doc.at("operating_cost");
    r.total_cost = op.at("total").get<double>();
    r.shedding_cost = op.at("load_shedding").get<double>();
    r.diesel_cost = op.at("diesel").get<double>();
    const json& deg = doc.at("degradation_cost");
    r.dod_cost = deg.at("dod").get<double>();
    r.soc_up_cost = deg.at("soc_up").get<double>();
    r.soc_dn_cost = deg.at("soc_down").get<double>();
    r.lifetime_years = doc.at("lifetime_years").get<double>();
    const json& e = doc.at("energy_mwh");
    r.vres_mwh = e.at("vres").get<double>();
    r.h2_charge_mwh = e.at("h2_charge").get<double>();
    r.h2_discharge_mwh = e.at("h2_discharge").get<double>();
    r.battery_charge_mwh = e.at("battery_charge").get<double>();
    r.battery_discharge_mwh = e.at("battery_discharge").get<double>();
    if (doc.contains("traces")) {
      const json& t = doc["traces"];
      SimulationTraces& tr = r.traces;
      for (const auto& s : t.at("timestamps")) tr.timestamps.push_back(parse_timestamp(s.get<std::string>()));
      tr.storage_names = t.at("storages").get<std::vector<std::string>>();
      tr.soc_max = to_eigen(t.at("soc_max"));
      tr.generation = to_eigen(t.at("generation"));
      tr.vres_available = to_eigen(t.at("vres_available"));
      tr.vres_used = to_eigen(t.at("vres_used"));
      tr.demand = to_eigen(t.at("demand"));
      tr.shedding = to_eigen(t.at("shedding"));
      const auto n = static_cast<Eigen::Index>(tr.timestamps.size());
      tr.charge = matrix_from_rows(t.at("charge"), n);
      tr.discharge = matrix_from_rows(t.at("discharge"), n);
      tr.soc = matrix_from_rows(t.at("soc"), n);
    }
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("report: ") + ex.what());
  }
  return r;
}

void write_traces_csv(const SimulationTraces& t, std::ostream& out) {
  out << "timestamp,generation_kw,vres_available_kw,vres_used_kw,demand_kw,shedding_kw";
  for (const auto& name : t.storage_names) {
    out << ',' << name << "_charge_kw," << name << "_discharge_kw," << name << "_soc_kwh";
  }
  out << '\n';
  for (int h = 0; h < t.hours(); ++h) {
    out << format_timestamp(t.timestamps[h]) << ',' << fixed(t.generation[h], 4) << ','
        << fixed(t.vres_available[h], 4) << ',' << fixed(t.vres_used[h], 4) << ',' << fixed(t.demand[h], 4)
        << ',' << fixed(t.shedding[h], 4);
    for (Eigen::Index e = 0; e < t.charge.rows(); ++e) {
      out << ',' << fixed(t.charge(e, h), 4) << ',' << fixed(t.discharge(e, h), 4) << ','
          << fixed(t.soc(e, h), 4);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Plots

Eigen::VectorXd rolling_mean(const Eigen::Ref<const Eigen::VectorXd>& x, int window) {
  if (window < 1) throw ValidationError("rolling mean: window must be positive");
  if (x.size() < window) return {};
  Eigen::VectorXd out(x.size() - window + 1);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = x.segment(i, window).mean();
  return out;
}

std::string svg_line_chart(const std::string& title, const std::vector<PlotSeries>& series, double y_min,
                           double y_max, const std::string& y_label) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double width = 900, height = 380, left = 70, right = 20, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  Eigen::Index length = 0;
  double hi = y_max;
  for (const auto& s : series) {
    length = std::max(length, s.values.size());
    if (y_max <= y_min && s.values.size()) hi = std::max(hi, s.values.maxCoeff());
  }
  if (hi <= y_min) hi = y_min + 1.0;
  auto px = [&](Eigen::Index i) { return left + (length > 1 ? pw * static_cast<double>(i) / static_cast<double>(length - 1) : 0.0); };
  auto py = [&](double v) { return top + ph * (1.0 - (std::clamp(v, y_min, hi) - y_min) / (hi - y_min)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = y_min + (hi - y_min) * k / 4.0;
    const double y = py(v);
    svg << "<line x1=\"" << left << "\" y1=\"" << fixed(y, 2) << "\" x2=\"" << left + pw << "\" y2=\"" << fixed(y, 2)
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y + 4, 2) << "\" text-anchor=\"end\">" << fixed(v, 1)
        << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 30 << "\" text-anchor=\"middle\">hour</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& v = series[s].values;
    const char* color = colors[s % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (Eigen::Index i = 0; i < v.size(); ++i) svg << (i ? " " : "") << fixed(px(i), 2) << ',' << fixed(py(v[i]), 2);
    svg << "\"/>\n";
    const double lx = left + 10 + 150.0 * static_cast<double>(s);
    svg << "<line x1=\"" << lx << "\" y1=\"" << height - 12 << "\" x2=\"" << lx + 20 << "\" y2=\"" << height - 12
        << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << lx + 25 << "\" y=\"" << height - 8 << "\">" << series[s].name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> emit_plots(const SimulationTraces& t, const std::filesystem::path& dir,
                                              int window) {
  if (t.hours() == 0) throw ValidationError("plots: no traces");
  const int w = std::min(window, t.hours());
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto save = [&](const std::string& name, const std::string& body) {
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
    written.push_back(path);
  };
  const std::string span = std::to_string(w) + " h average";
  save("generation_demand.svg",
       svg_line_chart("Generation and demand, " + span,
                      {{"VRES available", rolling_mean(t.vres_available, w)},
                       {"VRES used", rolling_mean(t.vres_used, w)},
                       {"diesel", rolling_mean(t.generation, w)},
                       {"demand", rolling_mean(t.demand, w)}},
                      0.0, 0.0, "kW"));
  for (std::size_t e = 0; e < t.storage_names.size(); ++e) {
    const auto row = static_cast<Eigen::Index>(e);
    save("soc_" + t.storage_names[e] + ".svg",
         svg_line_chart("State of charge " + t.storage_names[e] + ", " + span,
                        {{t.storage_names[e], rolling_mean(t.soc.row(row).transpose(), w)}}, 0.0,
                        t.soc_max[row], "kWh"));
  }
  return written;
}

}  // namespace mgsddp
