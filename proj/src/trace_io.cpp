#include "microforge/trace_io.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "microforge/text.hpp"

namespace microforge {

namespace {

using nlohmann::json;

// JSON has no inf/nan; those are stored as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return text::format_double(v);
}

double number_of(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return text::parse_double(j.get<std::string>());
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw std::runtime_error("trace: expected a number");
}

std::string csv_number(double v) { return std::isnan(v) ? std::string() : text::format_double(v); }

}  // namespace

std::string trace_record_json(const TraceRecord& r) {
  json j;
  j["index"] = r.index;
  j["kind"] = r.kind == RecordKind::Design ? "design" : "iteration";
  j["iteration"] = r.iteration;
  j["alpha"] = number(r.alpha);
  json z = json::array();
  for (double v : r.z.values()) z.push_back(v);
  j["z"] = std::move(z);
  j["ok"] = r.ok;
  j["objective"] = number(r.objective);
  j["best_so_far"] = number(r.best_so_far);
  j["gp_nll"] = number(r.gp_nll);
  j["acquisition"] = number(r.acquisition);
  j["acquisition_improved"] = r.acquisition_improved;
  if (r.report) {
    const auto& cols = property_columns();
    const auto fields = property_fields(*r.report);
    json rep = json::object();
    for (std::size_t i = 0; i < cols.size(); ++i) rep[cols[i]] = fields[i];
    j["report"] = std::move(rep);
  } else {
    j["report"] = nullptr;
  }
  j["error"] = r.error;
  return j.dump();
}

TraceRecord parse_trace_record(const std::string& line) {
  const json j = json::parse(line);
  TraceRecord r;
  r.index = j.at("index").get<int>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "design" && kind != "iteration") throw std::runtime_error("trace: unknown record kind '" + kind + "'");
  r.kind = kind == "design" ? RecordKind::Design : RecordKind::Iteration;
  r.iteration = j.at("iteration").get<int>();
  r.alpha = number_of(j.at("alpha"));
  r.z = LatentVector(j.at("z").get<std::vector<double>>());
  r.ok = j.at("ok").get<bool>();
  r.objective = number_of(j.at("objective"));
  r.best_so_far = number_of(j.at("best_so_far"));
  r.gp_nll = number_of(j.at("gp_nll"));
  r.acquisition = number_of(j.at("acquisition"));
  r.acquisition_improved = j.at("acquisition_improved").get<bool>();
  const auto& rep = j.at("report");
  if (!rep.is_null()) {
    std::vector<std::string> fields;
    for (const auto& c : property_columns()) fields.push_back(rep.at(c).get<std::string>());
    r.report = parse_property_fields(fields);
  }
  r.error = j.at("error").get<std::string>();
  return r;
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << trace_record_json(r) << '\n';
}

std::vector<TraceRecord> read_trace_jsonl(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(parse_trace_record(line));
  }
  return out;
}

std::string trace_csv_header() {
  return "index,kind,iteration,alpha,objective,best_so_far,phi_pore,phi_nmc,phi_cbd,ssa_nmc,drel_x,drel_y,drel_z,ok";
}

std::string trace_csv_row(const TraceRecord& r) {
  std::string s = std::to_string(r.index);
  s += r.kind == RecordKind::Design ? ",design," : ",iteration,";
  s += std::to_string(r.iteration) + ',';
  s += csv_number(r.alpha) + ',' + csv_number(r.objective) + ',' + csv_number(r.best_so_far);
  if (r.report) {
    for (Phase p : kAllPhases) s += ',' + text::format_double(r.report->fractions[p]);
    s += ',' + text::format_double(r.report->ssa_nmc);
    for (Axis a : kAllAxes) s += ',' + text::format_double(r.report->drel(a));
  } else {
    s += ",,,,,,,";
  }
  s += r.ok ? ",1" : ",0";
  return s;
}

std::string timings_csv_header() { return "index,kind,wall_seconds"; }

std::string timings_csv_row(const TraceRecord& r) {
  return std::to_string(r.index) + (r.kind == RecordKind::Design ? ",design," : ",iteration,") +
         text::format_double(r.wall_seconds);
}

}  // namespace microforge
