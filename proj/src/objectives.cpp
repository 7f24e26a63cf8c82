#include "microforge/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace microforge {

namespace {

constexpr std::array<std::pair<ObjectiveKind, std::string_view>, 8> kNames{{
    {ObjectiveKind::Ssa, "ssa"},
    {ObjectiveKind::Drel, "drel"},
    {ObjectiveKind::DrelAxis, "drel_axis"},
    {ObjectiveKind::WeightedSsaDrel, "weighted_ssa_drel"},
    {ObjectiveKind::SsaConstVf, "ssa_const_vf"},
    {ObjectiveKind::DrelConstPorosity, "drel_const_porosity"},
    {ObjectiveKind::DrelAxisConstOthers, "drel_axis_const_others"},
    {ObjectiveKind::GradedProfile, "graded_profile"},
}};

const NormalisationStats& stats_of(const ObjectiveSpec& spec) {
  if (!spec.normalisation) throw std::logic_error("objective needs normalisation statistics that are not set");
  return *spec.normalisation;
}

template <typename F>
double batch_mean(std::span<const PropertyReport> batch, F f) {
  if (batch.empty()) throw std::invalid_argument("objective needs at least one report");
  double s = 0.0;
  for (const auto& r : batch) s += f(r);
  return s / static_cast<double>(batch.size());
}

template <typename F>
std::vector<double> collect(std::span<const PropertyReport> batch, F f) {
  std::vector<double> v;
  v.reserve(batch.size());
  for (const auto& r : batch) v.push_back(f(r));
  return v;
}

double positive_or_one(double range) { return range > 0.0 && std::isfinite(range) ? range : 1.0; }

}  // namespace

std::string_view objective_name(ObjectiveKind k) noexcept {
  for (const auto& [kind, name] : kNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

ObjectiveKind parse_objective(std::string_view name) {
  for (const auto& [kind, n] : kNames) {
    if (n == name) return kind;
  }
  throw std::invalid_argument("unknown objective '" + std::string(name) + "'");
}

NormalisationStats NormalisationStats::from_reports(std::span<const PropertyReport> reports) {
  if (reports.empty()) throw std::invalid_argument("normalisation needs at least one report");
  NormalisationStats s;
  auto range_of = [&](auto f) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : reports) {
      const double v = f(r);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return positive_or_one(hi - lo);
  };
  auto mean_of = [&](auto f) { return batch_mean(reports, f); };
  s.ssa_range = range_of([](const PropertyReport& r) { return r.ssa_nmc; });
  s.drel_range = range_of([](const PropertyReport& r) { return r.drel_mean(); });
  for (Phase p : kAllPhases) {
    const auto i = static_cast<std::size_t>(code(p));
    s.phi_range[i] = range_of([p](const PropertyReport& r) { return r.fractions[p]; });
    s.phi_mean[i] = mean_of([p](const PropertyReport& r) { return r.fractions[p]; });
  }
  for (Axis a : kAllAxes) {
    s.drel_axis_mean[static_cast<std::size_t>(code(a))] = mean_of([a](const PropertyReport& r) { return r.drel(a); });
  }
  return s;
}

void ObjectiveSpec::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(batch_radius >= 0.0)) throw std::invalid_argument("batch radius must be non-negative");
  if (normalisation) {
    const auto& n = *normalisation;
    const bool ok = n.ssa_range > 0.0 && n.drel_range > 0.0 &&
                    std::all_of(n.phi_range.begin(), n.phi_range.end(), [](double r) { return r > 0.0; });
    if (!ok) throw std::invalid_argument("normalisation ranges must be positive");
  }
}

bool needs_normalisation(ObjectiveKind k) noexcept {
  return k == ObjectiveKind::WeightedSsaDrel || k == ObjectiveKind::SsaConstVf ||
         k == ObjectiveKind::DrelConstPorosity || k == ObjectiveKind::DrelAxisConstOthers;
}

bool needs_transport(ObjectiveKind k) noexcept {
  return k == ObjectiveKind::Drel || k == ObjectiveKind::DrelAxis || k == ObjectiveKind::WeightedSsaDrel ||
         k == ObjectiveKind::DrelConstPorosity || k == ObjectiveKind::DrelAxisConstOthers;
}

bool needs_volume(ObjectiveKind k) noexcept { return k == ObjectiveKind::GradedProfile; }

double rmse(std::span<const double> values, double target) {
  if (values.empty()) throw std::invalid_argument("rmse of an empty sequence");
  double s = 0.0;
  for (double v : values) s += (v - target) * (v - target);
  return std::sqrt(s / static_cast<double>(values.size()));
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("rmse needs equal, non-empty sequences");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::vector<double> linspace(double a, double b, std::size_t m) {
  std::vector<double> v(m);
  if (m == 1) {
    v[0] = a;
  } else {
    for (std::size_t j = 0; j < m; ++j) v[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(m - 1);
  }
  return v;
}

double eval_ssa(const PropertyReport& r) { return r.ssa_nmc; }

double eval_drel(const PropertyReport& r) { return r.drel_mean(); }

double eval_drel_axis(const PropertyReport& r, Axis axis) { return r.drel(axis); }

double eval_weighted(const PropertyReport& r, const ObjectiveSpec& spec) {
  const auto& n = stats_of(spec);
  return spec.beta() * (r.drel_mean() / n.drel_range) + spec.gamma * (r.ssa_nmc / n.ssa_range);
}

double eval_constrained_vf(std::span<const PropertyReport> batch, const ObjectiveSpec& spec) {
  const auto& n = stats_of(spec);
  const auto i = static_cast<std::size_t>(code(Phase::NMC));
  const double gain = batch_mean(batch, [](const PropertyReport& r) { return r.ssa_nmc; }) / n.ssa_range;
  const auto phi = collect(batch, [](const PropertyReport& r) { return r.fractions[Phase::NMC]; });
  return gain - rmse(phi, n.phi_mean[i]) / n.phi_range[i];
}

double eval_constrained_porosity(std::span<const PropertyReport> batch, const ObjectiveSpec& spec) {
  const auto& n = stats_of(spec);
  const auto i = static_cast<std::size_t>(code(Phase::Pore));
  const double gain = batch_mean(batch, [](const PropertyReport& r) { return r.drel_mean(); }) / n.drel_range;
  const auto phi = collect(batch, [](const PropertyReport& r) { return r.fractions[Phase::Pore]; });
  return gain - rmse(phi, n.phi_mean[i]) / n.phi_range[i];
}

double eval_drel_axis_constrained(std::span<const PropertyReport> batch, const ObjectiveSpec& spec) {
  const auto& n = stats_of(spec);
  double value = batch_mean(batch, [&](const PropertyReport& r) { return r.drel(spec.axis); });
  for (Axis other : kAllAxes) {
    if (other == spec.axis) continue;
    const auto d = collect(batch, [other](const PropertyReport& r) { return r.drel(other); });
    value -= rmse(d, n.drel_axis_mean[static_cast<std::size_t>(code(other))]);
  }
  return value;
}

std::vector<double> graded_target(const GradedTarget& g, Dims d) {
  return linspace(g.start, g.end, static_cast<std::size_t>(d.extent(g.axis)));
}

double eval_graded(const Microstructure& m, const ObjectiveSpec& spec) {
  const auto profile = slice_profile(m, spec.graded.phase, spec.graded.axis);
  const auto target = graded_target(spec.graded, m.dims());
  return -rmse(profile, target);
}

double evaluate_objective(const ObjectiveSpec& spec, std::span<const PropertyReport> batch,
                          std::span<const Microstructure> volumes) {
  switch (spec.kind) {
    case ObjectiveKind::Ssa:
      return batch_mean(batch, eval_ssa);
    case ObjectiveKind::Drel:
      return batch_mean(batch, eval_drel);
    case ObjectiveKind::DrelAxis:
      return batch_mean(batch, [&](const PropertyReport& r) { return eval_drel_axis(r, spec.axis); });
    case ObjectiveKind::WeightedSsaDrel:
      return batch_mean(batch, [&](const PropertyReport& r) { return eval_weighted(r, spec); });
    case ObjectiveKind::SsaConstVf:
      return eval_constrained_vf(batch, spec);
    case ObjectiveKind::DrelConstPorosity:
      return eval_constrained_porosity(batch, spec);
    case ObjectiveKind::DrelAxisConstOthers:
      return eval_drel_axis_constrained(batch, spec);
    case ObjectiveKind::GradedProfile: {
      if (volumes.empty()) throw std::invalid_argument("graded objective needs the generated volumes");
      double s = 0.0;
      for (const auto& m : volumes) s += eval_graded(m, spec);
      return s / static_cast<double>(volumes.size());
    }
  }
  throw std::logic_error("unhandled objective kind");
}

}  // namespace microforge
