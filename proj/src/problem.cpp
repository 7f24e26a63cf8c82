#include "microforge/problem.hpp"

#include <bit>
#include <cmath>
#include <exception>

#include "microforge/rng.hpp"

namespace microforge {

std::vector<LatentVector> latent_ball_samples(const LatentVector& z, int count, double radius, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("batch size must be at least 1");
  std::vector<LatentVector> out;
  out.reserve(static_cast<std::size_t>(count));
  out.push_back(z);
  Rng rng(seed);
  const std::size_t n = z.size();
  for (int k = 1; k < count; ++k) {
    std::vector<double> dir(n);
    double norm2 = 0.0;
    for (auto& d : dir) {
      d = rng.normal();
      norm2 += d * d;
    }
    // Radius density proportional to r^(n-1) gives a uniform point in the ball.
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
    const double scale = norm2 > 0.0 ? r / std::sqrt(norm2) : 0.0;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = z[i] + scale * dir[i];
    out.emplace_back(std::move(v));
  }
  return out;
}

std::uint64_t latent_seed(const LatentVector& z) {
  std::uint64_t h = 0x5851F42D4C957F2DULL;
  for (double v : z.values()) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

MicrostructureProblem::MicrostructureProblem(MicrostructureSource& source, ObjectiveSpec objective, SolverConfig solver)
    : source_(&source), objective_(std::move(objective)), solver_(solver) {
  objective_.validate();
  solver_.validate();
}

MicrostructureProblem::Sample MicrostructureProblem::sample(const LatentVector& z) {
  Sample s;
  const auto batch = latent_ball_samples(z, objective_.batch_size, objective_.batch_radius, latent_seed(z));
  try {
    for (const auto& zk : batch) {
      Microstructure m = source_->generate(zk);
      s.reports.push_back(evaluate_all(m, solver_));
      if (needs_volume(objective_.kind)) s.volumes.push_back(std::move(m));
    }
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  return s;
}

Outcome MicrostructureProblem::score(Sample& s) const {
  std::optional<PropertyReport> head;
  if (!s.reports.empty()) head = s.reports.front();
  if (!s.error.empty()) return Outcome::failure(s.error, head);
  if (needs_transport(objective_.kind)) {
    for (const auto& r : s.reports) {
      if (!r.converged()) return Outcome::failure("diffusion solve did not converge", head);
    }
  }
  const double v = evaluate_objective(objective_, s.reports, s.volumes);
  if (!std::isfinite(v)) return Outcome::failure("objective is not finite", head);
  return Outcome::success(v, head);
}

std::vector<Outcome> MicrostructureProblem::evaluate_design(const std::vector<LatentVector>& design) {
  std::vector<Sample> samples;
  samples.reserve(design.size());
  for (const auto& z : design) samples.push_back(sample(z));

  if (needs_normalisation(objective_.kind) && !objective_.normalisation) {
    std::vector<PropertyReport> pool;
    for (const auto& s : samples) {
      if (s.error.empty() && !s.reports.empty()) pool.push_back(s.reports.front());
    }
    if (pool.empty()) throw EvaluationError("no design point produced properties to normalise with");
    objective_.normalisation = NormalisationStats::from_reports(pool);
  }

  std::vector<Outcome> out;
  out.reserve(samples.size());
  for (auto& s : samples) out.push_back(score(s));
  return out;
}

Outcome MicrostructureProblem::evaluate(const LatentVector& z) {
  if (needs_normalisation(objective_.kind) && !objective_.normalisation) {
    throw std::logic_error("normalisation statistics are not frozen; evaluate the design first");
  }
  Sample s = sample(z);
  return score(s);
}

}  // namespace microforge
