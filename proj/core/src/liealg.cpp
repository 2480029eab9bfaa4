#include "liesup/liealg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

namespace liesup {

namespace {

std::vector<std::string> sampled_symbols(std::span<const VectorField> fields) {
  std::set<std::string> all;
  for (const VectorField& f : fields) {
    for (const auto& c : f.coordinates) all.insert(c);
    for (const Expr& comp : f.components) collect_symbols(comp, all);
  }
  return {all.begin(), all.end()};
}

// Evaluates every field's components at `count` sample points, resampling
// points that produce non-finite values. Returns one row-block per point
// (n rows per point, one column per field), or nullopt on sampling failure.
std::optional<Eigen::MatrixXd> evaluation_matrix(
    std::span<const VectorField> fields, int count,
    const SampleOptions& options, int* points_used) {
  if (fields.empty()) return Eigen::MatrixXd(0, 0);
  const int n = static_cast<int>(fields[0].components.size());
  const int r = static_cast<int>(fields.size());
  std::vector<std::string> symbols = sampled_symbols(fields);

  Eigen::MatrixXd m(n * count, r);
  Sampler sampler(options.seed);
  int filled = 0, attempts = 0;
  while (filled < count && attempts < count + options.max_resamples) {
    ++attempts;
    Env point = sampler.sample_point(symbols, options.box);
    bool ok = true;
    for (int j = 0; j < r && ok; ++j) {
      for (int i = 0; i < n && ok; ++i) {
        double v = evaluate(fields[j].components[i], point);
        if (!std::isfinite(v)) {
          ok = false;
          break;
        }
        m(filled * n + i, j) = v;
      }
    }
    if (ok) ++filled;
  }
  if (points_used) *points_used = filled;
  if (filled < count) return std::nullopt;
  return m;
}

int numeric_rank(const Eigen::MatrixXd& m, double rtol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  double threshold = rtol * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++rank;
  return rank;
}

int sample_count_for(std::span<const VectorField> fields,
                     const SampleOptions& options) {
  int r = static_cast<int>(fields.size());
  return std::max(options.samples_per_dim * std::max(r, 1), 8);
}

}  // namespace

RankResult rank_at_samples(std::span<const VectorField> fields,
                           const SampleOptions& options) {
  if (fields.empty()) return {0, 0};
  int count = sample_count_for(fields, options);
  int used = 0;
  auto m = evaluation_matrix(fields, count, options, &used);
  if (!m) return {std::nullopt, used};
  return {numeric_rank(*m, options.rank_rtol), used};
}

RankResult pointwise_rank(std::span<const VectorField> fields,
                          const SampleOptions& options) {
  if (fields.empty()) return {0, 0};
  const int n = static_cast<int>(fields[0].components.size());
  const int r = static_cast<int>(fields.size());
  std::vector<std::string> symbols = sampled_symbols(fields);
  int count = sample_count_for(fields, options);

  Sampler sampler(options.seed);
  int best = 0, finite = 0, attempts = 0;
  while (finite < count && attempts < count + options.max_resamples) {
    ++attempts;
    Env point = sampler.sample_point(symbols, options.box);
    Eigen::MatrixXd m(n, r);
    bool ok = true;
    for (int j = 0; j < r && ok; ++j)
      for (int i = 0; i < n; ++i) {
        double v = evaluate(fields[j].components[i], point);
        if (!std::isfinite(v)) {
          ok = false;
          break;
        }
        m(i, j) = v;
      }
    if (!ok) continue;
    ++finite;
    best = std::max(best, numeric_rank(m, options.rank_rtol));
    if (best == std::min(n, r)) break;  // cannot grow further
  }
  if (finite == 0) return {std::nullopt, 0};
  return {best, finite};
}

SpanFit span_membership(const VectorField& candidate,
                        std::span<const VectorField> basis,
                        const SampleOptions& options) {
  SpanFit fit;
  std::vector<VectorField> all(basis.begin(), basis.end());
  all.push_back(candidate);
  int count = sample_count_for(all, options);
  int used = 0;
  auto m = evaluation_matrix(all, count, options, &used);
  if (!m) return fit;

  const int r = static_cast<int>(basis.size());
  Eigen::MatrixXd a = m->leftCols(r);
  Eigen::VectorXd b = m->col(r);
  Eigen::VectorXd x =
      r == 0 ? Eigen::VectorXd(0)
             : Eigen::VectorXd(a.colPivHouseholderQr().solve(b));
  Eigen::VectorXd resid = r == 0 ? b : Eigen::VectorXd(b - a * x);
  double scale = std::max(1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  fit.conclusive = true;
  fit.coefficients.assign(x.data(), x.data() + x.size());
  fit.residual = (resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0) / scale;
  return fit;
}

// ---------------------------------------------------------------------------
// Structure constants
// ---------------------------------------------------------------------------

StructureConstants StructureConstants::zeros(int d) {
  StructureConstants c;
  c.dim = d;
  c.upper.assign(static_cast<std::size_t>(d) * d * d, 0.0);
  return c;
}

double StructureConstants::at(int alpha, int beta, int gamma) const {
  if (alpha == beta) return 0.0;
  double sign = 1.0;
  if (alpha > beta) {
    std::swap(alpha, beta);
    sign = -1.0;
  }
  return sign * upper[(static_cast<std::size_t>(alpha) * dim + beta) * dim +
                      gamma];
}

void StructureConstants::set(int alpha, int beta, int gamma, double value) {
  if (alpha >= beta)
    throw std::invalid_argument("structure constants stored for alpha < beta");
  upper[(static_cast<std::size_t>(alpha) * dim + beta) * dim + gamma] = value;
}

double StructureConstants::jacobi_defect() const {
  double worst = 0.0;
  for (int a = 0; a < dim; ++a)
    for (int b = a + 1; b < dim; ++b)
      for (int c = b + 1; c < dim; ++c)
        for (int nu = 0; nu < dim; ++nu) {
          double sum = 0.0;
          for (int mu = 0; mu < dim; ++mu) {
            sum += at(a, b, mu) * at(mu, c, nu);
            sum += at(b, c, mu) * at(mu, a, nu);
            sum += at(c, a, mu) * at(mu, b, nu);
          }
          worst = std::max(worst, std::fabs(sum));
        }
  return worst;
}

// ---------------------------------------------------------------------------
// Closure
// ---------------------------------------------------------------------------

ClosureResult lie_closure(std::span<const VectorField> generators,
                          const ClosureOptions& options) {
  ClosureResult result;
  result.cap = options.cap;
  result.max_depth = options.max_depth;
  if (generators.empty()) {
    result.status = ClosureResult::Status::Closed;
    result.constants = StructureConstants::zeros(0);
    return result;
  }

  std::vector<VectorField> basis;
  std::vector<int> depth;

  // Prune generators to an independent working set.
  for (const VectorField& g : generators) {
    if (basis.empty()) {
      RankResult r = rank_at_samples(std::span<const VectorField>(&g, 1),
                                     options.sampling);
      if (!r.rank) {
        result.detail = "sampling failed while seeding the basis";
        return result;
      }
      if (*r.rank == 1) {
        basis.push_back(g);
        depth.push_back(1);
      }
      continue;
    }
    SpanFit fit = span_membership(g, basis, options.sampling);
    if (!fit.conclusive) {
      result.detail = "sampling failed while pruning generators";
      return result;
    }
    if (fit.residual >= options.membership_tol) {
      basis.push_back(g);
      depth.push_back(1);
    }
  }
  result.depth_reached = basis.empty() ? 0 : 1;

  std::set<std::pair<int, int>> processed;
  bool progress = true;
  while (progress) {
    progress = false;
    const int size = static_cast<int>(basis.size());
    for (int i = 0; i < size && !progress; ++i) {
      for (int j = i + 1; j < size && !progress; ++j) {
        if (processed.count({i, j})) continue;
        VectorField bracket = lie_bracket(basis[i], basis[j]);
        SpanFit fit = span_membership(bracket, basis, options.sampling);
        if (!fit.conclusive) {
          result.detail = "sampling failed during a membership test";
          result.dimension = static_cast<int>(basis.size());
          return result;
        }
        processed.insert({i, j});
        int d = std::max(depth[i], depth[j]) + 1;
        result.depth_reached = std::max(result.depth_reached, d);
        if (fit.residual < options.membership_tol) continue;
        // Bracket escapes the current span.
        if (static_cast<int>(basis.size()) + 1 > options.cap) {
          result.status = ClosureResult::Status::Exceeded;
          result.basis = std::move(basis);
          result.dimension = static_cast<int>(result.basis.size());
          result.detail = "dimension cap exceeded";
          return result;
        }
        if (d > options.max_depth) {
          result.status = ClosureResult::Status::Exceeded;
          result.basis = std::move(basis);
          result.dimension = static_cast<int>(result.basis.size());
          result.detail = "bracket depth bound exceeded";
          return result;
        }
        basis.push_back(std::move(bracket));
        depth.push_back(d);
        progress = true;  // restart the sweep over the enlarged basis
      }
    }
  }

  // Closed: recompute structure constants against the final basis.
  const int dim = static_cast<int>(basis.size());
  StructureConstants constants = StructureConstants::zeros(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      VectorField bracket = lie_bracket(basis[i], basis[j]);
      SpanFit fit = span_membership(bracket, basis, options.sampling);
      if (!fit.conclusive) {
        result.detail = "sampling failed while computing structure constants";
        result.dimension = dim;
        return result;
      }
      for (int g = 0; g < dim; ++g)
        constants.set(i, j, g, fit.coefficients[g]);
    }

  result.status = ClosureResult::Status::Closed;
  result.basis = std::move(basis);
  result.dimension = dim;
  result.constants = std::move(constants);
  return result;
}

// ---------------------------------------------------------------------------
// Lie-Scheffers
// ---------------------------------------------------------------------------

LieCheckResult lie_scheffers_check(const TimeDepVectorField& x,
                                   std::span<const double> time_samples,
                                   const ClosureOptions& options) {
  LieCheckResult result;
  if (time_samples.size() < 2)
    throw std::invalid_argument("need at least two time samples");

  if (x.has_decomposition()) {
    std::vector<VectorField> generators;
    for (const TimeDepTerm& term : x.decomposition)
      generators.push_back(term.field);
    result.closure = lie_closure(generators, options);
    result.decomposition_checked = true;
    if (result.closure.status != ClosureResult::Status::Closed) {
      result.verdict = result.closure.status == ClosureResult::Status::Exceeded
                           ? LieCheckResult::Verdict::NoEvidence
                           : LieCheckResult::Verdict::Inconclusive;
      return result;
    }
    for (double t0 : time_samples) {
      VectorField frozen = freeze_time(x, t0);
      SpanFit fit =
          span_membership(frozen, result.closure.basis, options.sampling);
      if (!fit.conclusive) {
        result.verdict = LieCheckResult::Verdict::Inconclusive;
        result.detail = "membership sampling failed at t=" + std::to_string(t0);
        return result;
      }
      result.worst_membership_residual =
          std::max(result.worst_membership_residual, fit.residual);
      if (fit.residual >= options.membership_tol) {
        result.verdict = LieCheckResult::Verdict::NoEvidence;
        result.detail =
            "frozen field escapes the span at t=" + std::to_string(t0);
        return result;
      }
    }
    result.verdict = LieCheckResult::Verdict::LieSystem;
    return result;
  }

  std::vector<VectorField> generators;
  for (double t0 : time_samples) generators.push_back(freeze_time(x, t0));
  result.closure = lie_closure(generators, options);
  switch (result.closure.status) {
    case ClosureResult::Status::Closed:
      result.verdict = LieCheckResult::Verdict::LieSystem;
      break;
    case ClosureResult::Status::Exceeded:
      result.verdict = LieCheckResult::Verdict::NoEvidence;
      break;
    case ClosureResult::Status::Inconclusive:
      result.verdict = LieCheckResult::Verdict::Inconclusive;
      break;
  }
  return result;
}

std::optional<int> minimal_prolongation_count(
    std::span<const VectorField> basis, int m_max,
    const SampleOptions& options) {
  const int r = static_cast<int>(basis.size());
  for (int m = 1; m <= m_max; ++m) {
    std::vector<VectorField> prolonged;
    prolonged.reserve(basis.size());
    for (const VectorField& b : basis)
      prolonged.push_back(diagonal_prolongation(b, m, 1));
    RankResult rank = pointwise_rank(prolonged, options);
    if (rank.rank && *rank.rank == r) return m;
  }
  return std::nullopt;
}

}  // namespace liesup
