#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "prism/embeddings.hpp"
#include "prism/error.hpp"

namespace prism {

inline constexpr double kVarianceFloor = 1e-6;
// A component needs at least this much total responsibility to keep a
// variance estimate; below it the component is dropped.
inline constexpr double kMinComponentSupport = 2.0;

struct GmmOptions {
  std::size_t components = 8;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  // Stop once the mean per-row log-likelihood improves by less than this.
  double tol = 1e-6;
  double variance_floor = kVarianceFloor;
  double min_support = kMinComponentSupport;
};

// K diagonal-covariance Gaussians. means/variances are K x d row-major.
struct GmmModel {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  bool converged = false;
  std::size_t iterations = 0;
  // Mean per-row log-likelihood of the returned parameters.
  double final_log_likelihood = 0.0;
  // Mean per-row log-likelihood before each M-step, then the final value.
  // Restarts whenever a component is dropped.
  std::vector<double> log_likelihood_trace;
  // Components dropped for lack of support; they keep weight 0.
  std::size_t dropped = 0;

  std::span<const double> mean(std::size_t k) const { return {means.data() + k * dim, dim}; }
  std::span<const double> variance(std::size_t k) const { return {variances.data() + k * dim, dim}; }
};

// Default component count: 8, or n/10 for small inputs (at least 1).
inline std::size_t default_components(std::size_t rows) {
  return std::clamp<std::size_t>(rows / 10, 1, 8);
}

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double x : xs) peak = std::max(peak, x);
  if (!std::isfinite(peak)) return peak;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - peak);
  return peak + std::log(s);
}

// log w_k + log N(x; mu_k, diag var_k) for every component.
inline void component_log_terms(const GmmModel& m, std::span<const float> x, const std::vector<double>& log_norm,
                                std::vector<double>& out) {
  out.resize(m.components);
  for (std::size_t k = 0; k < m.components; ++k) {
    if (m.weights[k] <= 0.0) {
      out[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    auto mu = m.mean(k);
    auto var = m.variance(k);
    double q = 0.0;
    for (std::size_t j = 0; j < m.dim; ++j) {
      double diff = static_cast<double>(x[j]) - mu[j];
      q += diff * diff / var[j];
    }
    out[k] = std::log(m.weights[k]) + log_norm[k] - 0.5 * q;
  }
}

inline std::vector<double> log_normalizers(const GmmModel& m) {
  std::vector<double> out(m.components);
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < m.components; ++k) {
    double s = 0.0;
    for (double v : m.variance(k)) s += log_two_pi + std::log(v);
    out[k] = -0.5 * s;
  }
  return out;
}

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    s += diff * diff;
  }
  return s;
}

// Greedy k-means++ seeding: first centre uniform; each later centre is the
// best of 2 + ln(count) candidates drawn proportional to squared distance from
// the nearest chosen centre, where best means the lowest resulting potential.
// The local trials keep isolated points from being picked as centres.
inline std::vector<std::size_t> kmeans_pp_seeds(const EmbeddingMatrix& emb, std::size_t count, std::mt19937_64& rng) {
  const std::size_t n = emb.rows();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(count)));
  std::vector<std::size_t> seeds;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  seeds.push_back(pick(rng));
  std::vector<double> dist2(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dist2[i] = squared_distance(emb.row(i), emb.row(seeds[0]));
    total += dist2[i];
  }
  std::vector<double> candidate_dist2(n);
  std::vector<double> best_dist2(n);
  while (seeds.size() < count) {
    if (total <= 0.0) {
      seeds.push_back(pick(rng));
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    std::size_t best = n;
    double best_total = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      double target = u(rng);
      std::size_t chosen = n - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target && dist2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      auto c = emb.row(chosen);
      double candidate_total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        candidate_dist2[i] = std::min(dist2[i], squared_distance(emb.row(i), c));
        candidate_total += candidate_dist2[i];
      }
      if (candidate_total < best_total) {
        best_total = candidate_total;
        best = chosen;
        best_dist2.swap(candidate_dist2);
      }
    }
    seeds.push_back(best);
    dist2.swap(best_dist2);
    best_dist2.resize(n);
    total = best_total;
  }
  return seeds;
}

// E-step: fills responsibilities (n x K) and returns mean log-likelihood.
inline double expectation(const GmmModel& m, const EmbeddingMatrix& emb, std::vector<double>& resp) {
  const std::size_t n = emb.rows();
  const std::size_t K = m.components;
  resp.assign(n * K, 0.0);
  auto log_norm = log_normalizers(m);
  std::vector<double> terms;
  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    component_log_terms(m, emb.row(i), log_norm, terms);
    double lse = log_sum_exp(terms);
    total += lse;
    for (std::size_t k = 0; k < K; ++k) resp[i * K + k] = std::exp(terms[k] - lse);
  }
  return static_cast<double>(total / static_cast<long double>(n));
}

// M-step. Returns how many live components were dropped for having less
// than `min_support` total responsibility.
inline std::size_t maximization(GmmModel& m, const EmbeddingMatrix& emb, const std::vector<double>& resp, double floor,
                                double min_support) {
  const std::size_t n = emb.rows();
  const std::size_t K = m.components;
  const std::size_t d = m.dim;
  std::vector<double> support(K, 0.0);
  std::size_t live = 0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < n; ++i) support[k] += resp[i * K + k];
    live += m.weights[k] > 0.0 && support[k] >= min_support;
  }
  std::size_t dropped = 0;
  for (std::size_t k = 0; k < K; ++k) {
    double nk = support[k];
    // Never drop the last supported component.
    if (m.weights[k] > 0.0 && nk < min_support && live > 0) {
      ++dropped;
      m.weights[k] = 0.0;
      continue;
    }
    m.weights[k] = nk / static_cast<double>(n);
    if (nk <= 0.0) continue;  // empty component keeps its parameters at weight 0
    std::vector<double> mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double r = resp[i * K + k];
      if (r == 0.0) continue;
      auto x = emb.row(i);
      for (std::size_t j = 0; j < d; ++j) mu[j] += r * static_cast<double>(x[j]);
    }
    for (auto& v : mu) v /= nk;
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double r = resp[i * K + k];
      if (r == 0.0) continue;
      auto x = emb.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        double diff = static_cast<double>(x[j]) - mu[j];
        var[j] += r * diff * diff;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      m.means[k * d + j] = mu[j];
      m.variances[k * d + j] = std::max(var[j] / nk, floor);
    }
  }
  double wsum = 0.0;
  for (double w : m.weights) wsum += w;
  for (double& w : m.weights) w /= wsum;
  return dropped;
}

}  // namespace detail

// EM for a diagonal-covariance Gaussian mixture. Seeding is k-means++ from
// `options.seed`; initial variances are the global per-dimension variances.
// A component whose total responsibility falls below `min_support` is
// dropped (weight 0): otherwise an isolated point can claim a component of
// its own, collapse it to the variance floor, and score as most familiar.
inline GmmModel fit_gmm(const EmbeddingMatrix& emb, const GmmOptions& options) {
  const std::size_t n = emb.rows();
  const std::size_t d = emb.dim();
  const std::size_t K = options.components;
  if (K < 1) fail(ErrorCode::InvalidArgument, "component count must be at least 1");
  if (n < K) {
    fail(ErrorCode::DegenerateInput, "cannot fit " + std::to_string(K) + " components to " + std::to_string(n) + " rows");
  }
  if (options.max_iter < 1) fail(ErrorCode::InvalidArgument, "max_iter must be at least 1");

  GmmModel m;
  m.components = K;
  m.dim = d;
  m.weights.assign(K, 1.0 / static_cast<double>(K));
  m.means.resize(K * d);
  m.variances.resize(K * d);

  std::vector<double> global_mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = emb.row(i);
    for (std::size_t j = 0; j < d; ++j) global_mean[j] += x[j];
  }
  for (auto& v : global_mean) v /= static_cast<double>(n);
  std::vector<double> global_var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = emb.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      double diff = x[j] - global_mean[j];
      global_var[j] += diff * diff;
    }
  }
  for (auto& v : global_var) v = std::max(v / static_cast<double>(n), options.variance_floor);

  std::mt19937_64 rng(options.seed);
  auto seeds = detail::kmeans_pp_seeds(emb, K, rng);
  for (std::size_t k = 0; k < K; ++k) {
    auto x = emb.row(seeds[k]);
    for (std::size_t j = 0; j < d; ++j) {
      m.means[k * d + j] = x[j];
      m.variances[k * d + j] = global_var[j];
    }
  }

  std::vector<double> resp;
  double previous = -std::numeric_limits<double>::infinity();
  for (;;) {
    double ll = detail::expectation(m, emb, resp);
    m.log_likelihood_trace.push_back(ll);
    if (m.iterations > 0 && ll - previous < options.tol) {
      m.converged = true;
      m.final_log_likelihood = ll;
      break;
    }
    if (m.iterations == options.max_iter) {
      m.final_log_likelihood = ll;
      break;
    }
    previous = ll;
    if (std::size_t dropped = detail::maximization(m, emb, resp, options.variance_floor, options.min_support)) {
      // Dropping a component lowers the likelihood; EM restarts from here.
      m.dropped += dropped;
      m.log_likelihood_trace.clear();
      previous = -std::numeric_limits<double>::infinity();
    }
    ++m.iterations;
  }
  if (!std::isfinite(m.final_log_likelihood)) fail(ErrorCode::Internal, "mixture log-likelihood is not finite");
  return m;
}

// Log-density of one vector under the mixture.
inline double log_density(const GmmModel& model, std::span<const float> x) {
  if (x.size() != model.dim) fail(ErrorCode::DimensionMismatch, "vector dimension differs from the model's");
  std::vector<double> terms;
  detail::component_log_terms(model, x, detail::log_normalizers(model), terms);
  return detail::log_sum_exp(terms);
}

// Familiarity of every row: its log-density under the fitted mixture. Low
// scores are the least familiar rows.
inline std::vector<double> familiarity_scores(const GmmModel& model, const EmbeddingMatrix& emb) {
  if (emb.dim() != model.dim) {
    fail(ErrorCode::DimensionMismatch, "embeddings have dimension " + std::to_string(emb.dim()) +
                                           ", model has " + std::to_string(model.dim));
  }
  auto log_norm = detail::log_normalizers(model);
  std::vector<double> terms;
  std::vector<double> scores(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    detail::component_log_terms(model, emb.row(i), log_norm, terms);
    scores[i] = detail::log_sum_exp(terms);
  }
  return scores;
}

}  // namespace prism
