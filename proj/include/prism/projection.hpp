#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "prism/embeddings.hpp"
#include "prism/error.hpp"
#include "prism/linalg.hpp"

namespace prism {

enum class ProjectionMethod { pca, neighbor_embed };

constexpr std::string_view to_string(ProjectionMethod m) {
  return m == ProjectionMethod::pca ? "pca" : "neighbor_embed";
}

inline std::optional<ProjectionMethod> parse_projection_method(std::string_view name) {
  if (name == "pca") return ProjectionMethod::pca;
  if (name == "neighbor_embed" || name == "tsne") return ProjectionMethod::neighbor_embed;
  return std::nullopt;
}

struct Projection2D {
  std::vector<double> x;
  std::vector<double> y;
  ProjectionMethod method = ProjectionMethod::pca;
  std::uint64_t seed = 0;
  // PCA only: variance captured by each output axis (population covariance).
  std::array<double, 2> explained_variance{0.0, 0.0};
};

// Neighbor embedding is O(n^2) per iteration; larger inputs should use pca.
inline constexpr std::size_t kNeighborEmbedLimit = 10000;
inline constexpr std::size_t kNeighborEmbedIterations = 500;

namespace detail {

struct PcaBasis {
  std::vector<double> mean;
  std::array<std::vector<double>, 2> axes;
  std::array<double, 2> variance{};
};

inline PcaBasis pca_basis(const EmbeddingMatrix& emb) {
  const std::size_t n = emb.rows();
  const std::size_t d = emb.dim();
  PcaBasis basis;
  basis.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = emb.row(i);
    for (std::size_t j = 0; j < d; ++j) basis.mean[j] += x[j];
  }
  for (auto& v : basis.mean) v /= static_cast<double>(n);

  linalg::SquareMatrix cov(d);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = emb.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[j] = x[j] - basis.mean[j];
    for (std::size_t r = 0; r < d; ++r) {
      const double cr = centered[r];
      double* row = &cov.data[r * d];
      for (std::size_t c = r; c < d; ++c) row[c] += cr * centered[c];
    }
  }
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r; c < d; ++c) {
      cov(r, c) /= static_cast<double>(n);
      cov(c, r) = cov(r, c);
    }
  }
  auto eig = linalg::symmetric_eigen(cov);
  for (std::size_t a = 0; a < 2; ++a) {
    const std::size_t col = d - 1 - a;
    std::vector<double> axis(d);
    std::size_t biggest = 0;
    for (std::size_t j = 0; j < d; ++j) {
      axis[j] = eig.vectors(j, col);
      if (std::abs(axis[j]) > std::abs(axis[biggest])) biggest = j;
    }
    if (axis[biggest] < 0) {
      for (auto& v : axis) v = -v;
    }
    basis.axes[a] = std::move(axis);
    basis.variance[a] = std::max(eig.values[col], 0.0);
  }
  return basis;
}

inline Projection2D pca(const EmbeddingMatrix& emb, std::uint64_t seed) {
  auto basis = pca_basis(emb);
  Projection2D out;
  out.method = ProjectionMethod::pca;
  out.seed = seed;
  out.explained_variance = basis.variance;
  out.x.resize(emb.rows());
  out.y.resize(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    auto x = emb.row(i);
    double a = 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < emb.dim(); ++j) {
      double c = x[j] - basis.mean[j];
      a += c * basis.axes[0][j];
      b += c * basis.axes[1][j];
    }
    out.x[i] = a;
    out.y[i] = b;
  }
  return out;
}

// Sparse symmetric affinities from each row's nearest neighbours, with the
// per-row Gaussian bandwidth chosen by bisection to hit the target perplexity.
struct Affinity {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> cols;
  std::vector<double> vals;
};

inline Affinity neighbor_affinities(const EmbeddingMatrix& emb, double perplexity) {
  const std::size_t n = emb.rows();
  const std::size_t k = std::min<std::size_t>(n - 1, static_cast<std::size_t>(3.0 * perplexity) + 1);
  std::vector<std::vector<std::pair<double, std::size_t>>> knn(n);
  std::vector<std::pair<double, std::size_t>> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    auto xi = emb.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto xj = emb.row(j);
      double s = 0.0;
      for (std::size_t t = 0; t < emb.dim(); ++t) {
        double diff = static_cast<double>(xi[t]) - static_cast<double>(xj[t]);
        s += diff * diff;
      }
      row.emplace_back(s, j);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    knn[i].assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k));
  }

  // Conditional probabilities p(j|i).
  const double target = std::log(perplexity);
  std::vector<std::vector<double>> cond(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    std::vector<double> p(k);
    const double base = knn[i].front().first;
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        p[t] = std::exp(-beta * (knn[i][t].first - base));
        sum += p[t];
      }
      double h = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        p[t] /= sum;
        h += beta * (knn[i][t].first - base) * p[t];
      }
      h += std::log(sum);
      if (std::abs(h - target) < 1e-5) break;
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    cond[i] = std::move(p);
  }

  // Symmetrize: P_ij = (p(j|i) + p(i|j)) / 2n.
  std::vector<std::vector<std::pair<std::size_t, double>>> sym(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      std::size_t j = knn[i][t].second;
      double v = cond[i][t] / (2.0 * static_cast<double>(n));
      sym[i].emplace_back(j, v);
      sym[j].emplace_back(i, v);
    }
  }
  Affinity out;
  out.offsets.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& entries = sym[i];
    std::sort(entries.begin(), entries.end());
    for (std::size_t e = 0; e < entries.size();) {
      std::size_t j = entries[e].first;
      double v = 0.0;
      while (e < entries.size() && entries[e].first == j) v += entries[e++].second;
      out.cols.push_back(j);
      out.vals.push_back(v);
    }
    out.offsets.push_back(out.cols.size());
  }
  return out;
}

inline Projection2D neighbor_embed(const EmbeddingMatrix& emb, std::uint64_t seed) {
  const std::size_t n = emb.rows();
  if (n > kNeighborEmbedLimit) {
    fail(ErrorCode::InvalidArgument, "neighbor_embed supports at most " + std::to_string(kNeighborEmbedLimit) +
                                         " rows; use pca for " + std::to_string(n));
  }
  const double perplexity = std::max(1.0, std::min(30.0, static_cast<double>(n - 1) / 3.0));
  const Affinity P = neighbor_affinities(emb, perplexity);

  // Start from the PCA layout scaled to a small spread, plus seeded jitter.
  auto init = pca(emb, seed);
  double spread = 0.0;
  for (double v : init.x) spread += v * v;
  spread = std::sqrt(spread / static_cast<double>(n));
  const double scale = spread > 0.0 ? 1e-4 / spread : 1.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1e-6);
  std::vector<double> y(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    y[2 * i] = init.x[i] * scale + jitter(rng);
    y[2 * i + 1] = init.y[i] * scale + jitter(rng);
  }

  const std::size_t exaggeration_iters = 125;
  const double learning_rate = std::max(static_cast<double>(n) / 12.0, 50.0);
  std::vector<double> update(2 * n, 0.0);
  std::vector<double> gains(2 * n, 1.0);
  std::vector<double> grad(2 * n);
  for (std::size_t iter = 0; iter < kNeighborEmbedIterations; ++iter) {
    const double exaggeration = iter < exaggeration_iters ? 12.0 : 1.0;
    const double momentum = iter < exaggeration_iters ? 0.5 : 0.8;
    std::fill(grad.begin(), grad.end(), 0.0);
    // Repulsion over all pairs: sum_j q_ij^2 Z (y_i - y_j), normalised by Z.
    double z = 0.0;
    std::vector<double> rep(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx = y[2 * i] - y[2 * j];
        double dy = y[2 * i + 1] - y[2 * j + 1];
        double q = 1.0 / (1.0 + dx * dx + dy * dy);
        z += 2.0 * q;
        double q2 = q * q;
        rep[2 * i] += q2 * dx;
        rep[2 * i + 1] += q2 * dy;
        rep[2 * j] -= q2 * dx;
        rep[2 * j + 1] -= q2 * dy;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double ax = 0.0;
      double ay = 0.0;
      for (std::size_t e = P.offsets[i]; e < P.offsets[i + 1]; ++e) {
        std::size_t j = P.cols[e];
        double dx = y[2 * i] - y[2 * j];
        double dy = y[2 * i + 1] - y[2 * j + 1];
        double q = 1.0 / (1.0 + dx * dx + dy * dy);
        ax += exaggeration * P.vals[e] * q * dx;
        ay += exaggeration * P.vals[e] * q * dy;
      }
      grad[2 * i] = 4.0 * (ax - rep[2 * i] / z);
      grad[2 * i + 1] = 4.0 * (ay - rep[2 * i + 1] / z);
    }
    for (std::size_t t = 0; t < 2 * n; ++t) {
      bool same_sign = (grad[t] > 0) == (update[t] > 0);
      gains[t] = same_sign ? std::max(gains[t] * 0.8, 0.01) : gains[t] + 0.2;
      update[t] = momentum * update[t] - learning_rate * gains[t] * grad[t];
      y[t] += update[t];
    }
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cx += y[2 * i];
      cy += y[2 * i + 1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= cx;
      y[2 * i + 1] -= cy;
    }
  }

  Projection2D out;
  out.method = ProjectionMethod::neighbor_embed;
  out.seed = seed;
  out.x.resize(n);
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.x[i] = y[2 * i];
    out.y[i] = y[2 * i + 1];
    if (!std::isfinite(out.x[i]) || !std::isfinite(out.y[i])) {
      fail(ErrorCode::Internal, "neighbor embedding diverged");
    }
  }
  return out;
}

}  // namespace detail

// 2-D layout of the embeddings. pca projects the centred rows onto the two
// leading covariance eigenvectors, each signed so its largest-magnitude
// loading is positive. neighbor_embed runs a fixed 500-iteration
// stochastic-neighbour layout started from pca; it is reproducible for a
// given seed on one build but not across implementations.
inline Projection2D project_2d(const EmbeddingMatrix& emb, ProjectionMethod method = ProjectionMethod::pca,
                               std::uint64_t seed = 0) {
  if (emb.rows() < 3) fail(ErrorCode::DegenerateInput, "projection needs at least 3 rows");
  if (emb.dim() < 2) fail(ErrorCode::DegenerateInput, "projection needs at least 2 dimensions");
  return method == ProjectionMethod::pca ? detail::pca(emb, seed) : detail::neighbor_embed(emb, seed);
}

}  // namespace prism
