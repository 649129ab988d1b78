#pragma once

// Dense-grid check of every full conditional of the sampler: each scalar
// parameter is swept over a grid with the rest of the state frozen, the
// oracle joint density is integrated numerically, and its mean/variance are
// compared with the closed-form conditional the sampler draws from.

#include "fixtures.hpp"
#include "oracle.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace oracle {

struct ConditionalMismatch {
  std::string parameter;
  double expected_mean, grid_mean, expected_var, grid_var;
};

struct ConditionalReport {
  int checks = 0;
  std::vector<ConditionalMismatch> mismatches;
};

inline bool close_enough(double mean_a, double mean_b, double var_a, double var_b) {
  return std::abs(mean_a - mean_b) <= 0.05 && std::abs(var_a - var_b) <= 0.2 * std::abs(var_b);
}

inline void check_conditionals(const fixtures::Tiny& t, ConditionalReport& report) {
  namespace m = cpredict::model;
  const m::Priors pr;
  const auto& data = t.data;
  const m::ModelState base = t.state;
  const int V = base.V(), n = data.n(), P = data.P();
  const Eigen::MatrixXd Q = base.Sigma.inverse();

  auto record = [&](const std::string& name, double em, double ev, const Moments& g) {
    ++report.checks;
    if (!close_enough(em, g.mean, ev, g.variance)) report.mismatches.push_back({name, em, g.mean, ev, g.variance});
  };
  auto joint = [&](auto&& set) {
    return [&, set](double x) {
      m::ModelState s = base;
      set(s, x);
      return log_joint<double>(s, data, pr);
    };
  };

  for (int j = 0; j < n; ++j) {
    for (int v = 0; v < V; ++v) {
      const auto c = m::latent_conditional(base, data, Q, j, v);
      record("y[" + std::to_string(j) + "," + std::to_string(v) + "]", c.mean, c.variance,
             grid_moments_real(joint([j, v](m::ModelState& s, double x) { s.Y(j, v) = x; })));
    }
    const auto k = m::construct_conditional(base, data, Q, j);
    record("kappa[" + std::to_string(j) + "]", k.mean, k.variance,
           grid_moments_real(joint([j](m::ModelState& s, double x) { s.kappa(j) = x; })));
  }
  for (int u = 0; u < V; ++u) {
    for (int v = u + 1; v < V; ++v) {
      const auto c = m::connectome_intercept_conditional(base, data, pr, u, v);
      record("D[" + std::to_string(u) + "," + std::to_string(v) + "]", c.mean, c.variance,
             grid_moments_real(joint([u, v](m::ModelState& s, double x) { s.D(u, v) = s.D(v, u) = x; })));
    }
  }
  for (int p = 0; p < P; ++p) {
    const auto c = m::behavior_intercept_conditional(base, data, pr, p);
    record("e[" + std::to_string(p) + "]", c.mean, c.variance,
           grid_moments_real(joint([p](m::ModelState& s, double x) { s.e(p) = x; })));
  }

  // Latent mean: scalar conditional of mu_v from the joint Gaussian.
  const auto mu = m::latent_mean_conditional(base, data, Q, pr);
  for (int v = 0; v < V; ++v) {
    double shift = 0.0;
    for (int w = 0; w < V; ++w) {
      if (w != v) shift += mu.precision(v, w) * (base.latent_mean(w) - mu.mean(w));
    }
    const double var = 1.0 / mu.precision(v, v);
    record("mu[" + std::to_string(v) + "]", mu.mean(v) - shift * var, var,
           grid_moments_real(joint([v](m::ModelState& s, double x) { s.latent_mean(v) = x; })));
  }

  const auto c2 = m::connectome_noise_conditional(base, data, pr);
  record("sigma2_c", c2.scale / (c2.shape - 1),
         c2.scale * c2.scale / ((c2.shape - 1) * (c2.shape - 1) * (c2.shape - 2)),
         grid_moments_above(joint([](m::ModelState& s, double x) { s.sigma2_c = x; }), 0.0));
  for (int p = 0; p < P; ++p) {
    const auto b2 = m::behavior_noise_conditional(base, data, pr, p);
    record("sigma2_b[" + std::to_string(p) + "]", b2.scale / (b2.shape - 1),
           b2.scale * b2.scale / ((b2.shape - 1) * (b2.shape - 1) * (b2.shape - 2)),
           grid_moments_above(joint([p](m::ModelState& s, double x) { s.sigma2_b(p) = x; }), 0.0));
  }

  // Sigma: sweep each unique element along its line; the reference is the
  // inverse-Wishart density with the sampler's (df, scale) on the same line.
  const auto iw = m::covariance_conditional(base, data, pr);
  const Mat<double> iw_scale = to_mat<double>(iw.scale);
  const int d = V + 1;
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      auto with = [&](double x) {
        Eigen::MatrixXd s = base.Sigma;
        s(a, b) = s(b, a) = x;
        return s;
      };
      auto is_pd = [&](double x) { return Eigen::LLT<Eigen::MatrixXd>(with(x)).info() == Eigen::Success; };
      auto joint_sigma = [&](double x) {
        if (!is_pd(x)) return -std::numeric_limits<double>::infinity();
        m::ModelState s = base;
        s.Sigma = with(x);
        return log_joint<double>(s, data, pr);
      };
      auto ref_sigma = [&](double x) {
        if (!is_pd(x)) return -std::numeric_limits<double>::infinity();
        return log_inv_wishart<double>(to_mat<double>(with(x)), iw.df, iw_scale);
      };
      // PD boundary along the line, by bisection from the current value.
      auto edge = [&](double dir) {
        double inside = base.Sigma(a, b), step = 1e-3;
        while (is_pd(inside + dir * step) && step < 1e6) step *= 2;
        if (step >= 1e6) return inside + dir * step;
        double lo = 0, hi = step;
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          (is_pd(inside + dir * mid) ? lo : hi) = mid;
        }
        return inside + dir * lo;
      };
      const std::string name = "Sigma[" + std::to_string(a) + "," + std::to_string(b) + "]";
      Moments g, r;
      if (a == b) {
        const double lo = edge(-1.0);
        g = grid_moments_above(joint_sigma, lo, -25.0, 14.0, 40001);
        r = grid_moments_above(ref_sigma, lo, -25.0, 14.0, 40001);
      } else {
        const double lo = edge(-1.0), hi = edge(1.0);
        g = grid_moments(joint_sigma, lo, hi, 40001);
        r = grid_moments(ref_sigma, lo, hi, 40001);
      }
      record(name, r.mean, r.variance, g);
    }
  }

  // Sign reflection: exact two-point conditional.
  for (int j = 0; j < n; ++j) {
    m::ModelState flipped = base;
    flipped.Y.row(j) *= -1.0;
    const double l0 = log_joint<double>(base, data, pr), l1 = log_joint<double>(flipped, data, pr);
    const double expected = 1.0 / (1.0 + std::exp(l0 - l1));
    const double got = m::sign_flip_probability(base, Q, j);
    ++report.checks;
    if (std::abs(expected - got) > 1e-8) {
      report.mismatches.push_back({"flip[" + std::to_string(j) + "]", got, expected, 0.0, 0.0});
    }
  }
}

}  // namespace oracle
