#include "pharl/encoder.hpp"

#include <cmath>

#include "pharl/errors.hpp"

namespace pharl {

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  EncoderParams p;
  p.cfg = cfg;
  p.w1 = Matrix(cfg.hidden_dim, cfg.feature_dim);
  p.b1.assign(cfg.hidden_dim, 0.0);
  p.w2 = Matrix(cfg.embed_dim, cfg.hidden_dim);
  p.b2.assign(cfg.embed_dim, 0.0);
  const double s1 = 1.0 / std::sqrt(double(cfg.feature_dim));
  for (double& v : p.w1.data) v = s1 * rng.normal();
  const double s2 = 1.0 / std::sqrt(double(cfg.hidden_dim));
  for (double& v : p.w2.data) v = s2 * rng.normal();
  return p;
}

ForwardResult forward(const EncoderParams& params, const Matrix& features) {
  const auto& cfg = params.cfg;
  if (features.cols != cfg.feature_dim)
    throw ValidationError("encoder: feature dimension " + std::to_string(features.cols) +
                          " does not match checkpoint dimension " + std::to_string(cfg.feature_dim));
  const int n = features.rows;
  ForwardResult out;
  out.hidden = Matrix(n, cfg.hidden_dim);
  out.pre_projection = Matrix(n, cfg.embed_dim);
  out.embeddings = Matrix(n, cfg.embed_dim);
  out.pre_norm.assign(n, 0.0);

#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* x = features.row(r);
    double* h = out.hidden.row(r);
    for (int j = 0; j < cfg.hidden_dim; ++j)
      h[j] = std::tanh(params.b1[j] + dot(params.w1.row(j), x, cfg.feature_dim));
    double* u = out.pre_projection.row(r);
    for (int j = 0; j < cfg.embed_dim; ++j)
      u[j] = params.b2[j] + dot(params.w2.row(j), h, cfg.hidden_dim);
    double nrm = norm2(u, cfg.embed_dim);
    if (nrm < 1e-12) nrm = 1e-12;
    out.pre_norm[r] = nrm;
    double* z = out.embeddings.row(r);
    for (int j = 0; j < cfg.embed_dim; ++j) z[j] = u[j] / nrm;
  }
  return out;
}

Matrix embed(const EncoderParams& params, const Matrix& features) {
  return forward(params, features).embeddings;
}

ParamGrads backward(const EncoderParams& params, const Matrix& features,
                    const ForwardResult& fwd, const Matrix& d_embeddings,
                    const Matrix& d_pre_projection) {
  const auto& cfg = params.cfg;
  const int n = features.rows;

  // Through z = u / |u|: du = (dz - (dz . z) z) / |u| + direct du.
  Matrix du(n, cfg.embed_dim);
  Matrix da(n, cfg.hidden_dim);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* dz = d_embeddings.row(r);
    const double* z = fwd.embeddings.row(r);
    const double proj = dot(dz, z, cfg.embed_dim);
    double* durow = du.row(r);
    for (int j = 0; j < cfg.embed_dim; ++j)
      durow[j] = (dz[j] - proj * z[j]) / fwd.pre_norm[r] + d_pre_projection.at(r, j);
    const double* h = fwd.hidden.row(r);
    double* darow = da.row(r);
    for (int k = 0; k < cfg.hidden_dim; ++k) {
      double s = 0.0;
      for (int j = 0; j < cfg.embed_dim; ++j) s += durow[j] * params.w2.at(j, k);
      darow[k] = s * (1.0 - h[k] * h[k]);
    }
  }

  ParamGrads g;
  g.w1 = Matrix(cfg.hidden_dim, cfg.feature_dim);
  g.b1.assign(cfg.hidden_dim, 0.0);
  g.w2 = Matrix(cfg.embed_dim, cfg.hidden_dim);
  g.b2.assign(cfg.embed_dim, 0.0);

  // Weight gradients accumulate over rows in row order for every entry, so
  // sums are independent of the thread partition.
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cfg.embed_dim; ++j) {
    for (int k = 0; k < cfg.hidden_dim; ++k) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += du.at(r, j) * fwd.hidden.at(r, k);
      g.w2.at(j, k) = s;
    }
    double sb = 0.0;
    for (int r = 0; r < n; ++r) sb += du.at(r, j);
    g.b2[j] = sb;
  }

#pragma omp parallel for schedule(static)
  for (int k = 0; k < cfg.hidden_dim; ++k) {
    for (int f = 0; f < cfg.feature_dim; ++f) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += da.at(r, k) * features.at(r, f);
      g.w1.at(k, f) = s;
    }
    double sb = 0.0;
    for (int r = 0; r < n; ++r) sb += da.at(r, k);
    g.b1[k] = sb;
  }
  return g;
}

AdamState AdamState::zeros(const EncoderConfig& cfg) {
  AdamState s;
  s.m_w1 = Matrix(cfg.hidden_dim, cfg.feature_dim);
  s.v_w1 = Matrix(cfg.hidden_dim, cfg.feature_dim);
  s.m_w2 = Matrix(cfg.embed_dim, cfg.hidden_dim);
  s.v_w2 = Matrix(cfg.embed_dim, cfg.hidden_dim);
  s.m_b1.assign(cfg.hidden_dim, 0.0);
  s.v_b1.assign(cfg.hidden_dim, 0.0);
  s.m_b2.assign(cfg.embed_dim, 0.0);
  s.v_b2.assign(cfg.embed_dim, 0.0);
  return s;
}

namespace {

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, double lr_t, const AdamConfig& cfg) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + cfg.eps);
  }
}

}  // namespace

void adam_step(EncoderParams& params, const ParamGrads& grads, AdamState& state,
               double learning_rate, const AdamConfig& cfg) {
  state.step += 1;
  const double bias1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  const double lr_t = learning_rate * std::sqrt(bias2) / bias1;
  adam_update(params.w1.data, grads.w1.data, state.m_w1.data, state.v_w1.data, lr_t, cfg);
  adam_update(params.b1, grads.b1, state.m_b1, state.v_b1, lr_t, cfg);
  adam_update(params.w2.data, grads.w2.data, state.m_w2.data, state.v_w2.data, lr_t, cfg);
  adam_update(params.b2, grads.b2, state.m_b2, state.v_b2, lr_t, cfg);
}

}  // namespace pharl
