#pragma once

#include "pharl/matrix.hpp"
#include "pharl/rng.hpp"

namespace pharl {

// Feed-forward feature encoder: features -> tanh hidden layer -> linear
// projector -> L2-normalized embedding. Stands in for a video backbone; the
// learning mechanics only need some differentiable map into the sphere.
struct EncoderConfig {
  int feature_dim = 16;
  int hidden_dim = 64;
  int embed_dim = 32;
};

struct EncoderParams {
  EncoderConfig cfg;
  Matrix w1;                // hidden_dim x feature_dim
  std::vector<double> b1;   // hidden_dim
  Matrix w2;                // embed_dim x hidden_dim
  std::vector<double> b2;   // embed_dim

  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
};

struct ForwardResult {
  Matrix hidden;           // tanh activations
  Matrix pre_projection;   // projector output before normalization
  Matrix embeddings;       // unit rows
  std::vector<double> pre_norm;
};

ForwardResult forward(const EncoderParams& params, const Matrix& features);

// Embeddings only; order-preserving pure function of (params, features).
Matrix embed(const EncoderParams& params, const Matrix& features);

struct ParamGrads {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

// Backpropagates d_embeddings (dL/dz) and d_pre_projection (direct dL/du,
// from the variance term) through the normalization and both layers.
// Deterministic accumulation order; bit-stable across thread counts.
ParamGrads backward(const EncoderParams& params, const Matrix& features,
                    const ForwardResult& fwd, const Matrix& d_embeddings,
                    const Matrix& d_pre_projection);

// Per-parameter adaptive first-order update (Adam).
struct AdamState {
  Matrix m_w1, v_w1, m_w2, v_w2;
  std::vector<double> m_b1, v_b1, m_b2, v_b2;
  long step = 0;

  static AdamState zeros(const EncoderConfig& cfg);
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(EncoderParams& params, const ParamGrads& grads, AdamState& state,
               double learning_rate, const AdamConfig& cfg = {});

}  // namespace pharl
