#pragma once

#include "kwrec/actor.hpp"
#include "kwrec/autodiff.hpp"
#include "kwrec/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace kwrec {

struct CriticConfig {
  Index feature_dim = 0;
  Index model_dim = 32;
  Index head_hidden = 32;
};

struct CriticParams {
  const ParamStore* store = nullptr;
  std::string prefix;
  CriticConfig config;
};

void create_critic_params(ParamStore& store, const std::string& prefix,
                          const CriticConfig& config, Rng& rng);

struct CriticBinding {
  CriticConfig config;
  EncoderBinding encoder;
  AttentionBinding glimpse;
  Tape::NodeId head_hidden_w, head_hidden_b;
  Tape::NodeId head_out_w, head_out_b;
};

CriticBinding bind_critic(Tape& tape, const CriticParams& params);

/// Scalar value node: encode, average the encodings, one unmasked glimpse
/// with the average as query, then the two-layer head.
Tape::NodeId critic_value_on_tape(Tape& tape, const CriticBinding& critic,
                                  Tape::NodeId centroids);

/// Reward estimate for one state (set of cluster centroids).
Scalar baseline(const CriticParams& params, const Matrix& centroids);

struct CriticSample {
  Matrix centroids;
  Scalar reward = 0.0;
};

/// Mean squared error between observed rewards and the critic's estimates,
/// plus its gradients (over "prefix" tensors only). The caller descends.
std::pair<Scalar, GradMap> critic_loss_and_grad(
    const CriticParams& params, const std::vector<CriticSample>& batch);

}  // namespace kwrec
