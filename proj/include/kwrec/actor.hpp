#pragma once

#include "kwrec/autodiff.hpp"
#include "kwrec/rng.hpp"
#include "kwrec/types.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace kwrec {

struct ActorConfig {
  Index feature_dim = 0;  // centroid dimension
  Index model_dim = 32;   // embedding, encoding and LSTM hidden size
};

/// View over the actor's tensors inside a ParamStore, under a name prefix
/// such as "actor.".
struct ActorParams {
  const ParamStore* store = nullptr;
  std::string prefix;
  ActorConfig config;
};

/// Creates and initializes every actor tensor under `prefix`.
void create_actor_params(ParamStore& store, const std::string& prefix,
                         const ActorConfig& config, Rng& rng);

/// Encoder weights bound on a tape (shared structure with the critic).
struct EncoderBinding {
  Tape::NodeId embed_w, embed_b;    // centroid -> embedding
  Tape::NodeId encode_w, encode_b;  // embedding -> encoding
};

/// One attention head bound on a tape: score_j = v . tanh(W_enc e_j + W_query q).
struct AttentionBinding {
  Tape::NodeId w_enc, w_query, v;
};

struct ActorBinding {
  ActorConfig config;
  EncoderBinding encoder;
  LstmWeights lstm;
  AttentionBinding glimpse;
  AttentionBinding pointer;
  Tape::NodeId start;  // learned decoder input for step 1
};

ActorBinding bind_actor(Tape& tape, const ActorParams& params);

struct EncodeNodes {
  Tape::NodeId encodings;       // k x d
  Tape::NodeId initial_hidden;  // d x 1, mean of encodings
};

/// Per-item encoder with no recurrence: e_i = W_e (W_l c_i + b_l) + b_e.
EncodeNodes encode_on_tape(Tape& tape, const EncoderBinding& enc,
                           Tape::NodeId centroids);

/// k x 1 attention logits given the precomputed projection E W_enc^T.
Tape::NodeId attention_logits(Tape& tape, Tape::NodeId enc_projection,
                              const AttentionBinding& att, Tape::NodeId query);

enum class DecodeMode { Sample, Greedy };

struct Rollout {
  std::vector<int> selected;  // distinct cluster indices, decode order
  std::vector<Scalar> step_log_probs;
  Scalar total_log_prob = 0.0;
  DecodeMode mode = DecodeMode::Greedy;
};

/// Picks the next cluster given the step's probability vector.
using StepChooser = std::function<int(const Vector& probs, int step)>;

struct DecodeNodes {
  Rollout rollout;
  Tape::NodeId total_log_prob = -1;
  std::vector<Tape::NodeId> step_log_prob_nodes;
};

/// The full decode loop on an existing tape. Every mode (sampling, greedy,
/// teacher-forced replay) goes through this one path, so replayed episodes
/// reproduce sampled log-probabilities bit for bit.
DecodeNodes decode_on_tape(Tape& tape, const ActorBinding& actor,
                           Tape::NodeId centroids, int steps,
                           const StepChooser& choose);

/// One episode: encode once, then `steps` LSTM steps of one glimpse plus
/// masked pointing attention. Greedy mode breaks ties toward the lowest
/// index; sample mode draws from the step distribution.
Rollout rollout(const ActorParams& params, const Matrix& centroids, int steps,
                DecodeMode mode, Rng* rng = nullptr);

// Spec-level single-shot helpers (each runs on a throwaway tape).
std::pair<Matrix, Vector> encode(const ActorParams& params,
                                 const Matrix& centroids);
Vector glimpse(const ActorParams& params, const Matrix& encodings,
               const Vector& decoder_out, const std::vector<bool>& mask);
Vector attention_step(const ActorParams& params, const Matrix& encodings,
                      const Vector& glimpse_vec, const std::vector<bool>& mask);

struct ActorEpisode {
  Rollout rollout;
  Scalar reward = 0.0;
  Scalar baseline = 0.0;
  Matrix centroids;
};

/// REINFORCE-with-baseline gradient of the batch objective
/// (1/B) sum_j (r_j - b_j) log p(a_j), obtained by replaying each
/// episode's selections through the tape. The caller ascends this
/// gradient. Only "prefix" tensors appear in the result.
GradMap actor_gradient(const ActorParams& params,
                       const std::vector<ActorEpisode>& episodes);

}  // namespace kwrec
