#include "kwrec/critic.hpp"

namespace kwrec {

void create_critic_params(ParamStore& store, const std::string& prefix,
                          const CriticConfig& config, Rng& rng) {
  const Index d_f = config.feature_dim;
  const Index d = config.model_dim;
  const Index hidden = config.head_hidden;
  if (d_f <= 0 || d <= 0 || hidden <= 0) {
    throw ArgumentError("critic config: dimensions must be positive");
  }
  const auto make = [&](const std::string& name, Index rows, Index cols,
                        Index fan_in) {
    Matrix& tensor = store.create(prefix + name, rows, cols);
    init_uniform_fan_in(tensor, fan_in, rng);
  };
  make("embed.W", d, d_f, d_f);
  make("embed.b", d, 1, d_f);
  make("encode.W", d, d, d);
  make("encode.b", d, 1, d);
  make("glimpse.W_enc", d, d, d);
  make("glimpse.W_query", d, d, d);
  make("glimpse.v", d, 1, d);
  make("head.hidden.W", hidden, d, d);
  make("head.hidden.b", hidden, 1, d);
  make("head.out.W", 1, hidden, hidden);
  make("head.out.b", 1, 1, hidden);
}

CriticBinding bind_critic(Tape& tape, const CriticParams& params) {
  const ParamStore& store = *params.store;
  const std::string& p = params.prefix;
  CriticBinding b;
  b.config = params.config;
  b.encoder = {tape.param(store, p + "embed.W"), tape.param(store, p + "embed.b"),
               tape.param(store, p + "encode.W"),
               tape.param(store, p + "encode.b")};
  b.glimpse = {tape.param(store, p + "glimpse.W_enc"),
               tape.param(store, p + "glimpse.W_query"),
               tape.param(store, p + "glimpse.v")};
  b.head_hidden_w = tape.param(store, p + "head.hidden.W");
  b.head_hidden_b = tape.param(store, p + "head.hidden.b");
  b.head_out_w = tape.param(store, p + "head.out.W");
  b.head_out_b = tape.param(store, p + "head.out.b");
  return b;
}

Tape::NodeId critic_value_on_tape(Tape& tape, const CriticBinding& critic,
                                  Tape::NodeId centroids) {
  const auto [encodings, mean_encoding] =
      encode_on_tape(tape, critic.encoder, centroids);
  const Tape::NodeId proj =
      tape.matmul(encodings, tape.transpose(critic.glimpse.w_enc));
  const Tape::NodeId logits =
      attention_logits(tape, proj, critic.glimpse, mean_encoding);
  const Tape::NodeId weights = tape.masked_softmax(logits, {});
  const Tape::NodeId glimpse_vec =
      tape.matmul(tape.transpose(encodings), weights);
  const Tape::NodeId hidden = tape.tanh(
      tape.affine(critic.head_hidden_w, glimpse_vec, critic.head_hidden_b));
  return tape.affine(critic.head_out_w, hidden, critic.head_out_b);
}

Scalar baseline(const CriticParams& params, const Matrix& centroids) {
  Tape tape;
  const CriticBinding binding = bind_critic(tape, params);
  const Tape::NodeId value =
      critic_value_on_tape(tape, binding, tape.constant(centroids));
  return tape.value(value)(0, 0);
}

std::pair<Scalar, GradMap> critic_loss_and_grad(
    const CriticParams& params, const std::vector<CriticSample>& batch) {
  if (batch.empty()) {
    throw ArgumentError("critic_loss_and_grad: empty batch");
  }
  Tape tape;
  const CriticBinding binding = bind_critic(tape, params);
  Tape::NodeId total = -1;
  for (const CriticSample& sample : batch) {
    const Tape::NodeId value =
        critic_value_on_tape(tape, binding, tape.constant(sample.centroids));
    const Tape::NodeId target =
        tape.constant(Matrix::Constant(1, 1, sample.reward));
    const Tape::NodeId err = tape.square(tape.sub(target, value));
    total = total < 0 ? err : tape.add(total, err);
  }
  const Tape::NodeId loss =
      tape.scale(total, 1.0 / static_cast<Scalar>(batch.size()));
  GradMap all = tape.backward(loss, *params.store);
  GradMap own;
  for (auto& [name, grad] : all) {
    if (name.rfind(params.prefix, 0) == 0) own.emplace(name, std::move(grad));
  }
  return {tape.value(loss)(0, 0), std::move(own)};
}

}  // namespace kwrec
