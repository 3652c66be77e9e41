#include "kwrec/actor.hpp"

#include <cmath>

namespace kwrec {

namespace {

constexpr const char* kEmbedW = "embed.W";
constexpr const char* kEmbedB = "embed.b";
constexpr const char* kEncodeW = "encode.W";
constexpr const char* kEncodeB = "encode.b";
constexpr const char* kGlimpseEnc = "glimpse.W_enc";
constexpr const char* kGlimpseQuery = "glimpse.W_query";
constexpr const char* kGlimpseV = "glimpse.v";
constexpr const char* kPointEnc = "point.W_enc";
constexpr const char* kPointQuery = "point.W_query";
constexpr const char* kPointV = "point.v";
constexpr const char* kStart = "start";
const char* const kLstmGates[4] = {"i", "f", "g", "o"};

}  // namespace

void create_actor_params(ParamStore& store, const std::string& prefix,
                         const ActorConfig& config, Rng& rng) {
  const Index d_f = config.feature_dim;
  const Index d = config.model_dim;
  if (d_f <= 0 || d <= 0) {
    throw ArgumentError("actor config: dimensions must be positive");
  }
  const auto make = [&](const std::string& name, Index rows, Index cols,
                        Index fan_in) {
    Matrix& tensor = store.create(prefix + name, rows, cols);
    init_uniform_fan_in(tensor, fan_in, rng);
  };
  make(kEmbedW, d, d_f, d_f);
  make(kEmbedB, d, 1, d_f);
  make(kEncodeW, d, d, d);
  make(kEncodeB, d, 1, d);
  for (const char* gate : kLstmGates) {
    make(std::string("lstm.Wx_") + gate, d, d, d);
    make(std::string("lstm.Wh_") + gate, d, d, d);
    make(std::string("lstm.b_") + gate, d, 1, d);
  }
  make(kGlimpseEnc, d, d, d);
  make(kGlimpseQuery, d, d, d);
  make(kGlimpseV, d, 1, d);
  make(kPointEnc, d, d, d);
  make(kPointQuery, d, d, d);
  make(kPointV, d, 1, d);
  make(kStart, d, 1, d);
}

ActorBinding bind_actor(Tape& tape, const ActorParams& params) {
  const ParamStore& store = *params.store;
  const std::string& p = params.prefix;
  ActorBinding b;
  b.config = params.config;
  b.encoder = {tape.param(store, p + kEmbedW), tape.param(store, p + kEmbedB),
               tape.param(store, p + kEncodeW), tape.param(store, p + kEncodeB)};
  LstmGate* gates[4] = {&b.lstm.input, &b.lstm.forget, &b.lstm.cell,
                        &b.lstm.output};
  for (int i = 0; i < 4; ++i) {
    gates[i]->w_x = tape.param(store, p + "lstm.Wx_" + kLstmGates[i]);
    gates[i]->w_h = tape.param(store, p + "lstm.Wh_" + kLstmGates[i]);
    gates[i]->b = tape.param(store, p + "lstm.b_" + kLstmGates[i]);
  }
  b.glimpse = {tape.param(store, p + kGlimpseEnc),
               tape.param(store, p + kGlimpseQuery),
               tape.param(store, p + kGlimpseV)};
  b.pointer = {tape.param(store, p + kPointEnc),
               tape.param(store, p + kPointQuery),
               tape.param(store, p + kPointV)};
  b.start = tape.param(store, p + kStart);
  return b;
}

EncodeNodes encode_on_tape(Tape& tape, const EncoderBinding& enc,
                           Tape::NodeId centroids) {
  const Index k = tape.value(centroids).rows();
  const Tape::NodeId embedded = tape.add_rowwise(
      tape.matmul(centroids, tape.transpose(enc.embed_w)), enc.embed_b);
  const Tape::NodeId encodings = tape.add_rowwise(
      tape.matmul(embedded, tape.transpose(enc.encode_w)), enc.encode_b);
  const Tape::NodeId averaging = tape.constant(
      Matrix::Constant(k, 1, 1.0 / static_cast<Scalar>(k)));
  const Tape::NodeId initial_hidden =
      tape.matmul(tape.transpose(encodings), averaging);
  return {encodings, initial_hidden};
}

Tape::NodeId attention_logits(Tape& tape, Tape::NodeId enc_projection,
                              const AttentionBinding& att, Tape::NodeId query) {
  const Tape::NodeId q = tape.matmul(att.w_query, query);
  const Tape::NodeId activated = tape.tanh(tape.add_rowwise(enc_projection, q));
  return tape.matmul(activated, att.v);
}

DecodeNodes decode_on_tape(Tape& tape, const ActorBinding& actor,
                           Tape::NodeId centroids, int steps,
                           const StepChooser& choose) {
  const Index k = tape.value(centroids).rows();
  if (steps < 1 || static_cast<Index>(steps) > k) {
    throw ArgumentError("decode: need 1 <= steps <= clusters, got steps=" +
                        std::to_string(steps) + ", clusters=" +
                        std::to_string(k));
  }
  const auto [encodings, initial_hidden] =
      encode_on_tape(tape, actor.encoder, centroids);
  const Tape::NodeId glimpse_proj =
      tape.matmul(encodings, tape.transpose(actor.glimpse.w_enc));
  const Tape::NodeId pointer_proj =
      tape.matmul(encodings, tape.transpose(actor.pointer.w_enc));

  DecodeNodes out;
  LstmState state{initial_hidden,
                  tape.constant(Matrix::Zero(actor.config.model_dim, 1))};
  Tape::NodeId x = actor.start;
  std::vector<bool> mask(static_cast<std::size_t>(k), false);

  for (int step = 0; step < steps; ++step) {
    state = lstm_cell(tape, actor.lstm, x, state);
    const Tape::NodeId glimpse_logits =
        attention_logits(tape, glimpse_proj, actor.glimpse, state.h);
    const Tape::NodeId glimpse_probs = tape.masked_softmax(glimpse_logits, mask);
    const Tape::NodeId glimpse_vec =
        tape.matmul(tape.transpose(encodings), glimpse_probs);
    const Tape::NodeId pointer_logits =
        attention_logits(tape, pointer_proj, actor.pointer, glimpse_vec);
    const Tape::NodeId probs = tape.masked_softmax(pointer_logits, mask);

    const int chosen = choose(tape.value(probs).col(0), step);
    if (chosen < 0 || static_cast<Index>(chosen) >= k ||
        mask[static_cast<std::size_t>(chosen)]) {
      throw ArgumentError("decode: chooser returned an invalid cluster index");
    }
    const Tape::NodeId step_log_prob = tape.log(tape.pick(probs, chosen));
    out.total_log_prob = out.total_log_prob < 0
                             ? step_log_prob
                             : tape.add(out.total_log_prob, step_log_prob);
    out.step_log_prob_nodes.push_back(step_log_prob);
    out.rollout.selected.push_back(chosen);
    out.rollout.step_log_probs.push_back(tape.value(step_log_prob)(0, 0));
    mask[static_cast<std::size_t>(chosen)] = true;
    x = tape.row(encodings, chosen);
  }
  out.rollout.total_log_prob = tape.value(out.total_log_prob)(0, 0);
  return out;
}

namespace {

int greedy_choice(const Vector& probs) {
  int best = -1;
  Scalar best_p = -1.0;
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs(i) > best_p) {
      best_p = probs(i);
      best = static_cast<int>(i);
    }
  }
  return best;
}

int sampled_choice(const Vector& probs, Rng& rng) {
  const Scalar u = rng.uniform01();
  Scalar cumulative = 0.0;
  int last_positive = -1;
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cumulative += probs(i);
    if (u < cumulative) return last_positive;
  }
  return last_positive;  // guards against cumulative < 1 from rounding
}

}  // namespace

Rollout rollout(const ActorParams& params, const Matrix& centroids, int steps,
                DecodeMode mode, Rng* rng) {
  if (mode == DecodeMode::Sample && rng == nullptr) {
    throw ArgumentError("rollout: sample mode requires an rng");
  }
  Tape tape;
  const ActorBinding binding = bind_actor(tape, params);
  const Tape::NodeId c = tape.constant(centroids);
  const StepChooser choose =
      mode == DecodeMode::Greedy
          ? StepChooser([](const Vector& p, int) { return greedy_choice(p); })
          : StepChooser([rng](const Vector& p, int) {
              return sampled_choice(p, *rng);
            });
  DecodeNodes decoded = decode_on_tape(tape, binding, c, steps, choose);
  decoded.rollout.mode = mode;
  return decoded.rollout;
}

std::pair<Matrix, Vector> encode(const ActorParams& params,
                                 const Matrix& centroids) {
  Tape tape;
  const ActorBinding binding = bind_actor(tape, params);
  const EncodeNodes nodes =
      encode_on_tape(tape, binding.encoder, tape.constant(centroids));
  return {tape.value(nodes.encodings),
          tape.value(nodes.initial_hidden).col(0)};
}

Vector glimpse(const ActorParams& params, const Matrix& encodings,
               const Vector& decoder_out, const std::vector<bool>& mask) {
  Tape tape;
  const ActorBinding binding = bind_actor(tape, params);
  const Tape::NodeId e = tape.constant(encodings);
  const Tape::NodeId proj =
      tape.matmul(e, tape.transpose(binding.glimpse.w_enc));
  const Tape::NodeId logits = attention_logits(
      tape, proj, binding.glimpse, tape.constant(decoder_out));
  const Tape::NodeId probs = tape.masked_softmax(logits, mask);
  const Tape::NodeId vec = tape.matmul(tape.transpose(e), probs);
  return tape.value(vec).col(0);
}

Vector attention_step(const ActorParams& params, const Matrix& encodings,
                      const Vector& glimpse_vec, const std::vector<bool>& mask) {
  Tape tape;
  const ActorBinding binding = bind_actor(tape, params);
  const Tape::NodeId e = tape.constant(encodings);
  const Tape::NodeId proj =
      tape.matmul(e, tape.transpose(binding.pointer.w_enc));
  const Tape::NodeId logits = attention_logits(
      tape, proj, binding.pointer, tape.constant(glimpse_vec));
  const Tape::NodeId probs = tape.masked_softmax(logits, mask);
  return tape.value(probs).col(0);
}

GradMap actor_gradient(const ActorParams& params,
                       const std::vector<ActorEpisode>& episodes) {
  if (episodes.empty()) {
    throw ArgumentError("actor_gradient: empty episode batch");
  }
  Tape tape;
  const ActorBinding binding = bind_actor(tape, params);
  const Scalar batch = static_cast<Scalar>(episodes.size());
  Tape::NodeId objective = -1;
  for (const ActorEpisode& ep : episodes) {
    const Tape::NodeId c = tape.constant(ep.centroids);
    const std::vector<int>& forced = ep.rollout.selected;
    const DecodeNodes replay = decode_on_tape(
        tape, binding, c, static_cast<int>(forced.size()),
        [&forced](const Vector&, int step) {
          return forced[static_cast<std::size_t>(step)];
        });
    const Scalar advantage = ep.reward - ep.baseline;
    const Tape::NodeId term =
        tape.scale(replay.total_log_prob, advantage / batch);
    objective = objective < 0 ? term : tape.add(objective, term);
  }
  GradMap all = tape.backward(objective, *params.store);
  GradMap own;
  for (auto& [name, grad] : all) {
    if (name.rfind(params.prefix, 0) == 0) own.emplace(name, std::move(grad));
  }
  return own;
}

}  // namespace kwrec
