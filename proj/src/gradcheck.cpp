#include "kwrec/gradcheck.hpp"

#include "kwrec/actor.hpp"
#include "kwrec/critic.hpp"

#include <algorithm>

namespace kwrec {

namespace {

// Audit network: small enough that central differences stay far above
// rounding noise, and weights scaled past the near-linear regime where
// softmax shift-invariance suppresses the query-path gradients.
constexpr Index kFeatureDim = 3;
constexpr Index kModelDim = 4;
constexpr Index kClusters = 6;
constexpr int kDecodeSteps = 6;
constexpr Scalar kWeightScale = 1.8;
constexpr Scalar kCentroidSd = 1.5;
constexpr Scalar kEps = 1e-5;
constexpr int kProbes = 20;
constexpr int kTrials = 3;
constexpr Scalar kThreshold = 1e-4;

Scalar audit_loss(const LossBuilder& loss, ParamStore& params,
                  Rng& probe_rng, bool corrupt) {
  GradMap corrupted;
  const GradMap* override_grads = nullptr;
  if (corrupt) {
    Tape tape;
    corrupted = tape.backward(loss(tape, params), params);
    for (auto& [name, grad] : corrupted) grad.array() += 1.0;
    override_grads = &corrupted;
  }
  return finite_diff_check(loss, params, kEps, kProbes, probe_rng,
                           override_grads)
      .max_rel_error;
}

}  // namespace

GradAuditReport run_gradient_audit(std::uint64_t seed, bool corrupt) {
  GradAuditReport report;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::uint64_t trial_seed = mix_seed(seed, 0x67636b, trial);
    Rng init_rng(trial_seed);
    const ActorConfig actor_config{kFeatureDim, kModelDim};
    const CriticConfig critic_config{kFeatureDim, kModelDim, kModelDim};
    ParamStore actor_store;
    ParamStore critic_store;
    create_actor_params(actor_store, "actor.", actor_config, init_rng);
    create_critic_params(critic_store, "critic.", critic_config, init_rng);
    for (auto& [name, tensor] : actor_store.entries()) tensor *= kWeightScale;
    for (auto& [name, tensor] : critic_store.entries()) tensor *= kWeightScale;

    Matrix centroids(kClusters, kFeatureDim);
    for (Index r = 0; r < centroids.rows(); ++r) {
      for (Index c = 0; c < centroids.cols(); ++c) {
        centroids(r, c) = init_rng.normal(0.0, kCentroidSd);
      }
    }

    const ActorParams actor{&actor_store, "actor.", actor_config};
    Rng sample_rng(mix_seed(trial_seed, 1, 0));
    const Rollout fixed = rollout(actor, centroids, kDecodeSteps,
                                  DecodeMode::Sample, &sample_rng);

    const LossBuilder actor_loss = [&](Tape& tape, const ParamStore& store) {
      const ActorParams view{&store, "actor.", actor_config};
      const ActorBinding binding = bind_actor(tape, view);
      return decode_on_tape(tape, binding, tape.constant(centroids),
                            kDecodeSteps,
                            [&fixed](const Vector&, int step) {
                              return fixed.selected[
                                  static_cast<std::size_t>(step)];
                            })
          .total_log_prob;
    };
    const LossBuilder critic_loss = [&](Tape& tape, const ParamStore& store) {
      const CriticParams view{&store, "critic.", critic_config};
      const CriticBinding binding = bind_critic(tape, view);
      const Tape::NodeId value =
          critic_value_on_tape(tape, binding, tape.constant(centroids));
      const Tape::NodeId target = tape.constant(Matrix::Constant(1, 1, 2.5));
      return tape.square(tape.sub(target, value));
    };

    Rng actor_probe(mix_seed(trial_seed, 2, 0));
    report.worst_actor_error =
        std::max(report.worst_actor_error,
                 audit_loss(actor_loss, actor_store, actor_probe, corrupt));
    Rng critic_probe(mix_seed(trial_seed, 2, 1));
    report.worst_critic_error =
        std::max(report.worst_critic_error,
                 audit_loss(critic_loss, critic_store, critic_probe, corrupt));
  }
  report.worst_error =
      std::max(report.worst_actor_error, report.worst_critic_error);
  report.pass = report.worst_error < kThreshold;
  return report;
}

}  // namespace kwrec
