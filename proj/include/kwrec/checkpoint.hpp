#pragma once

#include "kwrec/actor.hpp"
#include "kwrec/autodiff.hpp"
#include "kwrec/critic.hpp"
#include "kwrec/types.hpp"

#include <cstdint>
#include <string>

namespace kwrec {

/// Everything needed to reproduce a trained model and continue updating
/// it deterministically: tensors, optimizer moments, step counters, and
/// the seed / iteration coordinates driving the derived RNG streams.
struct Checkpoint {
  int version = 1;
  Index feature_dim = 0;
  Index model_dim = 32;
  int cluster_size = 0;  // n
  int output_size = 0;   // K_total; decode steps = output_size / cluster_size
  std::uint64_t seed = 0;
  int iteration = 0;
  ParamStore params;
  AdamState adam_actor;
  AdamState adam_critic;
};

ActorParams actor_view(const Checkpoint& checkpoint);
CriticParams critic_view(const Checkpoint& checkpoint);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace kwrec
