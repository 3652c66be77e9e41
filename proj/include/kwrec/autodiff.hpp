#pragma once

#include "kwrec/rng.hpp"
#include "kwrec/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kwrec {

using GradMap = std::map<std::string, Matrix>;

/// Named tensors for a model (actor and critic share one store, with
/// "actor." / "critic." name prefixes). Shapes are fixed at creation.
class ParamStore {
 public:
  Matrix& create(const std::string& name, Index rows, Index cols);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  const std::map<std::string, Matrix>& entries() const { return entries_; }
  std::map<std::string, Matrix>& entries() { return entries_; }

 private:
  std::map<std::string, Matrix> entries_;
};

/// Reverse-mode tape over matrix-valued nodes. A tape is confined to one
/// rollout / loss evaluation; parameters are bound once per tape (memoized
/// by name) so adjoints accumulate in a single leaf per parameter.
class Tape {
 public:
  using NodeId = std::int32_t;

  NodeId param(const ParamStore& store, const std::string& name);
  NodeId constant(Matrix value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, Scalar factor);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  /// Adds column vector v (d x 1) to every row of m (k x d).
  NodeId add_rowwise(NodeId m, NodeId v);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  NodeId sum(NodeId a);   // 1x1
  NodeId mean(NodeId a);  // 1x1
  /// Entry i of a column vector, as a 1x1 node.
  NodeId pick(NodeId v, Index i);
  /// Row r of a matrix, as a column vector.
  NodeId row(NodeId m, Index r);
  /// W*x + b with shape checks naming both shapes on mismatch.
  NodeId affine(NodeId w, NodeId x, NodeId b);
  /// Softmax over a column vector with hard-masked entries forced to
  /// exactly zero. The mask is a constant: no gradient flows through
  /// masked entries. An empty mask means nothing is masked.
  NodeId masked_softmax(NodeId logits, std::vector<bool> mask);

  const Matrix& value(NodeId id) const;

  /// Exact reverse-mode gradients of a 1x1 output with respect to every
  /// parameter in the store; parameters not used on this tape get zeros.
  GradMap backward(NodeId output, const ParamStore& store) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Param,
    Constant,
    Add,
    Sub,
    Mul,
    Scale,
    MatMul,
    Transpose,
    AddRowwise,
    Tanh,
    Sigmoid,
    Log,
    Square,
    Sum,
    Mean,
    Pick,
    Row,
    Affine,
    MaskedSoftmax,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    NodeId c = -1;
    Matrix value;
    Scalar factor = 0.0;
    Index index = -1;
    std::vector<bool> mask;
    std::string param_name;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> bound_params_;
};

/// One LSTM gate: pre-activation = W_x * x + W_h * h_prev + b.
struct LstmGate {
  Tape::NodeId w_x;
  Tape::NodeId w_h;
  Tape::NodeId b;
};

struct LstmWeights {
  LstmGate input;
  LstmGate forget;
  LstmGate cell;
  LstmGate output;
};

struct LstmState {
  Tape::NodeId h;
  Tape::NodeId c;
};

/// Standard LSTM cell recorded on the tape:
/// i,f,o = sigmoid(gate), g = tanh(gate), c = f.c_prev + i.g, h = o.tanh(c).
LstmState lstm_cell(Tape& tape, const LstmWeights& w, Tape::NodeId x,
                    const LstmState& prev);

struct AdamConfig {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// Adam with bias correction, descending the given gradients in place.
/// Moments are kept per parameter name; the step counter increments once
/// per step() call.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  void step(ParamStore& params, const GradMap& grads);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::map<std::string, Matrix>& first_moments() const { return m_; }
  const std::map<std::string, Matrix>& second_moments() const { return v_; }

  void restore(std::int64_t t, std::map<std::string, Matrix> m,
               std::map<std::string, Matrix> v);

 private:
  AdamConfig config_{};
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
  std::int64_t t_ = 0;
};

/// Fills a tensor with uniform draws in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
/// consuming the stream in row-major order.
void init_uniform_fan_in(Matrix& tensor, Index fan_in, Rng& rng);

/// Builds a scalar loss on the tape from the current parameter values.
using LossBuilder = std::function<Tape::NodeId(Tape&, const ParamStore&)>;

struct FiniteDiffProbe {
  std::string name;
  Index flat_index;  // row-major within the tensor
  Scalar analytic;
  Scalar numeric;
  Scalar rel_error;
};

struct FiniteDiffReport {
  Scalar max_rel_error = 0.0;
  std::vector<FiniteDiffProbe> probes;
};

/// Central-difference check of backward() on randomly probed coordinates.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
/// `analytic_override`, when given, replaces the tape gradients in the
/// comparison (used as a corrupted-gradient negative control).
FiniteDiffReport finite_diff_check(const LossBuilder& loss, ParamStore& params,
                                   Scalar eps, int num_probes, Rng& rng,
                                   const GradMap* analytic_override = nullptr);

}  // namespace kwrec
