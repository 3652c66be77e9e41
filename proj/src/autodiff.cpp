#include "kwrec/autodiff.hpp"

#include <cmath>
#include <limits>

namespace kwrec {

Matrix& ParamStore::create(const std::string& name, Index rows, Index cols) {
  if (entries_.count(name) > 0) {
    throw ArgumentError("parameter already exists: " + name);
  }
  return entries_.emplace(name, Matrix::Zero(rows, cols)).first->second;
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw LookupError("unknown parameter: " + name);
  return it->second;
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw LookupError("unknown parameter: " + name);
  return it->second;
}

Tape::NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw ArgumentError("node id not on this tape");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }

Tape::NodeId Tape::param(const ParamStore& store, const std::string& name) {
  auto it = bound_params_.find(name);
  if (it != bound_params_.end()) return it->second;
  Node n;
  n.op = Op::Param;
  n.value = store.at(name);
  n.param_name = name;
  const NodeId id = push(std::move(n));
  bound_params_.emplace(name, id);
  return id;
}

Tape::NodeId Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  check_shape(va.rows() == vb.rows() && va.cols() == vb.cols(), "add", va, vb);
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = va + vb;
  return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  check_shape(va.rows() == vb.rows() && va.cols() == vb.cols(), "sub", va, vb);
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = va - vb;
  return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  check_shape(va.rows() == vb.rows() && va.cols() == vb.cols(), "mul", va, vb);
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = va.cwiseProduct(vb);
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, Scalar factor) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.factor = factor;
  n.value = value(a) * factor;
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  check_shape(va.cols() == vb.rows(), "matmul", va, vb);
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  if (va.rows() > 1 && vb.cols() > 1) {
    // Row-by-row so each output row depends only on its own input row;
    // blocked GEMM would make encoder outputs sensitive to row order.
    n.value.resize(va.rows(), vb.cols());
    for (Index r = 0; r < va.rows(); ++r) {
      n.value.row(r).noalias() = va.row(r) * vb;
    }
  } else {
    n.value = va * vb;
  }
  return push(std::move(n));
}

Tape::NodeId Tape::transpose(NodeId a) {
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.value = value(a).transpose();
  return push(std::move(n));
}

Tape::NodeId Tape::add_rowwise(NodeId m, NodeId v) {
  const Matrix& vm = value(m);
  const Matrix& vv = value(v);
  check_shape(vv.cols() == 1 && vm.cols() == vv.rows(), "add_rowwise", vm, vv);
  Node n;
  n.op = Op::AddRowwise;
  n.a = m;
  n.b = v;
  n.value = vm.rowwise() + vv.col(0).transpose();
  return push(std::move(n));
}

Tape::NodeId Tape::tanh(NodeId a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a;
  n.value = value(a).array().tanh();
  return push(std::move(n));
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  n.value = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  return push(std::move(n));
}

Tape::NodeId Tape::log(NodeId a) {
  Node n;
  n.op = Op::Log;
  n.a = a;
  n.value = value(a).array().log();
  return push(std::move(n));
}

Tape::NodeId Tape::square(NodeId a) {
  Node n;
  n.op = Op::Square;
  n.a = a;
  n.value = value(a).array().square();
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.value = Matrix::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Tape::NodeId Tape::mean(NodeId a) {
  if (value(a).size() == 0) throw ArgumentError("mean of empty tensor");
  Node n;
  n.op = Op::Mean;
  n.a = a;
  n.value = Matrix::Constant(1, 1, value(a).mean());
  return push(std::move(n));
}

Tape::NodeId Tape::pick(NodeId v, Index i) {
  const Matrix& vv = value(v);
  if (vv.cols() != 1) throw ShapeError("pick expects a column vector, got " + shape_of(vv));
  if (i < 0 || i >= vv.rows()) throw ArgumentError("pick index out of range");
  Node n;
  n.op = Op::Pick;
  n.a = v;
  n.index = i;
  n.value = Matrix::Constant(1, 1, vv(i, 0));
  return push(std::move(n));
}

Tape::NodeId Tape::row(NodeId m, Index r) {
  const Matrix& vm = value(m);
  if (r < 0 || r >= vm.rows()) throw ArgumentError("row index out of range");
  Node n;
  n.op = Op::Row;
  n.a = m;
  n.index = r;
  n.value = vm.row(r).transpose();
  return push(std::move(n));
}

Tape::NodeId Tape::affine(NodeId w, NodeId x, NodeId b) {
  const Matrix& vw = value(w);
  const Matrix& vx = value(x);
  const Matrix& vb = value(b);
  check_shape(vw.cols() == vx.rows(), "affine(W,x)", vw, vx);
  check_shape(vb.rows() == vw.rows() && vb.cols() == vx.cols(), "affine(Wx,b)",
              vw, vb);
  Node n;
  n.op = Op::Affine;
  n.a = w;
  n.b = x;
  n.c = b;
  n.value = vw * vx + vb;
  return push(std::move(n));
}

Tape::NodeId Tape::masked_softmax(NodeId logits, std::vector<bool> mask) {
  const Matrix& z = value(logits);
  if (z.cols() != 1) {
    throw ShapeError("masked_softmax expects a column vector, got " + shape_of(z));
  }
  const Index k = z.rows();
  if (!mask.empty() && static_cast<Index>(mask.size()) != k) {
    throw ArgumentError("mask length does not match logits length");
  }
  const auto masked = [&](Index j) {
    return !mask.empty() && mask[static_cast<std::size_t>(j)];
  };
  Scalar z_max = -std::numeric_limits<Scalar>::infinity();
  for (Index j = 0; j < k; ++j) {
    if (!masked(j) && z(j, 0) > z_max) z_max = z(j, 0);
  }
  if (!std::isfinite(z_max)) {
    throw InvalidMaskError("masked_softmax: all entries masked");
  }
  Matrix p = Matrix::Zero(k, 1);
  Scalar total = 0.0;
  for (Index j = 0; j < k; ++j) {
    if (masked(j)) continue;
    p(j, 0) = std::exp(z(j, 0) - z_max);
    total += p(j, 0);
  }
  for (Index j = 0; j < k; ++j) {
    if (!masked(j)) p(j, 0) /= total;
  }
  Node n;
  n.op = Op::MaskedSoftmax;
  n.a = logits;
  n.mask = std::move(mask);
  n.value = std::move(p);
  return push(std::move(n));
}

GradMap Tape::backward(NodeId output, const ParamStore& store) const {
  const Node& out = node(output);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw ArgumentError("backward requires a scalar (1x1) output, got " +
                        shape_of(out.value));
  }
  std::vector<Matrix> adj(static_cast<std::size_t>(output) + 1);
  const auto grad_of = [&](NodeId id) -> Matrix& {
    Matrix& g = adj[static_cast<std::size_t>(id)];
    if (g.size() == 0) {
      const Matrix& v = nodes_[static_cast<std::size_t>(id)].value;
      g = Matrix::Zero(v.rows(), v.cols());
    }
    return g;
  };
  grad_of(output)(0, 0) = 1.0;

  for (NodeId id = output; id >= 0; --id) {
    Matrix& g = adj[static_cast<std::size_t>(id)];
    if (g.size() == 0) continue;  // node did not contribute to the output
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.op) {
      case Op::Param:
      case Op::Constant:
        break;
      case Op::Add:
        grad_of(n.a) += g;
        grad_of(n.b) += g;
        break;
      case Op::Sub:
        grad_of(n.a) += g;
        grad_of(n.b) -= g;
        break;
      case Op::Mul:
        grad_of(n.a) += g.cwiseProduct(node(n.b).value);
        grad_of(n.b) += g.cwiseProduct(node(n.a).value);
        break;
      case Op::Scale:
        grad_of(n.a) += g * n.factor;
        break;
      case Op::MatMul:
        grad_of(n.a) += g * node(n.b).value.transpose();
        grad_of(n.b) += node(n.a).value.transpose() * g;
        break;
      case Op::Transpose:
        grad_of(n.a) += g.transpose();
        break;
      case Op::AddRowwise:
        grad_of(n.a) += g;
        grad_of(n.b) += g.colwise().sum().transpose();
        break;
      case Op::Tanh:
        grad_of(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Sigmoid:
        grad_of(n.a).array() +=
            g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::Log:
        grad_of(n.a).array() += g.array() / node(n.a).value.array();
        break;
      case Op::Square:
        grad_of(n.a).array() += 2.0 * g.array() * node(n.a).value.array();
        break;
      case Op::Sum:
        grad_of(n.a).array() += g(0, 0);
        break;
      case Op::Mean:
        grad_of(n.a).array() +=
            g(0, 0) / static_cast<Scalar>(node(n.a).value.size());
        break;
      case Op::Pick:
        grad_of(n.a)(n.index, 0) += g(0, 0);
        break;
      case Op::Row:
        grad_of(n.a).row(n.index) += g.transpose();
        break;
      case Op::Affine:
        grad_of(n.a) += g * node(n.b).value.transpose();
        grad_of(n.b) += node(n.a).value.transpose() * g;
        grad_of(n.c) += g;
        break;
      case Op::MaskedSoftmax: {
        const Matrix& p = n.value;
        const auto masked = [&](Index j) {
          return !n.mask.empty() && n.mask[static_cast<std::size_t>(j)];
        };
        Scalar dot = 0.0;
        for (Index j = 0; j < p.rows(); ++j) {
          if (!masked(j)) dot += g(j, 0) * p(j, 0);
        }
        Matrix& ga = grad_of(n.a);
        for (Index j = 0; j < p.rows(); ++j) {
          if (!masked(j)) ga(j, 0) += p(j, 0) * (g(j, 0) - dot);
        }
        break;
      }
    }
  }

  GradMap grads;
  for (const auto& [name, tensor] : store.entries()) {
    auto it = bound_params_.find(name);
    if (it != bound_params_.end() && it->second <= output &&
        adj[static_cast<std::size_t>(it->second)].size() != 0) {
      grads.emplace(name, adj[static_cast<std::size_t>(it->second)]);
    } else {
      grads.emplace(name, Matrix::Zero(tensor.rows(), tensor.cols()));
    }
  }
  return grads;
}

LstmState lstm_cell(Tape& tape, const LstmWeights& w, Tape::NodeId x,
                    const LstmState& prev) {
  const auto gate_pre = [&](const LstmGate& gate) {
    return tape.add(tape.affine(gate.w_x, x, gate.b),
                    tape.matmul(gate.w_h, prev.h));
  };
  const Tape::NodeId i = tape.sigmoid(gate_pre(w.input));
  const Tape::NodeId f = tape.sigmoid(gate_pre(w.forget));
  const Tape::NodeId g = tape.tanh(gate_pre(w.cell));
  const Tape::NodeId o = tape.sigmoid(gate_pre(w.output));
  const Tape::NodeId c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  const Tape::NodeId h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

void AdamState::step(ParamStore& params, const GradMap& grads) {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(config_.beta1, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(config_.beta2, static_cast<Scalar>(t_));
  for (const auto& [name, g] : grads) {
    Matrix& theta = params.at(name);
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw ShapeError("adam_step: gradient shape " + shape_of(g) +
                       " does not match parameter " + name + " of shape " +
                       shape_of(theta));
    }
    Matrix& m = m_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()))
                    .first->second;
    Matrix& v = v_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()))
                    .first->second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    theta.array() -= config_.lr * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + config_.eps);
  }
}

void AdamState::restore(std::int64_t t, std::map<std::string, Matrix> m,
                        std::map<std::string, Matrix> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

void init_uniform_fan_in(Matrix& tensor, Index fan_in, Rng& rng) {
  if (fan_in <= 0) throw ArgumentError("init: fan_in must be positive");
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
  for (Index r = 0; r < tensor.rows(); ++r) {
    for (Index c = 0; c < tensor.cols(); ++c) {
      tensor(r, c) = rng.uniform(-bound, bound);
    }
  }
}

FiniteDiffReport finite_diff_check(const LossBuilder& loss, ParamStore& params,
                                   Scalar eps, int num_probes, Rng& rng,
                                   const GradMap* analytic_override) {
  if (eps <= 0) throw ArgumentError("finite_diff_check: eps must be positive");

  Tape tape;
  const Tape::NodeId out = loss(tape, params);
  const GradMap tape_grads = tape.backward(out, params);
  const GradMap& grads = analytic_override ? *analytic_override : tape_grads;

  // Flat coordinate space over all parameters, row-major within a tensor.
  std::vector<std::pair<std::string, Index>> coords;
  for (const auto& [name, tensor] : params.entries()) {
    for (Index i = 0; i < tensor.size(); ++i) coords.emplace_back(name, i);
  }
  const int total = static_cast<int>(coords.size());
  std::vector<int> probe_ids =
      rng.sample_without_replacement(total, std::min(num_probes, total));

  FiniteDiffReport report;
  for (int probe : probe_ids) {
    const auto& [name, flat] = coords[static_cast<std::size_t>(probe)];
    Matrix& tensor = params.at(name);
    const Index r = flat / tensor.cols();
    const Index c = flat % tensor.cols();
    const Scalar original = tensor(r, c);

    tensor(r, c) = original + eps;
    Tape plus;
    const Scalar f_plus = plus.value(loss(plus, params))(0, 0);
    tensor(r, c) = original - eps;
    Tape minus;
    const Scalar f_minus = minus.value(loss(minus, params))(0, 0);
    tensor(r, c) = original;

    const Scalar numeric = (f_plus - f_minus) / (2.0 * eps);
    const Scalar analytic = grads.at(name)(r, c);
    const Scalar denom =
        std::max({std::abs(analytic), std::abs(numeric), Scalar(1e-8)});
    const Scalar rel = std::abs(analytic - numeric) / denom;
    report.probes.push_back({name, flat, analytic, numeric, rel});
    if (rel > report.max_rel_error) report.max_rel_error = rel;
  }
  return report;
}

}  // namespace kwrec
