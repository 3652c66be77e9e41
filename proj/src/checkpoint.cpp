#include "kwrec/checkpoint.hpp"

#include "kwrec/text_io.hpp"

#include <nlohmann/json.hpp>

namespace kwrec {

namespace {

using nlohmann::json;

Matrix matrix_from_row_major(const json& values, Index rows, Index cols) {
  if (static_cast<Index>(values.size()) != rows * cols) {
    throw SchemaError("checkpoint: value count does not match shape");
  }
  Matrix m(rows, cols);
  Index i = 0;
  for (const auto& x : values) {
    m(i / cols, i % cols) = x.get<Scalar>();
    ++i;
  }
  return m;
}

void append_adam(std::string& out, const std::string& which,
                 const AdamState& adam) {
  const AdamConfig& cfg = adam.config();
  out += "{\"adam\":\"" + which + "\"";
  out += ",\"lr\":" + format_real(cfg.lr);
  out += ",\"beta1\":" + format_real(cfg.beta1);
  out += ",\"beta2\":" + format_real(cfg.beta2);
  out += ",\"eps\":" + format_real(cfg.eps);
  out += ",\"t\":" + std::to_string(adam.steps());
  out += ",\"num_moments\":" + std::to_string(adam.first_moments().size());
  out += "}\n";
  for (const auto& [name, m] : adam.first_moments()) {
    out += "{\"moment\":\"" + name + "\"";
    out += ",\"m\":[" + format_matrix_row_major(m) + "]";
    out += ",\"v\":[" + format_matrix_row_major(adam.second_moments().at(name)) +
           "]}\n";
  }
}

}  // namespace

ActorParams actor_view(const Checkpoint& checkpoint) {
  return {&checkpoint.params, "actor.",
          ActorConfig{checkpoint.feature_dim, checkpoint.model_dim}};
}

CriticParams critic_view(const Checkpoint& checkpoint) {
  return {&checkpoint.params, "critic.",
          CriticConfig{checkpoint.feature_dim, checkpoint.model_dim, 32}};
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::string out;
  json header;
  header["version"] = 1;
  header["kind"] = "checkpoint";
  header["feature_dim"] = checkpoint.feature_dim;
  header["model_dim"] = checkpoint.model_dim;
  header["cluster_size"] = checkpoint.cluster_size;
  header["output_size"] = checkpoint.output_size;
  header["seed"] = checkpoint.seed;
  header["iteration"] = checkpoint.iteration;
  header["num_params"] = checkpoint.params.entries().size();
  out += header.dump();
  out += '\n';
  for (const auto& [name, tensor] : checkpoint.params.entries()) {
    out += "{\"param\":\"" + name + "\"";
    out += ",\"rows\":" + std::to_string(tensor.rows());
    out += ",\"cols\":" + std::to_string(tensor.cols());
    out += ",\"values\":[" + format_matrix_row_major(tensor) + "]}\n";
  }
  append_adam(out, "actor", checkpoint.adam_actor);
  append_adam(out, "critic", checkpoint.adam_critic);
  write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::vector<std::string> lines = read_all_lines(path);
  if (lines.empty()) throw ParseError("empty checkpoint file", 1);
  const auto parse_line = [&](std::size_t i) -> json {
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      throw ParseError("malformed record", static_cast<long>(i + 1));
    }
    return j;
  };

  const json header = parse_line(0);
  if (header.value("kind", "") != std::string("checkpoint") ||
      !header.contains("version") || header["version"] != 1) {
    throw SchemaError("checkpoint: unsupported header");
  }
  Checkpoint cp;
  cp.feature_dim = header.at("feature_dim").get<Index>();
  cp.model_dim = header.at("model_dim").get<Index>();
  cp.cluster_size = header.at("cluster_size").get<int>();
  cp.output_size = header.at("output_size").get<int>();
  cp.seed = header.at("seed").get<std::uint64_t>();
  cp.iteration = header.at("iteration").get<int>();
  const std::size_t num_params = header.at("num_params").get<std::size_t>();

  std::size_t line = 1;
  for (std::size_t i = 0; i < num_params; ++i, ++line) {
    if (line >= lines.size()) {
      throw ParseError("file truncated", static_cast<long>(lines.size()));
    }
    const json j = parse_line(line);
    const std::string name = j.at("param").get<std::string>();
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    cp.params.create(name, rows, cols) =
        matrix_from_row_major(j.at("values"), rows, cols);
  }

  for (const std::string which : {"actor", "critic"}) {
    if (line >= lines.size()) {
      throw ParseError("file truncated", static_cast<long>(lines.size()));
    }
    const json j = parse_line(line++);
    if (j.value("adam", "") != which) {
      throw SchemaError("checkpoint: expected adam record for " + which);
    }
    AdamConfig cfg;
    cfg.lr = j.at("lr").get<Scalar>();
    cfg.beta1 = j.at("beta1").get<Scalar>();
    cfg.beta2 = j.at("beta2").get<Scalar>();
    cfg.eps = j.at("eps").get<Scalar>();
    const auto t = j.at("t").get<std::int64_t>();
    const std::size_t num_moments = j.at("num_moments").get<std::size_t>();
    std::map<std::string, Matrix> m, v;
    for (std::size_t i = 0; i < num_moments; ++i, ++line) {
      if (line >= lines.size()) {
        throw ParseError("file truncated", static_cast<long>(lines.size()));
      }
      const json rec = parse_line(line);
      const std::string name = rec.at("moment").get<std::string>();
      const Matrix& shape = cp.params.at(name);
      m.emplace(name,
                matrix_from_row_major(rec.at("m"), shape.rows(), shape.cols()));
      v.emplace(name,
                matrix_from_row_major(rec.at("v"), shape.rows(), shape.cols()));
    }
    AdamState adam(cfg);
    adam.restore(t, std::move(m), std::move(v));
    if (which == std::string("actor")) {
      cp.adam_actor = std::move(adam);
    } else {
      cp.adam_critic = std::move(adam);
    }
  }
  return cp;
}

}  // namespace kwrec
