#pragma once

#include <Eigen/Core>

#include <sstream>
#include <stdexcept>
#include <string>

namespace kwrec {

// All numerics are 64-bit; the networks are tiny and exact oracles matter
// more than speed.
using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <class T>
using CRef = const Eigen::Ref<const T>&;

// Error taxonomy. The CLI maps these onto process exit codes.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : ArgumentError {
  using ArgumentError::ArgumentError;
};

struct InvalidMaskError : ArgumentError {
  using ArgumentError::ArgumentError;
};

struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& message, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_number(line) {}
  long line_number;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline void check_shape(bool ok, const std::string& what, const Matrix& a,
                        const Matrix& b) {
  if (!ok) {
    throw ShapeError(what + ": incompatible shapes " + shape_of(a) + " and " +
                     shape_of(b));
  }
}

}  // namespace kwrec
