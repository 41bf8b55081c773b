#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ecvis/tensor.hpp"

// Reverse-mode differentiation over the small op set the loss stack needs.
// Values are double precision; the tape evaluates eagerly as ops are added.
namespace ecvis::ad {

enum class Op {
  Input,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Dot,
  MatMul,
  Sigmoid,
  Log,
  Mean,
  Sum,
  Abs,
  Power,
  AreaDownsample,
  Gather,
  ClampMin,
  Reshape,
  Custom,
};

std::string_view op_name(Op op);

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Gradient callback of a Custom node: receives the upstream gradient of the
/// node output and returns one gradient per parent (shaped like the parent).
using CustomBackward = std::function<std::vector<TensorD>(const TensorD& upstream)>;

struct Gradients {
  std::map<std::string, TensorD> by_name;

  const TensorD& operator[](const std::string& name) const { return by_name.at(name); }
};

// Forward kernels shared by the tape and by direct evaluation. Binary
// elementwise ops broadcast an operand holding a single element.
namespace ops {
TensorD add(const TensorD& a, const TensorD& b);
TensorD sub(const TensorD& a, const TensorD& b);
TensorD mul(const TensorD& a, const TensorD& b);
TensorD div(const TensorD& a, const TensorD& b);
TensorD dot(const TensorD& a, const TensorD& b);
TensorD matmul(const TensorD& a, const TensorD& b);
TensorD sigmoid(const TensorD& a);
TensorD log(const TensorD& a);
TensorD mean(const TensorD& a);
TensorD sum(const TensorD& a);
TensorD abs(const TensorD& a);
TensorD power(const TensorD& a, double exponent);
TensorD gather(const TensorD& a, const std::vector<std::size_t>& index, const Dims& out_dims);
TensorD clamp_min(const TensorD& a, double lo);
double sigmoid(double x);
}  // namespace ops

class Tape {
 public:
  Var input(std::string name, TensorD value);
  Var constant(TensorD value);
  Var constant(double value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var dot(Var a, Var b);
  Var matmul(Var a, Var b);
  Var sigmoid(Var a);
  Var log(Var a);
  Var mean(Var a);
  Var sum(Var a);
  Var abs(Var a);
  Var power(Var a, double exponent);
  Var area_downsample(Var a, std::size_t factor);
  Var gather(Var a, std::vector<std::size_t> index, Dims out_dims);
  Var clamp_min(Var a, double lo);
  Var reshape(Var a, Dims dims);
  Var custom(std::vector<Var> parents, TensorD value, CustomBackward backward);

  const TensorD& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  const std::vector<std::size_t>& parents(Var v) const { return nodes_.at(v.id).parents; }

  /// Reverse pass from a single-element output. Adjoints start from zero on
  /// every call; inputs off every path to the output get exact zeros.
  Gradients backward(Var output, double seed = 1.0) const;

  /// Adjoint of every node, indexed by node id.
  std::vector<TensorD> adjoints(Var output, double seed = 1.0) const;

 private:
  struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> parents;
    TensorD value;
    std::string name;
    double param = 0.0;
    std::vector<std::size_t> index;
    CustomBackward backward;
  };

  static Node make_node(Op op, std::vector<std::size_t> parents, TensorD value,
                        std::string name = {});
  Var push(Node node);
  const Node& at(Var v) const;

  std::vector<Node> nodes_;
};

/// Evaluates a small s-expression such as "(mean (mul x (sigmoid y)))" over
/// named inputs. Supported heads are the op names above in snake_case;
/// power/area_downsample/clamp_min take a trailing number and gather takes a
/// trailing index list. `tape_eval` records onto a Tape, `direct_eval` calls
/// the kernels directly; both must agree bit for bit.
TensorD tape_eval(std::string_view expr, const std::map<std::string, TensorD>& inputs,
                  Tape* tape = nullptr, Var* root = nullptr);
TensorD direct_eval(std::string_view expr, const std::map<std::string, TensorD>& inputs);

}  // namespace ecvis::ad
