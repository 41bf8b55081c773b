#include "ecvis/autodiff.hpp"

#include <cctype>
#include <cmath>
#include <memory>

#include "ecvis/simd.hpp"

namespace ecvis::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Dot: return "dot";
    case Op::MatMul: return "matmul";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::Mean: return "mean";
    case Op::Sum: return "sum";
    case Op::Abs: return "abs";
    case Op::Power: return "power";
    case Op::AreaDownsample: return "area_downsample";
    case Op::Gather: return "gather";
    case Op::ClampMin: return "clamp_min";
    case Op::Reshape: return "reshape";
    case Op::Custom: return "custom";
  }
  return "unknown";
}

namespace ops {
namespace {

const Dims& broadcast_dims(const TensorD& a, const TensorD& b, std::string_view what) {
  if (a.dims() == b.dims()) return a.dims();
  if (b.size() == 1) return a.dims();
  if (a.size() == 1) return b.dims();
  throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + dims_to_string(a.dims()) +
                                            " vs " + dims_to_string(b.dims()));
}

template <class F>
TensorD binary(const TensorD& a, const TensorD& b, std::string_view what, F f) {
  TensorD out(broadcast_dims(a, b, what));
  const bool sa = a.size() == 1 && out.size() != 1;
  const bool sb = b.size() == 1 && out.size() != 1;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[sa ? 0 : i], b[sb ? 0 : i]);
  return out;
}

template <class F>
TensorD unary(const TensorD& a, F f) {
  TensorD out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

TensorD add(const TensorD& a, const TensorD& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; });
}
TensorD sub(const TensorD& a, const TensorD& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; });
}
TensorD mul(const TensorD& a, const TensorD& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; });
}
TensorD div(const TensorD& a, const TensorD& b) {
  return binary(a, b, "div", [](double x, double y) { return x / y; });
}

TensorD dot(const TensorD& a, const TensorD& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "dot: " + dims_to_string(a.dims()) + " vs " +
                                              dims_to_string(b.dims()));
  }
  TensorD out;
  out[0] = simd::kernels().dot(a.data(), b.data(), a.size());
  return out;
}

TensorD matmul(const TensorD& a, const TensorD& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + dims_to_string(a.dims()) + " x " +
                                              dims_to_string(b.dims()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  TensorD out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return out;
}

TensorD sigmoid(const TensorD& a) { return unary(a, [](double x) { return sigmoid(x); }); }
TensorD log(const TensorD& a) { return unary(a, [](double x) { return std::log(x); }); }
TensorD abs(const TensorD& a) { return unary(a, [](double x) { return std::fabs(x); }); }
TensorD power(const TensorD& a, double p) {
  if (p == 2.0) return unary(a, [](double x) { return x * x; });
  return unary(a, [p](double x) { return std::pow(x, p); });
}
TensorD clamp_min(const TensorD& a, double lo) {
  return unary(a, [lo](double x) { return x > lo ? x : lo; });
}

TensorD sum(const TensorD& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  TensorD out;
  out[0] = acc;
  return out;
}

TensorD mean(const TensorD& a) {
  TensorD out = sum(a);
  out[0] /= static_cast<double>(a.size());
  return out;
}

TensorD gather(const TensorD& a, const std::vector<std::size_t>& index, const Dims& out_dims) {
  if (dims_product(out_dims) != index.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gather: index count does not match output dims");
  }
  TensorD out(out_dims);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= a.size()) throw Error(ErrorCode::ShapeMismatch, "gather: index out of range");
    out[k] = a[index[k]];
  }
  return out;
}

}  // namespace ops

Tape::Node Tape::make_node(Op op, std::vector<std::size_t> parents, TensorD value,
                            std::string name) {
  Node n;
  n.op = op;
  n.parents = std::move(parents);
  n.value = std::move(value);
  n.name = std::move(name);
  return n;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::at(Var v) const {
  if (v.id >= nodes_.size()) throw Error(ErrorCode::ShapeMismatch, "unknown tape node");
  return nodes_[v.id];
}

Var Tape::input(std::string name, TensorD value) {
  return push(make_node(Op::Input, {}, std::move(value), std::move(name)));
}
Var Tape::constant(TensorD value) { return push(make_node(Op::Constant, {}, std::move(value))); }
Var Tape::constant(double value) {
  TensorD t;
  t[0] = value;
  return constant(std::move(t));
}

Var Tape::add(Var a, Var b) { return push(make_node(Op::Add, {a.id, b.id}, ops::add(at(a).value, at(b).value))); }
Var Tape::sub(Var a, Var b) { return push(make_node(Op::Sub, {a.id, b.id}, ops::sub(at(a).value, at(b).value))); }
Var Tape::mul(Var a, Var b) { return push(make_node(Op::Mul, {a.id, b.id}, ops::mul(at(a).value, at(b).value))); }
Var Tape::div(Var a, Var b) { return push(make_node(Op::Div, {a.id, b.id}, ops::div(at(a).value, at(b).value))); }
Var Tape::dot(Var a, Var b) { return push(make_node(Op::Dot, {a.id, b.id}, ops::dot(at(a).value, at(b).value))); }
Var Tape::matmul(Var a, Var b) {
  return push(make_node(Op::MatMul, {a.id, b.id}, ops::matmul(at(a).value, at(b).value)));
}
Var Tape::sigmoid(Var a) { return push(make_node(Op::Sigmoid, {a.id}, ops::sigmoid(at(a).value))); }
Var Tape::log(Var a) { return push(make_node(Op::Log, {a.id}, ops::log(at(a).value))); }
Var Tape::mean(Var a) { return push(make_node(Op::Mean, {a.id}, ops::mean(at(a).value))); }
Var Tape::sum(Var a) { return push(make_node(Op::Sum, {a.id}, ops::sum(at(a).value))); }
Var Tape::abs(Var a) { return push(make_node(Op::Abs, {a.id}, ops::abs(at(a).value))); }
Var Tape::power(Var a, double exponent) {
  Node n = make_node(Op::Power, {a.id}, ops::power(at(a).value, exponent));
  n.param = exponent;
  return push(std::move(n));
}
Var Tape::area_downsample(Var a, std::size_t factor) {
  Node n = make_node(Op::AreaDownsample, {a.id}, ecvis::area_downsample(at(a).value, factor));
  n.param = static_cast<double>(factor);
  return push(std::move(n));
}
Var Tape::gather(Var a, std::vector<std::size_t> index, Dims out_dims) {
  Node n = make_node(Op::Gather, {a.id}, ops::gather(at(a).value, index, out_dims));
  n.index = std::move(index);
  return push(std::move(n));
}
Var Tape::clamp_min(Var a, double lo) {
  Node n = make_node(Op::ClampMin, {a.id}, ops::clamp_min(at(a).value, lo));
  n.param = lo;
  return push(std::move(n));
}
Var Tape::reshape(Var a, Dims dims) {
  return push(make_node(Op::Reshape, {a.id}, at(a).value.reshaped(std::move(dims))));
}
Var Tape::custom(std::vector<Var> parents, TensorD value, CustomBackward backward) {
  Node n = make_node(Op::Custom, {}, std::move(value));
  for (Var p : parents) {
    at(p);
    n.parents.push_back(p.id);
  }
  n.backward = std::move(backward);
  return push(std::move(n));
}

double Tape::scalar(Var v) const {
  const TensorD& t = at(v).value;
  if (t.size() != 1) throw Error(ErrorCode::NonScalarOutput, "node is not a scalar");
  return t[0];
}

namespace {

// Accumulate `g` (shaped like the broadcast output) into the adjoint of an
// operand that may have been broadcast from a single element.
void accumulate(TensorD& adj, const TensorD& g) {
  if (adj.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
  } else {
    double s = 0.0;
    for (double v : g.values()) s += v;
    adj[0] += s;
  }
}

template <class F>
TensorD map2(const TensorD& g, const TensorD& a, const TensorD& b, F f) {
  TensorD out(g.dims());
  const bool sa = a.size() == 1 && g.size() != 1;
  const bool sb = b.size() == 1 && g.size() != 1;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g[i], a[sa ? 0 : i], b[sb ? 0 : i]);
  return out;
}

}  // namespace

std::vector<TensorD> Tape::adjoints(Var output, double seed) const {
  const Node& out = at(output);
  if (out.value.size() != 1) {
    throw Error(ErrorCode::NonScalarOutput,
                "backward needs a scalar output, got " + dims_to_string(out.value.dims()));
  }
  std::vector<TensorD> adj;
  adj.reserve(nodes_.size());
  for (const Node& n : nodes_) adj.emplace_back(n.value.dims(), 0.0);
  std::vector<char> live(nodes_.size(), 0);
  live[output.id] = 1;
  adj[output.id][0] = seed;

  for (std::size_t id = output.id + 1; id-- > 0;) {
    if (!live[id]) continue;
    const Node& n = nodes_[id];
    const TensorD& g = adj[id];
    for (std::size_t p : n.parents) live[p] = 1;
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::Add:
        accumulate(adj[n.parents[0]], g);
        accumulate(adj[n.parents[1]], g);
        break;
      case Op::Sub: {
        accumulate(adj[n.parents[0]], g);
        TensorD neg(g.dims());
        for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
        accumulate(adj[n.parents[1]], neg);
        break;
      }
      case Op::Mul: {
        const TensorD& a = nodes_[n.parents[0]].value;
        const TensorD& b = nodes_[n.parents[1]].value;
        accumulate(adj[n.parents[0]], map2(g, a, b, [](double gi, double, double bi) { return gi * bi; }));
        accumulate(adj[n.parents[1]], map2(g, a, b, [](double gi, double ai, double) { return gi * ai; }));
        break;
      }
      case Op::Div: {
        const TensorD& a = nodes_[n.parents[0]].value;
        const TensorD& b = nodes_[n.parents[1]].value;
        accumulate(adj[n.parents[0]], map2(g, a, b, [](double gi, double, double bi) { return gi / bi; }));
        accumulate(adj[n.parents[1]], map2(g, a, b, [](double gi, double ai, double bi) {
                     return -gi * ai / (bi * bi);
                   }));
        break;
      }
      case Op::Dot: {
        const TensorD& a = nodes_[n.parents[0]].value;
        const TensorD& b = nodes_[n.parents[1]].value;
        TensorD& ga = adj[n.parents[0]];
        TensorD& gb = adj[n.parents[1]];
        for (std::size_t i = 0; i < a.size(); ++i) {
          ga[i] += g[0] * b[i];
          gb[i] += g[0] * a[i];
        }
        break;
      }
      case Op::MatMul: {
        const TensorD& a = nodes_[n.parents[0]].value;
        const TensorD& b = nodes_[n.parents[1]].value;
        const std::size_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
        TensorD& ga = adj[n.parents[0]];
        TensorD& gb = adj[n.parents[1]];
        const auto& kern = simd::kernels();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * cols;
          for (std::size_t p = 0; p < k; ++p) {
            ga[i * k + p] += kern.dot(grow, b.data() + p * cols, cols);
            const double aip = a[i * k + p];
            double* gbrow = gb.data() + p * cols;
            for (std::size_t j = 0; j < cols; ++j) gbrow[j] += aip * grow[j];
          }
        }
        break;
      }
      case Op::Sigmoid: {
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.value[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      }
      case Op::Log: {
        const TensorD& a = nodes_[n.parents[0]].value;
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
        break;
      }
      case Op::Mean:
      case Op::Sum: {
        TensorD& ga = adj[n.parents[0]];
        const double scale = n.op == Op::Mean ? g[0] / static_cast<double>(ga.size()) : g[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += scale;
        break;
      }
      case Op::Abs: {
        const TensorD& a = nodes_[n.parents[0]].value;
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += a[i] > 0.0 ? g[i] : (a[i] < 0.0 ? -g[i] : 0.0);
        }
        break;
      }
      case Op::Power: {
        const TensorD& a = nodes_[n.parents[0]].value;
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double d = n.param == 2.0 ? 2.0 * a[i] : n.param * std::pow(a[i], n.param - 1.0);
          ga[i] += g[i] * d;
        }
        break;
      }
      case Op::AreaDownsample: {
        TensorD& ga = adj[n.parents[0]];
        const std::size_t f = static_cast<std::size_t>(n.param);
        const Dims& in = ga.dims();
        const std::size_t h = in[in.size() - 2], w = in[in.size() - 1];
        const std::size_t oh = h / f, ow = w / f;
        const std::size_t planes = ga.size() / (h * w);
        const double inv = 1.0 / static_cast<double>(f * f);
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              ga[p * h * w + y * w + x] += g[p * oh * ow + (y / f) * ow + x / f] * inv;
            }
          }
        }
        break;
      }
      case Op::Gather: {
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t k = 0; k < n.index.size(); ++k) ga[n.index[k]] += g[k];
        break;
      }
      case Op::ClampMin: {
        const TensorD& a = nodes_[n.parents[0]].value;
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > n.param) ga[i] += g[i];
        }
        break;
      }
      case Op::Reshape: {
        TensorD& ga = adj[n.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::Custom: {
        const std::vector<TensorD> grads = n.backward(g);
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          TensorD& ga = adj[n.parents[k]];
          if (grads.at(k).size() != ga.size()) {
            throw Error(ErrorCode::ShapeMismatch, "custom backward returned a mis-shaped gradient");
          }
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += grads[k][i];
        }
        break;
      }
    }
  }
  return adj;
}

Gradients Tape::backward(Var output, double seed) const {
  std::vector<TensorD> adj = adjoints(output, seed);
  Gradients grads;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op == Op::Input) grads.by_name[nodes_[id].name] = std::move(adj[id]);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// s-expression front end

namespace {

struct Expr {
  std::string head;  // empty for leaves
  std::string leaf;
  std::vector<std::unique_ptr<Expr>> args;
  std::vector<double> numbers;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  std::unique_ptr<Expr> parse() {
    auto e = expr();
    skip();
    if (pos_ != s_.size()) fail("trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::UnsupportedOp, what + " at column " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  std::string token() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) &&
           s_[pos_] != '(' && s_[pos_] != ')') {
      ++pos_;
    }
    if (start == pos_) fail("expected token");
    return std::string(s_.substr(start, pos_ - start));
  }
  static bool is_number(const std::string& t) {
    return !t.empty() && (std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '-' ||
                          t[0] == '+' || t[0] == '.');
  }
  std::unique_ptr<Expr> expr() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    auto e = std::make_unique<Expr>();
    if (s_[pos_] != '(') {
      e->leaf = token();
      return e;
    }
    ++pos_;
    e->head = token();
    for (;;) {
      skip();
      if (pos_ >= s_.size()) fail("missing ')'");
      if (s_[pos_] == ')') {
        ++pos_;
        break;
      }
      if (s_[pos_] == '(') {
        if (!e->numbers.empty()) fail("numeric parameters must come last");
        e->args.push_back(expr());
        continue;
      }
      std::string t = token();
      if (is_number(t)) {
        e->numbers.push_back(std::stod(t));
      } else {
        if (!e->numbers.empty()) fail("numeric parameters must come last");
        auto leaf = std::make_unique<Expr>();
        leaf->leaf = std::move(t);
        e->args.push_back(std::move(leaf));
      }
    }
    return e;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::vector<std::size_t> to_indices(const std::vector<double>& nums) {
  std::vector<std::size_t> out;
  for (double v : nums) {
    if (v < 0 || std::floor(v) != v) throw Error(ErrorCode::ShapeMismatch, "bad index");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void expect_arity(const Expr& e, std::size_t args, std::size_t numbers) {
  if (e.args.size() != args || e.numbers.size() != numbers) {
    throw Error(ErrorCode::UnsupportedOp, "wrong arity for '" + e.head + "'");
  }
}

// Backend interface so the same walker drives taped and direct evaluation.
template <class Backend>
typename Backend::Value walk(const Expr& e, Backend& be) {
  using V = typename Backend::Value;
  if (e.head.empty()) {
    if (!e.leaf.empty() && (std::isdigit(static_cast<unsigned char>(e.leaf[0])) ||
                            e.leaf[0] == '-' || e.leaf[0] == '.')) {
      return be.number(std::stod(e.leaf));
    }
    return be.lookup(e.leaf);
  }
  const std::string& h = e.head;
  auto a0 = [&] { return walk(*e.args.at(0), be); };
  auto a1 = [&] { return walk(*e.args.at(1), be); };
  static const std::map<std::string, Op> binaries = {
      {"add", Op::Add}, {"sub", Op::Sub}, {"mul", Op::Mul},
      {"div", Op::Div}, {"dot", Op::Dot}, {"matmul", Op::MatMul}};
  static const std::map<std::string, Op> unaries = {{"sigmoid", Op::Sigmoid}, {"log", Op::Log},
                                                    {"mean", Op::Mean},       {"sum", Op::Sum},
                                                    {"abs", Op::Abs}};
  if (auto it = binaries.find(h); it != binaries.end()) {
    expect_arity(e, 2, 0);
    V x = a0();
    V y = a1();
    return be.binary(it->second, x, y);
  }
  if (auto it = unaries.find(h); it != unaries.end()) {
    expect_arity(e, 1, 0);
    return be.unary(it->second, a0());
  }
  if (h == "power" || h == "area_downsample" || h == "clamp_min") {
    expect_arity(e, 1, 1);
    const Op op = h == "power" ? Op::Power : (h == "clamp_min" ? Op::ClampMin : Op::AreaDownsample);
    return be.param(op, a0(), e.numbers[0]);
  }
  if (h == "gather") {
    if (e.args.size() != 1 || e.numbers.empty()) expect_arity(e, 1, 1);
    auto idx = to_indices(e.numbers);
    return be.gather(a0(), idx);
  }
  if (h == "reshape") {
    if (e.args.size() != 1) expect_arity(e, 1, 1);
    auto dims = to_indices(e.numbers);
    return be.reshape(a0(), Dims(dims.begin(), dims.end()));
  }
  throw Error(ErrorCode::UnsupportedOp, "unsupported op '" + h + "'");
}

struct TapeBackend {
  using Value = Var;
  Tape& tape;
  const std::map<std::string, TensorD>& inputs;
  std::map<std::string, Var> bound;

  Var lookup(const std::string& name) {
    if (auto it = bound.find(name); it != bound.end()) return it->second;
    auto it = inputs.find(name);
    if (it == inputs.end()) throw Error(ErrorCode::UnsupportedOp, "unknown input '" + name + "'");
    Var v = tape.input(name, it->second);
    bound.emplace(name, v);
    return v;
  }
  Var number(double v) { return tape.constant(v); }
  Var binary(Op op, Var a, Var b) {
    switch (op) {
      case Op::Add: return tape.add(a, b);
      case Op::Sub: return tape.sub(a, b);
      case Op::Mul: return tape.mul(a, b);
      case Op::Div: return tape.div(a, b);
      case Op::Dot: return tape.dot(a, b);
      default: return tape.matmul(a, b);
    }
  }
  Var unary(Op op, Var a) {
    switch (op) {
      case Op::Sigmoid: return tape.sigmoid(a);
      case Op::Log: return tape.log(a);
      case Op::Mean: return tape.mean(a);
      case Op::Sum: return tape.sum(a);
      default: return tape.abs(a);
    }
  }
  Var param(Op op, Var a, double p) {
    if (op == Op::Power) return tape.power(a, p);
    if (op == Op::ClampMin) return tape.clamp_min(a, p);
    return tape.area_downsample(a, static_cast<std::size_t>(p));
  }
  Var gather(Var a, const std::vector<std::size_t>& idx) {
    return tape.gather(a, idx, Dims{idx.size()});
  }
  Var reshape(Var a, Dims d) { return tape.reshape(a, std::move(d)); }
};

struct DirectBackend {
  using Value = TensorD;
  const std::map<std::string, TensorD>& inputs;

  TensorD lookup(const std::string& name) {
    auto it = inputs.find(name);
    if (it == inputs.end()) throw Error(ErrorCode::UnsupportedOp, "unknown input '" + name + "'");
    return it->second;
  }
  TensorD number(double v) {
    TensorD t;
    t[0] = v;
    return t;
  }
  TensorD binary(Op op, const TensorD& a, const TensorD& b) {
    switch (op) {
      case Op::Add: return ops::add(a, b);
      case Op::Sub: return ops::sub(a, b);
      case Op::Mul: return ops::mul(a, b);
      case Op::Div: return ops::div(a, b);
      case Op::Dot: return ops::dot(a, b);
      default: return ops::matmul(a, b);
    }
  }
  TensorD unary(Op op, const TensorD& a) {
    switch (op) {
      case Op::Sigmoid: return ops::sigmoid(a);
      case Op::Log: return ops::log(a);
      case Op::Mean: return ops::mean(a);
      case Op::Sum: return ops::sum(a);
      default: return ops::abs(a);
    }
  }
  TensorD param(Op op, const TensorD& a, double p) {
    if (op == Op::Power) return ops::power(a, p);
    if (op == Op::ClampMin) return ops::clamp_min(a, p);
    return ecvis::area_downsample(a, static_cast<std::size_t>(p));
  }
  TensorD gather(const TensorD& a, const std::vector<std::size_t>& idx) {
    return ops::gather(a, idx, Dims{idx.size()});
  }
  TensorD reshape(const TensorD& a, Dims d) { return a.reshaped(std::move(d)); }
};

}  // namespace

TensorD tape_eval(std::string_view expr, const std::map<std::string, TensorD>& inputs, Tape* tape,
                  Var* root) {
  auto ast = Parser(expr).parse();
  Tape local;
  Tape& t = tape ? *tape : local;
  TapeBackend be{t, inputs, {}};
  Var out = walk(*ast, be);
  if (root) *root = out;
  return t.value(out);
}

TensorD direct_eval(std::string_view expr, const std::map<std::string, TensorD>& inputs) {
  auto ast = Parser(expr).parse();
  DirectBackend be{inputs};
  return walk(*ast, be);
}

}  // namespace ecvis::ad
