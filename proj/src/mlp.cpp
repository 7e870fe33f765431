#include "mfg/mlp.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "mfg/errors.hpp"
#include "mfg/random.hpp"

namespace mfg {
namespace {

constexpr std::string_view kMagic = "MFGNET v1";
constexpr std::string_view kMagicPrefix = "MFGNET v";

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ContractViolation("Mlp needs at least two layer dims");
  for (int d : dims)
    if (d < 1) throw ContractViolation("Mlp layer dims must be >= 1");
}

}  // namespace

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

std::vector<Matrix*> Mlp::tensors() {
  std::vector<Matrix*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

std::vector<const Matrix*> Mlp::tensors() const {
  std::vector<const Matrix*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

Mlp Mlp::zeros(std::vector<int> dims) {
  check_dims(dims);
  Mlp net;
  net.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    net.weights.push_back(Matrix::Zero(net.layer_dims[l], net.layer_dims[l + 1]));
    net.biases.push_back(Matrix::Zero(1, net.layer_dims[l + 1]));
  }
  return net;
}

Mlp Mlp::xavier(std::vector<int> dims, std::uint64_t seed) {
  Mlp net = zeros(std::move(dims));
  std::uint64_t counter = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix& W = net.weights[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        W(i, j) = limit * (2.0 * to_unit(derive_seed(seed, counter++)) - 1.0);
  }
  return net;
}

Matrix Mlp::evaluate(const Matrix& input) const {
  if (input.cols() != input_dim())
    throw ContractViolation("Mlp::evaluate: input has " +
                            std::to_string(input.cols()) + " columns, expected " +
                            std::to_string(input_dim()));
  Matrix h = input;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = h * weights[l];
    z.rowwise() += biases[l].row(0);
    if (l + 1 < num_layers()) {
      h = z.array().tanh().matrix();
    } else {
      h = std::move(z);
    }
  }
  return h;
}

bool Mlp::operator==(const Mlp& o) const {
  if (layer_dims != o.layer_dims) return false;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
  return true;
}

MlpLeaves bind(ad::Tape& tape, const Mlp& net, bool trainable) {
  MlpLeaves leaves;
  for (const Matrix* t : net.tensors())
    leaves.tensors.push_back(trainable ? tape.leaf(*t) : tape.constant(*t));
  return leaves;
}

ad::Var forward(ad::Tape& tape, const Mlp& net, const MlpLeaves& leaves,
                ad::Var input) {
  if (tape.value(input).cols() != net.input_dim())
    throw ContractViolation("forward: input width does not match layer_dims[0]");
  ad::Var h = input;
  for (int l = 0; l < net.num_layers(); ++l) {
    ad::Var z = ad::add(tape, ad::matmul(tape, h, leaves.tensors[2 * l]),
                        leaves.tensors[2 * l + 1]);
    h = (l + 1 < net.num_layers()) ? ad::tanh(tape, z) : z;
  }
  return h;
}

ad::Var forward(ad::Tape& tape, const Mlp& net, const std::vector<double>& input,
                MlpLeaves* leaves_out) {
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, i) = input[i];
  MlpLeaves leaves = bind(tape, net, true);
  ad::Var out = forward(tape, net, leaves, tape.constant(std::move(x)));
  if (leaves_out) *leaves_out = std::move(leaves);
  return out;
}

std::vector<Matrix> gradients(const ad::Tape& tape, const MlpLeaves& leaves) {
  std::vector<Matrix> out;
  out.reserve(leaves.tensors.size());
  for (ad::Var v : leaves.tensors) out.push_back(tape.grad(v));
  return out;
}

void adam_step(const std::vector<Matrix*>& params,
               const std::vector<Matrix>& grads, AdamState& s) {
  if (params.size() != grads.size())
    throw ContractViolation("adam_step: parameter/gradient count mismatch");
  if (s.m.empty()) {
    for (const Matrix* p : params) {
      s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (s.m.size() != params.size())
    throw ContractViolation("adam_step: state does not match parameters");
  ++s.t;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols() ||
        s.m[i].rows() != p.rows() || s.m[i].cols() != p.cols())
      throw ContractViolation("adam_step: shape mismatch");
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g.cwiseProduct(g);
    p.array() -= s.learning_rate * (s.m[i].array() / bc1) /
                 ((s.v[i].array() / bc2).sqrt() + s.epsilon);
  }
}

void adam_step(Mlp& net, const std::vector<Matrix>& grads, AdamState& state) {
  adam_step(net.tensors(), grads, state);
}

void save_weights(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << kMagic << '\n';
  for (std::size_t i = 0; i < net.layer_dims.size(); ++i)
    out << (i ? " " : "") << net.layer_dims[i];
  out << '\n';
  char buf[64];
  for (const Matrix* t : net.tensors()) {
    bool first = true;
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        auto res = std::to_chars(buf, buf + sizeof(buf), (*t)(r, c));
        if (!first) out << ' ';
        out.write(buf, res.ptr - buf);
        first = false;
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

// Splits a line into tokens remembering 1-based columns.
struct Token {
  std::string_view text;
  std::size_t column;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

}  // namespace

Mlp load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);

  if (lines.empty()) throw ParseError("empty weights file", 1, 1);
  std::string_view magic = lines[0];
  if (!magic.empty() && magic.back() == '\r') magic.remove_suffix(1);
  if (magic != kMagic) {
    if (magic.substr(0, kMagicPrefix.size()) == kMagicPrefix)
      throw VersionError("unsupported weights version '" + std::string(magic) +
                         "', expected '" + std::string(kMagic) + "'");
    throw ParseError("missing MFGNET header", 1, 1);
  }
  if (lines.size() < 2) throw ParseError("missing layer dims", 2, 1);

  std::vector<int> dims;
  for (const Token& tok : tokenize(lines[1])) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
    if (ec != std::errc() || ptr != tok.text.data() + tok.text.size() || v < 1)
      throw ParseError("bad layer dim '" + std::string(tok.text) + "'", 2, tok.column);
    dims.push_back(v);
  }
  if (dims.size() < 2) throw ParseError("need at least two layer dims", 2, 1);

  Mlp net = Mlp::zeros(dims);
  std::size_t line_no = 2;
  for (Matrix* t : net.tensors()) {
    ++line_no;
    if (line_no > lines.size())
      throw ParseError("truncated file: missing parameter tensor", line_no, 1);
    const auto toks = tokenize(lines[line_no - 1]);
    const auto expected = static_cast<std::size_t>(t->size());
    if (toks.size() != expected) {
      const std::size_t col = toks.size() < expected
                                  ? lines[line_no - 1].size() + 1
                                  : toks[expected].column;
      throw ParseError("expected " + std::to_string(expected) + " values, found " +
                           std::to_string(toks.size()),
                       line_no, col);
    }
    std::size_t idx = 0;
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c, ++idx) {
        const Token& tok = toks[idx];
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
        if (ec != std::errc() || ptr != tok.text.data() + tok.text.size() || !std::isfinite(v))
          throw ParseError("bad number '" + std::string(tok.text) + "'", line_no, tok.column);
        (*t)(r, c) = v;
      }
    }
  }
  for (std::size_t extra = line_no; extra < lines.size(); ++extra)
    if (!tokenize(lines[extra]).empty())
      throw ParseError("unexpected trailing content", extra + 1, 1);
  return net;
}

}  // namespace mfg
