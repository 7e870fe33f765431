#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mfg/errors.hpp"
#include "mfg/mlp.hpp"

using namespace mfg;
namespace fs = std::filesystem;

namespace {

// Straightforward re-implementation, one sample at a time.
std::vector<double> reference_eval(const Mlp& net, std::vector<double> x) {
  for (int l = 0; l < net.num_layers(); ++l) {
    const Matrix& W = net.weights[l];
    std::vector<double> y(W.cols());
    for (int j = 0; j < W.cols(); ++j) {
      double s = net.biases[l](0, j);
      for (int i = 0; i < W.rows(); ++i) s += x[i] * W(i, j);
      y[j] = (l + 1 < net.num_layers()) ? std::tanh(s) : s;
    }
    x = y;
  }
  return x;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mfg_test_mlp";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("zero network outputs zeros") {
  const Mlp net = Mlp::zeros({3, 20, 20, 20, 2});
  Matrix x(4, 3);
  x.setRandom();
  CHECK(net.evaluate(x).isZero());
  CHECK(net.parameter_count() == 3 * 20 + 20 + 2 * (20 * 20 + 20) + 20 * 2 + 2);
}

TEST_CASE("single linear layer with identity weights") {
  Mlp net = Mlp::zeros({3, 3});
  net.weights[0].setIdentity();
  Matrix x(2, 3);
  x << 1, 2, 3, -4, 5, -6;
  CHECK(net.evaluate(x) == x);
}

TEST_CASE("evaluation matches the reference implementation") {
  const Mlp net = Mlp::xavier({4, 7, 5, 3}, 99);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Matrix x(6, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const Matrix out = net.evaluate(x);
  for (int r = 0; r < 6; ++r) {
    const auto ref = reference_eval(net, {x(r, 0), x(r, 1), x(r, 2), x(r, 3)});
    for (int j = 0; j < 3; ++j) CHECK(std::abs(out(r, j) - ref[j]) <= 1e-12);
  }
  // tape forward agrees with plain evaluation
  ad::Tape t;
  const MlpLeaves leaves = bind(t, net);
  const ad::Var y = forward(t, net, leaves, t.constant(x));
  CHECK((t.value(y) - out).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(forward(t, net, std::vector<double>{1.0, 2.0}), ContractViolation);
}

TEST_CASE("xavier initialization is seeded and bounded") {
  const Mlp a = Mlp::xavier({3, 20, 2}, 5);
  const Mlp b = Mlp::xavier({3, 20, 2}, 5);
  const Mlp c = Mlp::xavier({3, 20, 2}, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const double lim0 = std::sqrt(6.0 / 23.0);
  CHECK(a.weights[0].cwiseAbs().maxCoeff() <= lim0);
  CHECK(a.biases[0].isZero());
}

TEST_CASE("network parameter gradients against central differences") {
  Mlp net = Mlp::xavier({3, 6, 6, 2}, 11);
  Matrix x(5, 3);
  x.setRandom();
  Matrix w(5, 2);
  w.setRandom();
  auto loss = [&](const Mlp& n) { return (n.evaluate(x).array() * w.array()).sum(); };

  ad::Tape t;
  const MlpLeaves leaves = bind(t, net);
  const ad::Var y = forward(t, net, leaves, t.constant(x));
  t.backward(y, w);
  const std::vector<Matrix> g = gradients(t, leaves);

  auto tensors = net.tensors();
  REQUIRE(g.size() == tensors.size());
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    for (Eigen::Index i = 0; i < tensors[k]->size(); ++i) {
      double& p = tensors[k]->data()[i];
      const double p0 = p;
      p = p0 + 1e-6;
      const double up = loss(net);
      p = p0 - 1e-6;
      const double dn = loss(net);
      p = p0;
      const double fd = (up - dn) / 2e-6;
      if (std::abs(fd) > 1e-8) CHECK(std::abs(g[k].data()[i] - fd) / std::abs(fd) <= 1e-5);
    }
  }

  // bit-identical on a second recording
  ad::Tape t2;
  const MlpLeaves l2 = bind(t2, net);
  t2.backward(forward(t2, net, l2, t2.constant(x)), w);
  const auto g2 = gradients(t2, l2);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == g2[k]);
}

TEST_CASE("adam first step") {
  Matrix x = Matrix::Zero(1, 1);
  AdamState st;
  adam_step({&x}, {Matrix::Constant(1, 1, 1.0)}, st);
  CHECK(std::abs(x(0, 0) - (-1e-3 / (1.0 + 1e-8))) <= 1e-12);
  CHECK(st.t == 1);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  const Matrix x0 = x;
  AdamState st;
  adam_step({&x}, {Matrix::Zero(2, 2)}, st);
  adam_step({&x}, {Matrix::Zero(2, 2)}, st);
  CHECK(x == x0);
  CHECK(st.t == 2);
}

TEST_CASE("adam two steps against a hand-rolled sequence") {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g = 0.37;
  double m = 0, v = 0, ref = 0.5;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    ref -= lr * mh / (std::sqrt(vh) + eps);
  }
  Matrix x = Matrix::Constant(1, 1, 0.5);
  AdamState st;
  for (int t = 0; t < 2; ++t) adam_step({&x}, {Matrix::Constant(1, 1, g)}, st);
  CHECK(std::abs(x(0, 0) - ref) <= 1e-15);

  AdamState bad;
  Matrix y = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(adam_step({&y}, {Matrix::Zero(1, 2)}, bad), ContractViolation);
}

TEST_CASE("weights round trip is bit-exact") {
  Mlp net = Mlp::xavier({3, 5, 2}, 17);
  net.biases[0](0, 1) = 1.0 / 3.0;
  net.weights[1](2, 0) = -2.2250738585072014e-308;
  const fs::path p = temp_file("net.mfgnet");
  save_weights(net, p);
  const Mlp back = load_weights(p);
  CHECK(back == net);
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    CHECK(back.weights[k] == net.weights[k]);
    CHECK(back.biases[k] == net.biases[k]);
  }
  std::ifstream in(p);
  std::string first;
  std::getline(in, first);
  CHECK(first == "MFGNET v1");
}

TEST_CASE("malformed weights files") {
  const Mlp net = Mlp::xavier({2, 3, 1}, 1);
  const fs::path good = temp_file("good.mfgnet");
  save_weights(net, good);
  std::ifstream in(good);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 6);

  SUBCASE("truncated") {
    const fs::path p = temp_file("trunc.mfgnet");
    write_file(p, lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n");
    try {
      load_weights(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("version mismatch") {
    const fs::path p = temp_file("v2.mfgnet");
    std::string text = "MFGNET v2\n";
    for (std::size_t i = 1; i < lines.size(); ++i) text += lines[i] + "\n";
    write_file(p, text);
    CHECK_THROWS_AS(load_weights(p), VersionError);
  }
  SUBCASE("bad magic") {
    const fs::path p = temp_file("magic.mfgnet");
    write_file(p, "NOTANET\n2 3 1\n");
    try {
      load_weights(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("bad number reports its offset") {
    const fs::path p = temp_file("num.mfgnet");
    std::string text;
    for (std::size_t i = 0; i < lines.size(); ++i)
      text += (i == 3 ? std::string("0 zz 0") : lines[i]) + "\n";
    write_file(p, text);
    try {
      load_weights(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
      CHECK(e.offset() == 3);
    }
  }
  SUBCASE("missing file") { CHECK_THROWS(load_weights(temp_file("absent.mfgnet"))); }
}
