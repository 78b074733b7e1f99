#include "doctest.h"

#include "tignn/generic.hpp"
#include "tignn/nn.hpp"

#include <nlohmann/json.hpp>

#include <random>

using namespace tignn;
using nn::Tensor;

namespace {

void zero_grads(nn::Mlp& net) {
  for (auto* p : net.parameters()) p->zero_grad();
}

// Scalar loss sum(R .* net(x)) and its analytic parameter gradients.
double projected(nn::Mlp& net, const Tensor& x, const Tensor& r) { return (net.apply(x).array() * r.array()).sum(); }

// Worst |analytic - central difference| / max(|analytic|, |fd|, 1e-6) over every parameter entry.
double mlp_gradient_error(nn::Mlp& net, const Tensor& x, const Tensor& r, double h = 1e-5) {
  zero_grads(net);
  nn::Tape tape;
  auto in = tape.input(x);
  auto out = net.forward(tape, in);
  tape.backward(out, r);
  double worst = 0;
  for (auto* p : net.parameters()) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double keep = p->value.data()[k];
      p->value.data()[k] = keep + h;
      const double up = projected(net, x, r);
      p->value.data()[k] = keep - h;
      const double down = projected(net, x, r);
      p->value.data()[k] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = p->grad.data()[k];
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("identity layer") {
  std::mt19937_64 rng(1);
  nn::Mlp net("id", {3, 3}, rng);
  net.layers()[0].weight.value = Tensor::Identity(3, 3);
  net.layers()[0].bias.value.setZero();
  Tensor x(1, 3);
  x << 1, 2, 3;
  CHECK(net.apply(x) == x);
}

TEST_CASE("zero weights give the bias") {
  std::mt19937_64 rng(1);
  nn::Mlp net("b", {4, 2}, rng);
  net.layers()[0].weight.value.setZero();
  net.layers()[0].bias.value << 0.5, -1.5;
  Tensor x = Tensor::Random(5, 4);
  for (int i = 0; i < 5; ++i) CHECK(net.apply(x).row(i) == net.layers()[0].bias.value.row(0));
}

TEST_CASE("scalar affine") {
  std::mt19937_64 rng(1);
  nn::Mlp net("s", {1, 1}, rng);
  net.layers()[0].weight.value << 2;
  net.layers()[0].bias.value << 1;
  CHECK(net.apply(Tensor::Constant(1, 1, 3))(0, 0) == 7);
}

TEST_CASE("x squared") {
  nn::Tape tape;
  auto x = tape.input(Tensor::Constant(1, 1, 3));
  auto y = tape.mul(x, x);
  tape.backward(y);
  CHECK(tape.value(y)(0, 0) == 9);
  CHECK(tape.grad(x)(0, 0) == 6);
  CHECK_THROWS_AS(tape.backward(y), std::logic_error);
}

TEST_CASE("bias gradient of an identity layer sum") {
  std::mt19937_64 rng(1);
  nn::Mlp net("id", {3, 3}, rng);
  net.layers()[0].weight.value = Tensor::Identity(3, 3);
  zero_grads(net);
  nn::Tape tape;
  auto out = net.forward(tape, tape.input(Tensor::Random(1, 3)));
  tape.backward(tape.sum(out));
  CHECK(net.layers()[0].bias.grad == Tensor::Ones(1, 3));
}

TEST_CASE("two-layer mlp against finite differences") {
  std::mt19937_64 rng(7);
  nn::Mlp net("m", {4, 8, 3}, rng);
  for (auto* p : net.parameters()) p->value.setRandom();
  CHECK(mlp_gradient_error(net, Tensor::Random(5, 4), Tensor::Random(5, 3)) <= 1e-6);
}

TEST_CASE("random mlps against finite differences") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> width(1, 16), depth(1, 3);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    std::vector<int> widths{width(rng)};
    const int layers = depth(rng);
    for (int l = 0; l < layers; ++l) widths.push_back(width(rng));
    nn::Mlp net("r", widths, rng);
    for (auto* p : net.parameters()) p->value.setRandom();
    worst = std::max(worst, mlp_gradient_error(net, Tensor::Random(3, widths.front()),
                                               Tensor::Random(3, widths.back())));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("structured products against finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  Tensor lp(3, kSkewParams), mp(3, kPsdParams), x(3, kStateDim), r(3, kStateDim);
  for (auto* t : {&lp, &mp, &x, &r})
    for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = n(rng);

  auto value = [&](const Tensor& l, const Tensor& m, const Tensor& v) {
    double s = 0;
    for (int i = 0; i < 3; ++i) {
      const StateVec z = v.row(i).transpose();
      s += r.row(i).dot((assemble_L(l.row(i).transpose()) * z + assemble_M(m.row(i).transpose()) * z).transpose());
    }
    return s;
  };
  nn::Tape tape;
  auto vl = tape.input(lp), vm = tape.input(mp), vx = tape.input(x);
  auto out = tape.add(tape.skew_matvec(vl, vx), tape.psd_matvec(vm, vx));
  CHECK(std::abs(tape.value(out).cwiseProduct(r).sum() - value(lp, mp, x)) < 1e-10);
  tape.backward(out, r);

  double worst = 0;
  const double h = 1e-5;
  auto check = [&](Tensor& t, const Tensor& grad) {
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double keep = t.data()[k];
      t.data()[k] = keep + h;
      const double up = value(lp, mp, x);
      t.data()[k] = keep - h;
      const double down = value(lp, mp, x);
      t.data()[k] = keep;
      const double fd = (up - down) / (2 * h), an = grad.data()[k];
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
  };
  check(lp, tape.grad(vl));
  check(mp, tape.grad(vm));
  check(x, tape.grad(vx));
  CHECK(worst <= 1e-6);
}

TEST_CASE("gather and scatter are adjoint") {
  nn::Tape tape;
  Tensor a = Tensor::Random(4, 2);
  auto va = tape.input(a);
  const std::vector<int> idx{3, 0, 0, 2, 1};
  auto g = tape.gather_rows(va, idx);
  auto s = tape.scatter_sum_rows(g, idx, 4);
  Tensor expect = a;
  expect.row(0) *= 2;
  CHECK((tape.value(s) - expect).cwiseAbs().maxCoeff() == 0);
  tape.backward(tape.sum(s));
  CHECK(tape.grad(va).row(0) == Eigen::RowVector2d(2, 2));
  CHECK(tape.grad(va).row(3) == Eigen::RowVector2d(1, 1));
}

TEST_CASE("adam with zero gradients") {
  nn::Parameter p{"p", Tensor::Constant(2, 2, 1.5), Tensor::Zero(2, 2)};
  nn::Parameter* ps[] = {&p};
  nn::AdamState st;
  nn::adam_step(ps, st);
  CHECK(p.value == Tensor::Constant(2, 2, 1.5));
  CHECK(st.step == 1);
}

TEST_CASE("adam first step") {
  nn::Parameter p{"p", Tensor::Zero(1, 1), Tensor::Ones(1, 1)};
  nn::Parameter* ps[] = {&p};
  nn::AdamState st;
  st.config.lr = 0.1;
  nn::adam_step(ps, st);
  CHECK(p.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("adam is deterministic") {
  nn::Parameter a{"a", Tensor::Constant(1, 3, 0.2), Tensor::Constant(1, 3, -0.7)};
  nn::Parameter b = a;
  nn::Parameter* pa[] = {&a};
  nn::Parameter* pb[] = {&b};
  nn::AdamState sa, sb;
  for (int k = 0; k < 5; ++k) {
    nn::adam_step(pa, sa);
    nn::adam_step(pb, sb);
  }
  CHECK(a.value == b.value);
}

TEST_CASE("adam rejects non-finite gradients") {
  nn::Parameter p{"p", Tensor::Zero(1, 1), Tensor::Constant(1, 1, std::numeric_limits<double>::quiet_NaN())};
  nn::Parameter* ps[] = {&p};
  nn::AdamState st;
  CHECK_THROWS_AS(nn::adam_step(ps, st), TrainingDivergence);
}

TEST_CASE("mlp json round trip") {
  std::mt19937_64 rng(3);
  nn::Mlp net("j", {3, 5, 2}, rng);
  auto back = nn::Mlp::from_json(net.to_json(), "j");
  Tensor x = Tensor::Random(4, 3);
  CHECK(back.apply(x) == net.apply(x));
}

}  // TEST_SUITE
