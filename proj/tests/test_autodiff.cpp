#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "caf/autodiff.hpp"
#include "caf/rng.hpp"
#include "caf/tensor.hpp"

using caf::Rng;
using caf::Tape;
using caf::Tensor;

namespace {

Tensor<double> random_tensor(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& x : t.data) x = rng.normal() * scale;
  return t;
}

// Central finite differences of a scalar-valued graph against the analytic
// gradient of every input marked differentiable.
// build: given the leaf tensors, constructs the graph and returns the root id.
double max_rel_err_fd(
    std::vector<Tensor<double>> inputs,
    const std::function<Tape<double>::Id(Tape<double>&, const std::vector<Tape<double>::Id>&)>&
        build,
    double h = 1e-5) {
  Tape<double> tape;
  std::vector<Tape<double>::Id> ids;
  for (auto& in : inputs) ids.push_back(tape.leaf(in, true));
  auto root = build(tape, ids);
  tape.backward(root);

  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> t2;
    std::vector<Tape<double>::Id> id2;
    for (const auto& x : xs) id2.push_back(t2.leaf(x, false));
    return t2.val(build(t2, id2)).data[0];
  };

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].size(); ++j) {
      auto xs = inputs;
      xs[i].data[j] += h;
      const double up = eval(xs);
      xs[i].data[j] -= 2 * h;
      const double dn = eval(xs);
      const double fd = (up - dn) / (2 * h);
      const double an = tape.grad(ids[i]).data[j];
      const double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("broadcast add/mul forward values") {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({2, 1, 3}, {1, 2, 3, 4, 5, 6}));
  auto b = tape.leaf(Tensor<double>({1, 2, 1}, {10, 100}));
  auto s = tape.add(a, b);
  CHECK(tape.val(s).shape == std::vector<size_t>({2, 2, 3}));
  CHECK(tape.val(s).at(0, 0, 0) == doctest::Approx(11));
  CHECK(tape.val(s).at(0, 1, 2) == doctest::Approx(103));
  CHECK(tape.val(s).at(1, 0, 1) == doctest::Approx(15));
  CHECK(tape.val(s).at(1, 1, 0) == doctest::Approx(104));

  auto p = tape.mul(a, b);
  CHECK(tape.val(p).at(1, 1, 2) == doctest::Approx(600));
}

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(7);
  auto binary_loss = [](auto op) {
    return [op](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
      auto c = (t.*op)(ids[0], ids[1]);
      auto sq = t.mul(c, c);
      auto flat = t.reshape(sq, {t.val(sq).size()});
      return t.sum_axis(flat, 0, false);
    };
  };
  for (int it = 0; it < 3; ++it) {
    std::vector<Tensor<double>> ins{random_tensor({2, 3, 4}, rng),
                                    random_tensor({2, 1, 4}, rng)};
    CHECK(max_rel_err_fd(ins, binary_loss(&Tape<double>::add)) < 1e-5);
    CHECK(max_rel_err_fd(ins, binary_loss(&Tape<double>::mul)) < 1e-5);
    CHECK(max_rel_err_fd(ins, binary_loss(&Tape<double>::sub)) < 1e-5);
  }
}

TEST_CASE("matmul forward and gradient") {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  auto w = tape.leaf(Tensor<double>({2, 2}, {5, 6, 7, 8}));
  auto c = tape.matmul(a, w);
  CHECK(tape.val(c).at(0, 0) == doctest::Approx(19));
  CHECK(tape.val(c).at(0, 1) == doctest::Approx(22));
  CHECK(tape.val(c).at(1, 0) == doctest::Approx(43));
  CHECK(tape.val(c).at(1, 1) == doctest::Approx(50));

  Rng rng(11);
  std::vector<Tensor<double>> ins{random_tensor({2, 3, 4}, rng), random_tensor({4, 5}, rng)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    auto c2 = t.matmul(ids[0], ids[1]);
    auto sq = t.mul(c2, c2);
    auto flat = t.reshape(sq, {t.val(sq).size()});
    return t.sum_axis(flat, 0, false);
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}

TEST_CASE("reductions, expand, concat, reshape gradients") {
  Rng rng(13);
  std::vector<Tensor<double>> ins{random_tensor({2, 3, 4}, rng), random_tensor({2, 1, 4}, rng)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    auto m = t.mean_axis(ids[0], 1, true);           // [2,1,4]
    auto e = t.expand_axis(ids[1], 1, 3);            // [2,3,4]
    auto cat = t.concat({ids[0], e}, 2);             // [2,3,8]
    auto s = t.sum_axis(cat, 2, true);               // [2,3,1]
    auto prod = t.mul(s, t.sum_axis(m, 2, true));    // [2,3,1]
    auto flat = t.reshape(prod, {t.val(prod).size()});
    auto tot = t.sum_axis(flat, 0, false);
    return t.mul(tot, tot);
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}

TEST_CASE("gelu gradient") {
  Rng rng(17);
  std::vector<Tensor<double>> ins{random_tensor({3, 5}, rng, 1.5)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    auto g = t.gelu(ids[0]);
    auto sq = t.mul(g, g);
    auto flat = t.reshape(sq, {t.val(sq).size()});
    return t.sum_axis(flat, 0, false);
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}

TEST_CASE("softmax values, shift invariance, gradient") {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({1, 2, 1}, {0.70710678118654752, 0.0}));
  auto s = tape.softmax_axis(a, 1);
  CHECK(tape.val(s).data[0] == doctest::Approx(0.66971).epsilon(1e-4));
  CHECK(tape.val(s).data[1] == doctest::Approx(0.33029).epsilon(1e-4));

  // adding a constant leaves the weights unchanged
  auto b = tape.leaf(Tensor<double>({1, 2, 1}, {0.70710678118654752 + 5.0, 5.0}));
  auto s2 = tape.softmax_axis(b, 1);
  for (size_t i = 0; i < 2; ++i)
    CHECK(tape.val(s2).data[i] == doctest::Approx(tape.val(s).data[i]).epsilon(1e-12));

  // all-equal logits -> uniform
  auto c = tape.leaf(Tensor<double>::full({1, 4, 1}, 3.25));
  auto s3 = tape.softmax_axis(c, 1);
  for (size_t i = 0; i < 4; ++i) CHECK(tape.val(s3).data[i] == doctest::Approx(0.25));

  // large logits stay stable
  auto d = tape.leaf(Tensor<double>({1, 2, 1}, {1000.0, 999.0}));
  auto s4 = tape.softmax_axis(d, 1);
  CHECK(std::isfinite(tape.val(s4).data[0]));
  CHECK(tape.val(s4).data[0] + tape.val(s4).data[1] == doctest::Approx(1.0));

  Rng rng(19);
  std::vector<Tensor<double>> ins{random_tensor({2, 4, 3}, rng)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    auto sm = t.softmax_axis(ids[0], 1);
    auto w = t.leaf(Tensor<double>({2, 4, 3},
                                   {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,
                                    .5, .4, .3, .2, .1, .6, .7, .8, .9, .11, .22, .33}));
    auto p = t.mul(sm, w);
    auto flat = t.reshape(p, {t.val(p).size()});
    return t.sum_axis(flat, 0, false);
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}

TEST_CASE("layer_norm gradient") {
  Rng rng(23);
  std::vector<Tensor<double>> ins{random_tensor({2, 3, 6}, rng),
                                  random_tensor({6}, rng, 0.5),
                                  random_tensor({6}, rng, 0.5)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    auto ln = t.layer_norm(ids[0], ids[1], ids[2]);
    auto sq = t.mul(ln, ln);
    auto flat = t.reshape(sq, {t.val(sq).size()});
    return t.sum_axis(flat, 0, false);
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}

TEST_CASE("dropout eval identity, train mask determinism and scaling") {
  Tape<double> tape;
  Rng rng(29);
  auto x = tape.leaf(random_tensor({4, 8}, rng), true);
  auto e = tape.dropout(x, 0.5, 123, false);
  CHECK(e == x);  // identity node reuse in eval mode

  auto t1 = tape.dropout(x, 0.5, 123, true);
  auto t2 = tape.dropout(x, 0.5, 123, true);
  for (size_t i = 0; i < 32; ++i) {
    CHECK(tape.val(t1).data[i] == tape.val(t2).data[i]);
    const double r = tape.val(t1).data[i] / tape.val(x).data[i];
    CHECK((std::abs(r) < 1e-12 || r == doctest::Approx(2.0)));
  }
}

TEST_CASE("topk_mean forward, ties, and selective gradient") {
  // spec worked example: scores class0=[3,1,2,0], class1=[0,2,5,1], k=2
  Tape<double> tape;
  Tensor<double> ocam({1, 4, 2});
  const double c0[4] = {3, 1, 2, 0}, c1[4] = {0, 2, 5, 1};
  for (size_t j = 0; j < 4; ++j) {
    ocam.at(0, j, 0) = c0[j];
    ocam.at(0, j, 1) = c1[j];
  }
  auto a = tape.leaf(ocam, true);
  Tensor<int32_t> idx;
  auto pred = tape.topk_mean(a, 2, nullptr, &idx);
  CHECK(tape.val(pred).at(0, 0) == doctest::Approx(2.5));
  CHECK(tape.val(pred).at(0, 1) == doctest::Approx(3.5));
  CHECK(idx.at(0, 0, 0) == 0);
  CHECK(idx.at(0, 1, 0) == 2);
  CHECK(idx.at(0, 0, 1) == 2);
  CHECK(idx.at(0, 1, 1) == 1);

  // gradient hits only selected entries with 1/k
  auto s = tape.sum_axis(tape.reshape(pred, {2}), 0, false);
  tape.backward(s);
  CHECK(tape.grad(a).at(0, 0, 0) == doctest::Approx(0.5));
  CHECK(tape.grad(a).at(0, 2, 0) == doctest::Approx(0.5));
  CHECK(tape.grad(a).at(0, 1, 0) == doctest::Approx(0.0));
  CHECK(tape.grad(a).at(0, 3, 0) == doctest::Approx(0.0));
  CHECK(tape.grad(a).at(0, 2, 1) == doctest::Approx(0.5));
  CHECK(tape.grad(a).at(0, 0, 1) == doctest::Approx(0.0));

  // ties resolve to the lower slot index
  Tape<double> t2;
  auto b = t2.leaf(Tensor<double>({1, 3, 1}, {1.0, 1.0, 1.0}));
  Tensor<int32_t> idx2;
  t2.topk_mean(b, 2, nullptr, &idx2);
  CHECK(idx2.at(0, 0, 0) == 0);
  CHECK(idx2.at(0, 1, 0) == 1);

  // k = n -> per-class mean; k = 1 -> per-class max
  Tape<double> t3;
  auto cc = t3.leaf(ocam);
  auto mean_all = t3.topk_mean(cc, 4, nullptr, nullptr);
  CHECK(t3.val(mean_all).at(0, 0) == doctest::Approx(1.5));
  CHECK(t3.val(mean_all).at(0, 1) == doctest::Approx(2.0));
  auto max1 = t3.topk_mean(cc, 1, nullptr, nullptr);
  CHECK(t3.val(max1).at(0, 0) == doctest::Approx(3.0));
  CHECK(t3.val(max1).at(0, 1) == doctest::Approx(5.0));
}

TEST_CASE("topk_mean respects validity mask") {
  Tape<double> tape;
  Tensor<double> ocam({1, 4, 1});
  ocam.at(0, 0, 0) = 10;  // invalid slot has the max score
  ocam.at(0, 1, 0) = 1;
  ocam.at(0, 2, 0) = 2;
  ocam.at(0, 3, 0) = 3;
  Tensor<uint8_t> valid({1, 4});
  valid.at(0, 0) = 0;
  valid.at(0, 1) = 1;
  valid.at(0, 2) = 1;
  valid.at(0, 3) = 1;
  auto a = tape.leaf(ocam);
  Tensor<int32_t> idx;
  auto pred = tape.topk_mean(a, 2, &valid, &idx);
  CHECK(tape.val(pred).at(0, 0) == doctest::Approx(2.5));  // (3+2)/2
  CHECK(idx.at(0, 0, 0) == 3);
  CHECK(idx.at(0, 1, 0) == 2);

  // with fewer valid slots than k, selection falls back to all slots
  Tensor<uint8_t> sparse({1, 4});
  sparse.at(0, 1) = 1;
  auto pred2 = tape.topk_mean(a, 2, &sparse, nullptr);
  CHECK(tape.val(pred2).at(0, 0) == doctest::Approx(6.5));  // (10+3)/2
}

TEST_CASE("cross entropy values and gradient") {
  // two-class closed form: loss = ln(1 + e^{-margin})
  Tape<double> tape;
  auto z = tape.leaf(Tensor<double>({1, 2}, {2.5, 3.5}));
  auto l = tape.cross_entropy_mean(z, {1});
  CHECK(tape.val(l).data[0] == doctest::Approx(std::log(1 + std::exp(-1.0))).epsilon(1e-10));

  // uniform logits over C=5 -> ln 5
  auto z5 = tape.leaf(Tensor<double>::full({3, 5}, 0.42));
  auto l5 = tape.cross_entropy_mean(z5, {0, 2, 4});
  CHECK(tape.val(l5).data[0] == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  // separated logits -> loss -> 0
  auto zs = tape.leaf(Tensor<double>({1, 2}, {50.0, -50.0}));
  auto ls = tape.cross_entropy_mean(zs, {0});
  CHECK(tape.val(ls).data[0] == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(31);
  std::vector<Tensor<double>> ins{random_tensor({4, 3}, rng)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    return t.cross_entropy_mean(ids[0], {0, 2, 1, 1});
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}

TEST_CASE("composed graph grads through topk and softmax") {
  Rng rng(37);
  std::vector<Tensor<double>> ins{random_tensor({2, 4, 3}, rng),
                                  random_tensor({3, 3}, rng, 0.7)};
  auto loss = [](Tape<double>& t, const std::vector<Tape<double>::Id>& ids) {
    auto h = t.matmul(ids[0], ids[1]);     // [2,4,3]
    auto sm = t.softmax_axis(h, 1);
    auto cam = t.mul(h, sm);               // [2,4,3]
    auto pred = t.topk_mean(cam, 2, nullptr, nullptr);  // [2,3]
    return t.cross_entropy_mean(pred, {0, 2});
  };
  CHECK(max_rel_err_fd(ins, loss) < 1e-5);
}
