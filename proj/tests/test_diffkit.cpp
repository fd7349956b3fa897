#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "mriqc/rng.hpp"
#include "mriqc/tape.hpp"

using namespace mriqc;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.count(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("exp(log(x)) recovers x for positive input") {
  Tape tape;
  Var x = tape.constant(random_tensor({4, 3, 2, 2}, 1, 0.1, 5.0));
  Var y = exp(log(x));
  for (std::int64_t i = 0; i < tape.value(x).count(); ++i)
    CHECK(std::abs(tape.value(y)[i] - tape.value(x)[i]) <= 1e-12);
}

TEST_CASE("log rejects non-positive input") {
  Tape tape;
  Var x = tape.constant(Tensor({2}, {1.0, -0.5}));
  CHECK_THROWS_AS(log(x), Error);
}

TEST_CASE("shape mismatches are rejected with both shapes named") {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({3, 2}));
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), Error);
}

TEST_CASE("conv3d with a delta kernel is the identity") {
  Tape tape;
  Var x = tape.constant(random_tensor({1, 6, 5, 4}, 2));
  Tensor w({1, 1, 3, 3, 3});
  w[13] = 1.0;  // center tap
  Var y = conv3d(x, tape.constant(w));
  for (std::int64_t i = 0; i < tape.value(x).count(); ++i)
    CHECK(tape.value(y)[i] == tape.value(x)[i]);
}

TEST_CASE("conv3d matches a scalar-loop oracle") {
  Tape tape;
  Tensor x = random_tensor({2, 8, 8, 8}, 3);
  Tensor w = random_tensor({3, 2, 3, 3, 3}, 4);
  Tensor b = random_tensor({3}, 5);
  Var y = conv3d(tape.constant(x), tape.constant(w), tape.constant(b));

  const std::int64_t zn = 8, yn = 8, xn = 8;
  for (std::int64_t oc = 0; oc < 3; ++oc)
    for (std::int64_t z = 0; z < zn; ++z)
      for (std::int64_t y0 = 0; y0 < yn; ++y0)
        for (std::int64_t x0 = 0; x0 < xn; ++x0) {
          double acc = b[oc];
          for (std::int64_t ic = 0; ic < 2; ++ic)
            for (std::int64_t kz = 0; kz < 3; ++kz)
              for (std::int64_t ky = 0; ky < 3; ++ky)
                for (std::int64_t kx = 0; kx < 3; ++kx) {
                  std::int64_t zi = z + kz - 1, yi = y0 + ky - 1, xi = x0 + kx - 1;
                  if (zi < 0 || zi >= zn || yi < 0 || yi >= yn || xi < 0 || xi >= xn)
                    continue;
                  acc += w[(((oc * 2 + ic) * 3 + kz) * 3 + ky) * 3 + kx] *
                         x[(ic * zn + zi) * yn * xn + yi * xn + xi];
                }
          double got = tape.value(y)[(oc * zn + z) * yn * xn + y0 * xn + x0];
          CHECK(std::abs(got - acc) <= 1e-12);
        }
}

TEST_CASE("d(x^2)/dx at x=3 is 6") {
  Tape tape;
  Var x = tape.param(Tensor::scalar(3.0), "x");
  Var y = mul(x, x);
  tape.backward(y);
  CHECK(tape.grad(x)[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("softmax cross-entropy gradient is p minus onehot") {
  Tape tape;
  Tensor logits = random_tensor({3, 2, 2, 2}, 6, -2.0, 2.0);
  Var z = tape.param(logits, "logits");
  LabelVolume labels({2, 2, 2}, 3);
  Rng rng(7);
  for (auto& l : labels.data()) l = std::uint8_t(rng.uniform_int(3));
  Tensor onehot = Tensor::one_hot(labels);

  // summed (not averaged) cross entropy so the gradient is exactly p - y
  Var ce = neg(sum(mul(tape.constant(onehot), log_softmax_channel(z))));
  tape.backward(ce);

  Tape probe;
  Var p = softmax_channel(probe.constant(logits));
  for (std::int64_t i = 0; i < logits.count(); ++i) {
    double expected = probe.value(p)[i] - onehot[i];
    CHECK(std::abs(tape.grad(z)[i] - expected) <= 1e-12);
  }
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape tape;
  Var x = tape.param(Tensor({2, 2}), "x");
  Var y = add_scalar(x, 1.0);
  CHECK_THROWS_AS(tape.backward(y), Error);
}

TEST_CASE("grad_check is exact for a linear function") {
  Tape tape;
  Var x = tape.param(random_tensor({8}, 8), "x");
  Var w = tape.constant(random_tensor({8}, 9));
  Var f = sum(mul(x, w));
  // central differences are exact for a linear map, so a large step leaves
  // only round-off
  auto report = grad_check(tape, f, 1e-2, 1e-10);
  CHECK(report.pass);
  CHECK(report.max_rel_err <= 1e-10);
}

TEST_CASE("grad_check flags an intentionally wrong gradient") {
  Tape tape;
  Var x = tape.param(random_tensor({6}, 10, 0.5, 2.0), "x");
  Var y = custom_unary(x, [](double v) { return v * v; },
                       [](double v) { return v; });  // should be 2v
  auto report = grad_check(tape, sum(y), 1e-5, 1e-4);
  CHECK(!report.pass);
}

TEST_CASE("grad_check rejects a non-deterministic forward") {
  Tape tape;
  Var x = tape.param(random_tensor({4}, 11), "x");
  auto counter = std::make_shared<double>(0.0);
  Var y = custom_unary(x, [counter](double v) { return v + (*counter += 1e-9); },
                       [](double) { return 1.0; });
  CHECK_THROWS_WITH_AS(grad_check(tape, sum(y), 1e-5, 1e-4),
                       doctest::Contains("deterministic"), Error);
}

TEST_CASE("grad_check covers a composite of most primitives") {
  Tape tape;
  Var x = tape.param(random_tensor({2, 4, 4, 4}, 12, 0.2, 1.5), "x");
  Var w = tape.param(random_tensor({2, 2, 3, 3, 3}, 13, -0.4, 0.4), "w");
  Var b = tape.param(random_tensor({2}, 14, -0.1, 0.1), "b");
  Var h = softplus(conv3d(x, w, b));
  Var s = softmax_channel(h);
  Var chunk = slice(s, 1, 1, 2);
  Var t1 = mean(mul(abs(chunk), exp(mul_scalar(chunk, 0.3))));
  Var t2 = mean(reciprocal(add_scalar(avg_pool3(slice(h, 0, 0, 1)), 2.0)));
  Var loss = add(add(add(t1, t2), reduce_max(h)),
                 mul_scalar(sum(maximum(h, relu(neg(h)))), 0.01));
  auto report = grad_check(tape, loss, 1e-6, 1e-4);
  INFO("max rel err ", report.max_rel_err, " at ", report.worst_param, "[",
       report.worst_index, "]");
  CHECK(report.pass);
}

TEST_CASE("gradient of a sum of losses is the sum of gradients") {
  Tensor x0 = random_tensor({10}, 15, 0.5, 1.5);

  auto grad_of = [&](int which) {
    Tape tape;
    Var x = tape.param(x0, "x");
    Var l1 = mean(mul(x, x));
    Var l2 = sum(exp(mul_scalar(x, 0.5)));
    Var target = which == 0 ? l1 : which == 1 ? l2 : add(l1, l2);
    tape.backward(target);
    return tape.grad(x);
  };
  Tensor g1 = grad_of(0), g2 = grad_of(1), g12 = grad_of(2);
  for (std::int64_t i = 0; i < x0.count(); ++i)
    CHECK(std::abs(g12[i] - (g1[i] + g2[i])) <= 1e-12);
}

TEST_CASE("non-trainable parameters receive exactly zero gradient") {
  Tape tape;
  Var frozen = tape.param(random_tensor({5}, 16), "frozen", /*trainable=*/false);
  Var live = tape.param(random_tensor({5}, 17), "live");
  Var loss = sum(mul(frozen, live));
  tape.backward(loss);
  for (std::int64_t i = 0; i < 5; ++i) {
    CHECK(tape.grad(frozen)[i] == 0.0);
    CHECK(tape.grad(live)[i] != 0.0);
  }
}

TEST_CASE("replaying a tape reproduces identical outputs bit-for-bit") {
  Tape tape;
  Var x = tape.param(random_tensor({2, 4, 4, 4}, 18), "x");
  Var w = tape.param(random_tensor({3, 2, 3, 3, 3}, 19, -0.3, 0.3), "w");
  Var y = mean(relu(conv3d(x, w)));
  Tensor before = tape.value(y);
  tape.replay();
  CHECK(tape.value(y) == before);

  // replay propagates leaf changes
  Tensor moved = tape.value(x);
  moved[0] += 1.0;
  tape.set_value(x, moved);
  tape.replay();
  CHECK(tape.value(y) != before);
}

TEST_CASE("detach blocks gradient flow") {
  Tape tape;
  Var x = tape.param(random_tensor({4}, 20), "x");
  Var y = sum(mul(detach(x), x));
  tape.backward(y);
  for (std::int64_t i = 0; i < 4; ++i)
    CHECK(tape.grad(x)[i] == doctest::Approx(tape.value(x)[i]));  // only one path
}

TEST_CASE("tile and sum channel are adjoint") {
  Tape tape;
  Var a = tape.param(random_tensor({1, 3, 3, 3}, 21), "a");
  Var tiled = tile_channel(a, 4);
  CHECK(tape.value(tiled).shape() == std::vector<std::int64_t>{4, 3, 3, 3});
  auto report = grad_check(tape, mean(mul(tiled, tiled)), 1e-6, 1e-6);
  CHECK(report.pass);

  Var back = sum_channel(tiled);
  for (std::int64_t i = 0; i < tape.value(a).count(); ++i)
    CHECK(tape.value(back)[i] == doctest::Approx(4.0 * tape.value(a)[i]));
}
