#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bioee/autodiff.hpp"
#include "bioee/gradcheck.hpp"
#include "bioee/param_store.hpp"

using namespace bioee;
using namespace bioee::ad;

namespace {

Tensor random_param(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::param(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("segment_softmax basics") {
  auto two = segment_softmax(Tensor::constant({2}, {0.0, 0.0}), {0, 0});
  CHECK(two.values()[0] == Catch::Approx(0.5));
  CHECK(two.values()[1] == Catch::Approx(0.5));

  auto single = segment_softmax(Tensor::constant({1}, {42.0}), {0});
  CHECK(single.values()[0] == Catch::Approx(1.0));

  auto split = segment_softmax(Tensor::constant({3}, {1.0, 1.0, 5.0}), {0, 0, 1});
  CHECK(split.values()[0] == Catch::Approx(0.5));
  CHECK(split.values()[2] == Catch::Approx(1.0));

  CHECK_THROWS_AS(segment_softmax(Tensor::constant({2}, {0.0, 0.0}), {1, 0}), Error);
}

TEST_CASE("segment_softmax sums to one per segment") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + int64_t(rng.below(20));
    std::vector<double> logits(static_cast<size_t>(n));
    std::vector<int64_t> seg(static_cast<size_t>(n));
    int64_t cur = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
      logits[i] = rng.uniform(-5, 5);
      if (i > 0 && rng.uniform() < 0.3) ++cur;
      seg[i] = cur;
    }
    auto out = segment_softmax(Tensor::constant({n}, logits), seg);
    size_t start = 0;
    while (start < size_t(n)) {
      size_t end = start;
      double total = 0.0;
      while (end < size_t(n) && seg[end] == seg[start]) total += out.values()[end++];
      CHECK(std::abs(total - 1.0) < 1e-9);
      start = end;
    }
  }
}

TEST_CASE("scatter_sum merges rows by segment") {
  auto x = Tensor::constant({2, 3}, {1, 2, 3, 10, 20, 30});
  auto out = scatter_sum(x, {0, 0}, 1);
  CHECK(out.values() == std::vector<double>{11, 22, 33});

  // empty segments produce zero rows
  auto sparse = scatter_sum(x, {0, 2}, 4);
  CHECK(sparse.values()[3] == 0.0);
  CHECK(sparse.values()[6] == 10.0);
}

TEST_CASE("scatter_sum after gather_rows with identity segments is identity") {
  Rng rng(3);
  auto x = random_param({5, 4}, rng);
  auto roundtrip = scatter_sum(gather_rows(x, {0, 1, 2, 3, 4}), {0, 1, 2, 3, 4}, 5);
  CHECK(roundtrip.values() == x.values());
}

TEST_CASE("shape errors carry both shapes") {
  auto a = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor::constant({2, 2}, {1, 2, 3, 4});
  try {
    matmul(a, b);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == "ShapeMismatch");
    CHECK(std::string(e.what()).find("[2,3]") != std::string::npos);
    CHECK(std::string(e.what()).find("[2,2]") != std::string::npos);
  }
}

TEST_CASE("backward on linear map gives broadcast input") {
  // loss = sum(W x): dW[i][j] = x[j]
  auto w = Tensor::param({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  auto x = Tensor::constant({3, 1}, {1.0, 2.0, 3.0});
  auto loss = sum(matmul(w, x));
  backward(loss);
  CHECK(w.grad() == std::vector<double>{1, 2, 3, 1, 2, 3});
}

TEST_CASE("grad of unused parameter stays zero") {
  auto used = Tensor::param({2}, {1.0, 2.0});
  auto unused = Tensor::param({2}, {3.0, 4.0});
  auto loss = sum(mul(used, used));
  backward(loss);
  unused.node()->ensure_grad();
  CHECK(unused.grad() == std::vector<double>{0, 0});
}

TEST_CASE("backward rejects non-scalar loss") {
  auto x = Tensor::param({2}, {1.0, 2.0});
  CHECK_THROWS_AS(backward(mul(x, x)), Error);
}

TEST_CASE("finite differences cover every op") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    auto a = random_param({3, 4}, rng);
    auto b = random_param({4, 2}, rng);
    auto bias = random_param({2}, rng);
    auto c = random_param({3, 2}, rng);
    auto s = random_param({6}, rng);
    auto mats = random_param({3, 8}, rng);  // 3 edges of 2x4 matrices
    auto vecs = random_param({3, 4}, rng);

    auto check = [&](const char* tag, std::vector<Tensor> leaves, std::function<Tensor()> fwd) {
      auto r = grad_check(std::move(leaves), fwd, 1e-5, 1e-4, tag);
      INFO(r.worst);
      CHECK(r.ok);
    };

    check("matmul+add+relu", {a, b, bias}, [&] { return sum(relu(add(matmul(a, b), bias))); });
    check("mul", {a}, [&] { return sum(mul(a, a)); });
    check("scale", {a}, [&] { return sum(scale(a, -2.5)); });
    check("leaky_relu", {a}, [&] { return sum(leaky_relu(a, 0.2)); });
    check("concat_cols", {a, c}, [&] { return sum(concat_cols(a, c)); });
    check("concat_rows", {a, c},
          [&] { return sum(mul(concat_rows({matmul(a, b), c}), concat_rows({matmul(a, b), c}))); });
    check("gather", {a}, [&] { return sum(mul(gather_rows(a, {2, 0, 0}), gather_rows(a, {1, 1, 2}))); });
    check("scatter", {a}, [&] { return sum(mul(scatter_sum(a, {0, 0, 1}, 3), scatter_sum(a, {1, 1, 2}, 3))); });
    check("segment_softmax", {s}, [&] {
      auto soft = segment_softmax(s, {0, 0, 0, 1, 1, 2});
      return sum(mul(soft, s));
    });
    check("scale_rows", {c, s}, [&] {
      auto rows = gather_rows(c, {0, 1, 2, 0, 1, 2});
      return sum(scale_rows(rows, s));
    });
    check("rows_matvec", {mats, vecs}, [&] { return sum(mul(rows_matvec(mats, vecs, 2, 4), rows_matvec(mats, vecs, 2, 4))); });
    check("dropout", {a}, [&] { return sum(dropout(a, 0.4, 99 * seed)); });
    check("cross_entropy", {a}, [&] {
      auto wide = concat_cols(a, scale(a, 0.5));
      return cross_entropy(wide, {0, 3, 7});
    });
  }
}

TEST_CASE("cross_entropy values") {
  // uniform logits over 4 classes -> ln 4
  auto uniform = Tensor::constant({2, 4}, std::vector<double>(8, 0.0));
  CHECK(cross_entropy(uniform, {1, 3}).scalar_value() == Catch::Approx(std::log(4.0)));

  // confident correct prediction -> loss under 1e-3 at margin 20
  auto confident = Tensor::constant({1, 3}, {20.0, 0.0, 0.0});
  CHECK(cross_entropy(confident, {0}).scalar_value() < 1e-3);

  // all rows ignored -> defined as zero
  auto ignored = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(cross_entropy(ignored, {-1, -1}, -1).scalar_value() == 0.0);

  CHECK_THROWS_AS(cross_entropy(uniform, {4, 0}), Error);
}

TEST_CASE("cross_entropy ignores masked rows in the mean") {
  auto logits = Tensor::constant({2, 2}, {0.0, 0.0, 100.0, 0.0});
  // only row 0 counts: ln 2
  CHECK(cross_entropy(logits, {0, -1}, -1).scalar_value() == Catch::Approx(std::log(2.0)));
}

TEST_CASE("dropout preserves expectation and is seed-stable") {
  auto x = Tensor::constant({1000, 1}, std::vector<double>(1000, 1.0));

  auto a = dropout(x, 0.3, 1234);
  auto b = dropout(x, 0.3, 1234);
  CHECK(a.values() == b.values());

  // p = 0 is the identity handle
  auto same = dropout(x, 0.0, 7);
  CHECK(same.node() == x.node());

  double total = 0.0;
  int64_t draws = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto d = dropout(x, 0.3, seed);
    for (double v : d.values()) total += v;
    draws += 1000;
  }
  CHECK(std::abs(total / double(draws) - 1.0) < 0.01);
}

TEST_CASE("adam: zero grads leave parameters unchanged") {
  ParamStore store;
  auto p = store.create("p", {2}, {1.0, -1.0});
  store.ensure_grads();
  adam_step(store, {});
  CHECK(p.values() == std::vector<double>{1.0, -1.0});
}

TEST_CASE("adam: lr zero leaves parameters unchanged") {
  ParamStore store;
  auto p = store.create("p", {1}, {5.0});
  p.node()->ensure_grad();
  p.node()->grad[0] = 3.0;
  AdamConfig cfg;
  cfg.lr = 0.0;
  adam_step(store, cfg);
  CHECK(p.values()[0] == 5.0);
}

TEST_CASE("adam matches the hand-computed recurrence for three steps") {
  // independent recurrence for a single scalar with constant gradient
  const double g = 0.7, lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0, v = 0, x = 1.0;
  std::vector<double> expected;
  for (int t = 1; t <= 3; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    expected.push_back(x);
  }

  ParamStore store;
  auto p = store.create("x", {1}, {1.0});
  AdamConfig cfg;
  cfg.lr = lr;
  for (int t = 0; t < 3; ++t) {
    p.node()->ensure_grad();
    p.node()->grad[0] = g;
    adam_step(store, cfg);
    CHECK(p.values()[0] == Catch::Approx(expected[size_t(t)]).epsilon(1e-12));
  }
}

TEST_CASE("adam throws on missing grad") {
  ParamStore store;
  store.create("p", {2}, {0.0, 0.0});
  CHECK_THROWS_AS(adam_step(store, {}), Error);
}

TEST_CASE("param store round-trips bitwise") {
  Rng rng(5);
  ParamStore store;
  store.create("b", {3}, {rng.uniform(), rng.uniform(), rng.uniform()});
  store.create("a", {2, 2}, {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()});

  auto dir = std::filesystem::temp_directory_path() / "bioee_params_test";
  std::filesystem::create_directories(dir);
  store.save(dir / "params.json", dir / "params.bin");
  ParamStore loaded = ParamStore::load(dir / "params.json", dir / "params.bin");

  CHECK(loaded.get("a").values() == store.get("a").values());
  CHECK(loaded.get("b").values() == store.get("b").values());
  std::filesystem::remove_all(dir);
}
