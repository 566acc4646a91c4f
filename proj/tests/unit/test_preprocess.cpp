#include <cmath>
#include <random>

#include "doctest.h"
#include "gcinfer/compile.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/preprocess.hpp"

using namespace gcinfer;

namespace {

Eigen::MatrixXd random_matrix(size_t r, size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = N(rng);
  return M;
}

Mlp small_net(std::vector<size_t> topo, ActFn hidden, std::mt19937_64& rng) {
  Mlp n;
  for (size_t i = 0; i + 1 < topo.size(); ++i) {
    n.W.push_back(random_matrix(topo[i + 1], topo[i], rng) * 0.5);
    n.b.push_back(random_matrix(topo[i + 1], 1, rng).col(0) * 0.1);
    n.mask.push_back(Eigen::MatrixXd::Ones(topo[i + 1], topo[i]));
    n.bias_on.push_back(1);
    n.act.push_back(i + 2 < topo.size() ? hidden : ActFn::Softmax);
  }
  return n;
}

}  // namespace

TEST_CASE("first sample is always appended and in-span samples are projected") {
  Eigen::MatrixXd A(3, 3);
  A << 1, 2, 0, 0, 0, 0, 0, 0, 1;
  ProjectionConfig cfg;
  cfg.gamma = 0.5;
  auto p = build_projection(A, {0, 0, 1}, cfg);
  CHECK(p.l == 2);  // second column is 2x the first
  CHECK(p.C(0, 0) == doctest::Approx(1.0));
  // D column times its coefficient reproduces the sample exactly
  Eigen::VectorXd rec = p.D.col(0) * p.C(0, 0);
  CHECK((rec - A.col(0)).norm() == 0.0);
  CHECK(p.epsilon < 1e-12);
}

TEST_CASE("rank-5 synthetic data needs few dictionary columns") {
  auto d = synthetic_low_rank(20, 200, 5, 1e-3, 61);
  ProjectionConfig cfg;
  cfg.gamma = 0.3;
  auto p = build_projection(d.X, d.y, cfg);
  MESSAGE("l = " << p.l << ", epsilon = " << p.epsilon);
  CHECK(p.l <= 7);
  CHECK(p.epsilon <= 0.3);
  CHECK(verify_projector(p.W, p.D).ok());
}

TEST_CASE("smaller gamma never gives a larger reconstruction error") {
  auto d = synthetic_low_rank(30, 300, 8, 0.05, 62);
  double prev = -1;
  for (double g : {0.6, 0.4, 0.2}) {
    ProjectionConfig cfg;
    cfg.gamma = g;
    auto p = build_projection(d.X, d.y, cfg);
    if (prev >= 0) CHECK(p.epsilon <= prev + 1e-12);
    prev = p.epsilon;
  }
}

TEST_CASE("zero-norm samples are skipped") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 3);
  A(0, 1) = 1;
  auto p = build_projection(A, {0, 1, 0}, {});
  CHECK(p.skipped == 2);
  CHECK(p.l == 1);
}

TEST_CASE("projector algebra on random dictionaries") {
  std::mt19937_64 rng(63);
  for (int t = 0; t < 100; ++t) {
    size_t m = 2 + rng() % 49, l = 1 + rng() % m;
    auto D = random_matrix(m, l, rng);
    auto W = projector_from_dictionary(D);
    auto r = verify_projector(W, D);
    INFO("m=" << m << " l=" << l);
    REQUIRE(r.ok());
    CHECK(r.rank_W == l);
    Eigen::VectorXd x = random_matrix(m, 1, rng).col(0);
    CHECK((project(project(x, W), W) - project(x, W)).norm() <= 1e-9 * x.norm());
    Eigen::VectorXd in = D * random_matrix(l, 1, rng).col(0);
    CHECK((project(in, W) - in).norm() <= 1e-9 * in.norm());
    if (l < m) {
      Eigen::VectorXd perp = x - project(x, W);
      CHECK(project(perp, W).norm() <= 1e-9 * x.norm());
    }
  }
  auto I = Eigen::MatrixXd::Identity(6, 6);
  auto ri = verify_projector(I, I);
  CHECK(ri.ok());
  CHECK(ri.rank_W == 6);
  auto D = random_matrix(10, 3, rng);
  Eigen::MatrixXd noisy = projector_from_dictionary(D) + 1e-3 * random_matrix(10, 10, rng);
  auto bad = verify_projector(noisy, D);
  CHECK_FALSE(bad.ok());
  CHECK(bad.idempotency > 1e-9);
  CHECK_THROWS_AS(project(Eigen::VectorXd::Ones(3), I), Error);
}

TEST_CASE("magnitude pruning masks the expected counts") {
  auto m = make_fc_model({10, 7, 3}, parse_activation("relu"), 64);
  auto none = magnitude_prune_threshold(m, 0.0);
  for (auto& mk : none.masks)
    for (auto v : mk) CHECK(v == 1);
  auto half = magnitude_prune_fraction(m, 0.5);
  size_t masked0 = 0, masked1 = 0;
  for (auto v : half.masks[0]) masked0 += v == 0;
  for (auto v : half.masks[2]) masked1 += v == 0;
  CHECK(masked0 == 35);
  CHECK(masked1 == 11);  // ceil(21 / 2)
  CHECK(half.masks[1].empty());
  // kept weights are never smaller than masked ones
  double max_masked = 0, min_kept = 1e9;
  for (size_t k = 0; k < 70; ++k) {
    double a = std::abs(decode(m.layers[0].weights[k]));
    if (half.masks[0][k]) min_kept = std::min(min_kept, a);
    else max_masked = std::max(max_masked, a);
  }
  CHECK(max_masked <= min_kept);
  auto d = compile_stats(m, CompileMode::Unrolled);
  auto s = compile_stats(half.model, CompileMode::Unrolled);
  CHECK(double(s.nonxor_count) <= double(d.nonxor_count) * (1 - 0.5 * 0.9) + 1);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(65);
  for (ActFn hidden : {ActFn::Tanh, ActFn::Sigmoid}) {
    auto net = small_net({4, 3, 2}, hidden, rng);
    auto X = random_matrix(4, 5, rng);
    std::vector<int> y = {0, 1, 1, 0, 1};
    auto g = mlp_gradients(net, X, y);
    const double h = 1e-5;
    double worst = 0;
    for (size_t l = 0; l < net.W.size(); ++l) {
      for (Eigen::Index k = 0; k < net.W[l].size(); ++k) {
        auto p = net, q = net;
        p.W[l].data()[k] += h, q.W[l].data()[k] -= h;
        double fd = (mlp_loss(p, X, y) - mlp_loss(q, X, y)) / (2 * h), an = g.W[l].data()[k];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}));
      }
      for (Eigen::Index k = 0; k < net.b[l].size(); ++k) {
        auto p = net, q = net;
        p.b[l][k] += h, q.b[l][k] -= h;
        double fd = (mlp_loss(p, X, y) - mlp_loss(q, X, y)) / (2 * h), an = g.b[l][k];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}));
      }
    }
    MESSAGE("worst relative gradient error " << worst);
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged and separable data trains") {
  std::mt19937_64 rng(66);
  auto net = small_net({2, 4, 2}, ActFn::Tanh, rng);
  Dataset d;
  d.X.resize(2, 400);
  std::normal_distribution<double> N(0, 0.3);
  for (int i = 0; i < 400; ++i) {
    int c = i % 2;
    d.X(0, i) = (c ? 1.5 : -1.5) + N(rng), d.X(1, i) = N(rng);
    d.y.push_back(c);
  }
  auto before = net;
  mlp_train_epoch(net, d.X, d.y, 0.0, 16, rng);
  CHECK(net.W[0] == before.W[0]);
  CHECK(net.b[1] == before.b[1]);
  MlpTrainer tr(net, d.X, d.y, 0.1);
  for (int b = 0; b < 200; ++b) {
    std::vector<int> idx(16);
    Eigen::MatrixXd Xb(2, 16);
    std::vector<int> yb(16);
    for (int k = 0; k < 16; ++k) {
      int i = int(rng() % 400);
      Xb.col(k) = d.X.col(i), yb[k] = d.y[i];
    }
    tr.update(Xb, yb);
  }
  CHECK(tr.validation_error() <= 0.05);
}

TEST_CASE("pruned weights stay zero through retraining and export") {
  std::mt19937_64 rng(67);
  auto d = synthetic_two_class(8, 200, 68);
  auto m = make_fc_model({8, 6, 2}, parse_activation("tanh:pl"), 69, 1.0, true);
  auto pr = magnitude_prune_fraction(m, 0.5);
  auto net = mlp_from_model(pr.model);
  for (int e = 0; e < 3; ++e) mlp_train_epoch(net, d.X, d.y, 0.05, 16, rng);
  auto out = mlp_to_model(net, pr.model);
  for (size_t k = 0; k < out.layers[0].weights.size(); ++k)
    if (!pr.masks[0][k]) CHECK(out.layers[0].weights[k].raw == 0);
  CHECK(out.layers[0].mask == pr.masks[0]);
  CHECK(fixed_error_rate(out, d.X, d.y) <= 0.5);
}

TEST_CASE("projection json round trip") {
  auto d = synthetic_low_rank(6, 30, 2, 1e-3, 70);
  ProjectionConfig cfg;
  auto p = build_projection(d.X, d.y, cfg);
  auto back = projection_from_json(projection_to_json(p, cfg));
  CHECK(back.l == p.l);
  CHECK((back.W - p.W).norm() == 0.0);
  CHECK((back.D - p.D).norm() == 0.0);
}
