#include <cmath>

#include "doctest.h"
#include "lrptext/cnn.hpp"
#include "lrptext/error.hpp"
#include "lrptext/rng.hpp"
#include "support/oracles.hpp"
#include "support/testing.hpp"

using namespace lrptext;

namespace {

CnnModel tiny_model() {
  CnnModel m = CnnModel::zeros({1, 1, 1, 1});
  m.conv_weights[0](0, 0) = 1.0;
  m.out_weights(0, 0) = 0.5;
  m.out_bias(0) = 0.1;
  return m;
}

// Flattened view of every parameter, for finite differences.
Eigen::MatrixXd flatten(const CnnModel& m) {
  std::vector<double> v;
  for (const auto& w : m.conv_weights) v.insert(v.end(), w.data(), w.data() + w.size());
  v.insert(v.end(), m.conv_bias.data(), m.conv_bias.data() + m.conv_bias.size());
  v.insert(v.end(), m.out_weights.data(), m.out_weights.data() + m.out_weights.size());
  v.insert(v.end(), m.out_bias.data(), m.out_bias.data() + m.out_bias.size());
  return Eigen::Map<Eigen::MatrixXd>(v.data(), static_cast<Eigen::Index>(v.size()), 1);
}

Eigen::MatrixXd flatten(const CnnGradients& g) {
  CnnModel m;
  m.conv_weights = g.conv_weights;
  m.conv_bias = g.conv_bias;
  m.out_weights = g.out_weights;
  m.out_bias = g.out_bias;
  return flatten(m);
}

CnnModel unflatten(const CnnModel& shape, const Eigen::MatrixXd& v) {
  CnnModel m = shape;
  Eigen::Index k = 0;
  auto fill = [&](double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = v(k++, 0);
  };
  for (auto& w : m.conv_weights) fill(w.data(), w.size());
  fill(m.conv_bias.data(), m.conv_bias.size());
  fill(m.out_weights.data(), m.out_weights.size());
  fill(m.out_bias.data(), m.out_bias.size());
  return m;
}

// Smallest |pre-activation| and smallest gap between the top two positions
// of any filter; finite differences are only trusted away from kinks.
double kink_margin(const CnnModel& m, const Eigen::MatrixXd& x) {
  const ForwardTrace tr = forward(m, x);
  double margin = tr.conv_pre.cwiseAbs().minCoeff();
  for (Eigen::Index j = 0; j < tr.conv.rows(); ++j) {
    double best = -1, second = -1;
    for (Eigen::Index s = 0; s < tr.conv.cols(); ++s) {
      const double v = tr.conv(j, s);
      if (v > best) {
        second = best;
        best = v;
      } else if (v > second) {
        second = v;
      }
    }
    if (best > 0 && second >= 0) margin = std::min(margin, best - second);
  }
  return margin;
}

}  // namespace

TEST_SUITE("cnn") {

TEST_CASE("hand-computed single-filter example") {
  const CnnModel m = tiny_model();
  Eigen::MatrixXd x(1, 2);
  x << 2.0, -3.0;
  const ForwardTrace tr = forward(m, x);
  CHECK(tr.conv(0, 0) == 2.0);
  CHECK(tr.conv(0, 1) == 0.0);
  CHECK(tr.argmax[0] == 0);
  CHECK(tr.pooled(0) == 2.0);
  CHECK(tr.scores(0) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(predict(m, x).label == 0);
}

TEST_CASE("zero model gives uniform probabilities and class 0") {
  const CnnModel m = CnnModel::zeros({3, 4, 2, 5});
  Rng rng(1);
  const ForwardTrace tr = forward(m, testing::random_matrix(rng, 3, 6));
  for (Eigen::Index c = 0; c < 5; ++c) CHECK(tr.probs(c) == doctest::Approx(0.2));
  CHECK(predict(m, tr.input).label == 0);
}

TEST_CASE("argmax ties go to the lowest index") {
  Eigen::VectorXd v(4);
  v << 1, 3, 3, 2;
  CHECK(argmax_lowest(v) == 1);
}

TEST_CASE("forward matches the naive loop oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const CnnHyper h{1 + rng.below(5), 1 + rng.below(6), 1 + rng.below(3), 2 + rng.below(3)};
    const CnnModel m = testing::random_cnn(rng, h);
    const Eigen::MatrixXd x = testing::random_matrix(rng, static_cast<Eigen::Index>(h.dim),
                                                     static_cast<Eigen::Index>(h.width + rng.below(6)));
    const ForwardTrace tr = forward(m, x);
    const oracle::NaiveForward ref = oracle::forward(m, x);
    for (std::size_t j = 0; j < h.filters; ++j) {
      CHECK(tr.pooled(static_cast<Eigen::Index>(j)) == doctest::Approx(ref.pooled[j]).epsilon(1e-12));
      CHECK(tr.argmax[j] == ref.argmax[j]);
      for (std::size_t s = 0; s < ref.conv[j].size(); ++s) {
        CHECK(tr.conv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) ==
              doctest::Approx(ref.conv[j][s]).epsilon(1e-12));
      }
    }
    for (std::size_t c = 0; c < h.classes; ++c) {
      CHECK(tr.scores(static_cast<Eigen::Index>(c)) == doctest::Approx(ref.scores[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("bad inputs are rejected") {
  const CnnModel m = CnnModel::zeros({3, 2, 3, 2});
  CHECK_THROWS_AS(forward(m, Eigen::MatrixXd::Zero(3, 2)), ConfigError);
  CHECK_THROWS_AS(forward(m, Eigen::MatrixXd::Zero(4, 5)), ConfigError);
  CnnModel bad = m;
  bad.out_bias(0) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("single-word filters ignore word order") {
  Rng rng(9);
  const CnnModel m = testing::random_cnn(rng, {4, 5, 1, 3});
  Eigen::MatrixXd x = testing::random_matrix(rng, 4, 7);
  const Eigen::VectorXd before = forward(m, x).scores;
  Eigen::MatrixXd y = x;
  y.col(0).swap(y.col(6));
  y.col(2).swap(y.col(3));
  const Eigen::VectorXd after = forward(m, y).scores;
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a window scored at one position scores the same elsewhere") {
  Rng rng(10);
  const CnnModel m = testing::random_cnn(rng, {3, 2, 2, 2});
  const Eigen::MatrixXd window = testing::random_matrix(rng, 3, 2);
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 6, -50.0);
  Eigen::MatrixXd b = a;
  a.middleCols(0, 2) = window;
  b.middleCols(4, 2) = window;
  const ForwardTrace ta = forward(m, a), tb = forward(m, b);
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(ta.conv(j, 0) == doctest::Approx(tb.conv(j, 4)));
  }
}

TEST_CASE("cross-entropy gradient matches finite differences away from kinks") {
  Rng rng(11);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 15; ++trial) {
    const CnnHyper h{3, 4, 1 + rng.below(3), 3};
    const CnnModel m = testing::random_cnn(rng, h, 0.5);
    const Eigen::MatrixXd x = testing::random_matrix(rng, 3, 6);
    if (kink_margin(m, x) < 1e-3) continue;
    const std::size_t label = rng.below(3);
    CnnGradients g = CnnGradients::zeros_like(m);
    cross_entropy_gradient(m, x, label, g);
    const Eigen::MatrixXd fd = oracle::finite_difference(
        [&](const Eigen::MatrixXd& p) {
          CnnGradients scratch = CnnGradients::zeros_like(m);
          return cross_entropy_gradient(unflatten(m, p), x, label, scratch);
        },
        flatten(m), 1e-6);
    CHECK(testing::max_relative_error(flatten(g), fd, 1e-3) <= 1e-5);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("training fits a separable toy problem") {
  // Class 0 documents contain a "+" word, class 1 a "-" word among noise.
  Rng rng(12);
  const Eigen::Index D = 4;
  Eigen::VectorXd plus = Eigen::VectorXd::Zero(D), minus = Eigen::VectorXd::Zero(D);
  plus(0) = 2.0;
  minus(1) = 2.0;
  std::vector<Eigen::MatrixXd> xs;
  std::vector<std::size_t> ys;
  for (int i = 0; i < 40; ++i) {
    Eigen::MatrixXd x = testing::random_matrix(rng, D, 6, 0.2);
    const std::size_t y = i % 2;
    x.col(static_cast<Eigen::Index>(rng.below(6))) = y == 0 ? plus : minus;
    xs.push_back(x);
    ys.push_back(y);
  }
  const InMemoryInputs data(xs, ys);
  CnnTrainOptions o;
  o.learning_rate = 0.1;
  o.batch_size = 5;
  o.epochs = 30;
  o.dropout = 0.0;
  o.seed = 3;
  const CnnTrainResult r = train_cnn(data, data, {D, 4, 1, 2}, o);
  CHECK(accuracy(r.model, data) == 1.0);
  CHECK(r.log.size() == 30);

  const CnnTrainResult again = train_cnn(data, data, {D, 4, 1, 2}, o);
  CHECK(serialize_cnn(again.model) == serialize_cnn(r.model));

  o.epochs = 0;
  const CnnTrainResult init = train_cnn(data, data, {D, 4, 1, 2}, o);
  CHECK(init.best_epoch == 0);
  CHECK(serialize_cnn(init.model) == serialize_cnn(CnnModel::random({D, 4, 1, 2}, Rng(3).next_u64())));
}

TEST_CASE("checkpoint round trip and version check") {
  Rng rng(14);
  const CnnModel m = testing::random_cnn(rng, {5, 3, 2, 4});
  testing::TempDir dir("cnn");
  save_cnn(m, dir.path() / "m.bin");
  const CnnModel back = load_cnn(dir.path() / "m.bin");
  CHECK(back.fingerprint() == m.fingerprint());
  Eigen::MatrixXd x = testing::random_matrix(rng, 5, 4);
  CHECK(forward(back, x).scores == forward(m, x).scores);

  std::string bytes = serialize_cnn(m);
  bytes[8] = static_cast<char>(bytes[8] + 1);  // version field follows the magic
  CHECK_THROWS_AS(deserialize_cnn(bytes), DataError);
  CHECK_THROWS_AS(deserialize_cnn(serialize_cnn(m).substr(0, 40)), DataError);
}

}  // TEST_SUITE
