#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lrptext/error.hpp"
#include "lrptext/eval.hpp"
#include "lrptext/rng.hpp"
#include "support/oracles.hpp"
#include "support/testing.hpp"

using namespace lrptext;

namespace {

class MemoryCorpus final : public DeletionCorpus {
 public:
  std::vector<Eigen::MatrixXd> xs;
  std::vector<std::size_t> ys;
  std::vector<std::vector<bool>> known;

  std::size_t size() const override { return xs.size(); }
  Eigen::MatrixXd input(std::size_t i) const override { return xs[i]; }
  std::size_t label(std::size_t i) const override { return ys[i]; }
  std::vector<bool> in_vocabulary(std::size_t i) const override { return known[i]; }
};

SummaryVector dense_summary(const Eigen::VectorXd& v) {
  SummaryVector s;
  s.dense = v;
  s.length = static_cast<std::size_t>(v.size());
  s.normalized = true;
  return s;
}

InputMatrix as_input(const Eigen::MatrixXd& m) {
  InputMatrix x;
  x.values = m;
  return x;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("delete_words examples") {
  Rng rng(1);
  const InputMatrix x = as_input(testing::random_matrix(rng, 3, 5));
  const Eigen::VectorXd gone = Eigen::Vector3d(-0.5, -0.5, -0.5);
  const std::vector<std::size_t> order{3, 1, 4};
  CHECK(delete_words(x, order, 0, gone).values == x.values);

  const InputMatrix two = delete_words(x, order, 2, gone);
  CHECK(two.values.col(3) == gone);
  CHECK(two.values.col(1) == gone);
  CHECK(two.values.col(0) == x.values.col(0));
  CHECK(two.values.col(4) == x.values.col(4));

  const std::vector<std::size_t> first{3}, second{1};
  CHECK(delete_words(delete_words(x, first, 1, gone), second, 1, gone).values == two.values);

  const std::vector<std::size_t> dup{1, 1}, bad{7};
  CHECK_THROWS_AS(delete_words(x, dup, 2, gone), ConfigError);
  CHECK_THROWS_AS(delete_words(x, bad, 1, gone), ConfigError);
  CHECK_THROWS_AS(delete_words(x, order, 4, gone), ConfigError);
}

TEST_CASE("deleted column is the normalized zero embedding") {
  const Eigen::VectorXd c = deleted_column(4, {2.0, 4.0});
  CHECK(c == Eigen::VectorXd::Constant(4, -0.5));
}

TEST_CASE("deleting every word scores like the all-deleted document") {
  Rng rng(2);
  const CnnModel m = testing::random_cnn(rng, {3, 4, 2, 3});
  const InputMatrix x = as_input(testing::random_matrix(rng, 3, 6));
  const Eigen::VectorXd gone = Eigen::Vector3d(0.1, -0.2, 0.3);
  std::vector<std::size_t> order(6);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Eigen::MatrixXd all = gone.replicate(1, 6);
  CHECK(forward(m, delete_words(x, order, 6, gone)).scores == forward(m, all).scores);
}

TEST_CASE("incremental deletion state tracks the direct forward pass") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const CnnHyper h{2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(3), 3};
    const CnnModel m = testing::random_cnn(rng, h);
    const Eigen::Index L = static_cast<Eigen::Index>(h.width + 3 + rng.below(8));
    Eigen::MatrixXd x = testing::random_matrix(rng, static_cast<Eigen::Index>(h.dim), L);
    const Eigen::VectorXd gone = testing::random_matrix(rng, static_cast<Eigen::Index>(h.dim), 1);
    DeletionState state(m, x);
    std::vector<std::size_t> order(static_cast<std::size_t>(L));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t p : order) {
      state.replace(p, gone);
      x.col(static_cast<Eigen::Index>(p)) = gone;
      CHECK((state.scores() - forward(m, x).scores).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(state.predicted() == predict(m, x).label);
    }
  }
}

TEST_CASE("deletion order is stable on ties") {
  const Eigen::VectorXd r = (Eigen::VectorXd(5) << 0.5, 1.0, 0.5, -1.0, 1.0).finished();
  CHECK(deletion_order(r, true) == std::vector<std::size_t>{1, 4, 0, 2, 3});
  CHECK(deletion_order(r, false) == std::vector<std::size_t>{3, 0, 2, 1, 4});
}

TEST_CASE("deletion experiment on a planted-marker model") {
  // Filter j fires on marker dimension j; class 0 needs any marker to beat
  // the class 1 bias, so removing all three markers flips the prediction.
  CnnModel m = CnnModel::zeros({4, 3, 1, 2});
  for (Eigen::Index j = 0; j < 3; ++j) {
    m.conv_weights[0](j, j) = 1.0;
    m.out_weights(j, 0) = 1.0;
  }
  m.out_bias(1) = 0.5;
  MemoryCorpus docs;
  Rng rng(4);
  for (int d = 0; d < 12; ++d) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 20);
    x.row(3) = testing::random_matrix(rng, 1, 20);
    for (Eigen::Index j = 0; j < 3; ++j) x(j, 2 + 5 * j + d % 3) = 1.0 + 0.1 * static_cast<double>(j);
    docs.xs.push_back(x);
    docs.ys.push_back(d % 4 == 0 ? 1 : 0);
    std::vector<bool> known(20, true);
    known[0] = false;
    docs.known.push_back(known);
  }
  DeletionOptions o;
  o.k_max = 6;
  o.min_length = 10;
  const Eigen::VectorXd gone = Eigen::Vector4d::Zero();

  const DeletionCurve lrp = deletion_experiment(m, docs, gone, DeletionSource::kLrp, DeletionProtocol::kDecTrueOnCorrect, o);
  CHECK(lrp.accuracy[0] == 1.0);
  CHECK(lrp.documents == 9);
  CHECK(lrp.accuracy[2] == 1.0);
  CHECK(lrp.accuracy[3] == 0.0);
  for (std::size_t k = 1; k < lrp.accuracy.size(); ++k) CHECK(lrp.accuracy[k] <= lrp.accuracy[k - 1]);

  const DeletionCurve rnd = deletion_experiment(m, docs, gone, DeletionSource::kRandom, DeletionProtocol::kDecTrueOnCorrect, o);
  CHECK(rnd.runs == 10);
  CHECK(rnd.accuracy[0] == 1.0);
  for (std::size_t k = 1; k <= o.k_max; ++k) CHECK(lrp.accuracy[k] <= rnd.accuracy[k]);
  for (double a : rnd.accuracy) CHECK((a >= 0.0 && a <= 1.0));

  const DeletionCurve again = deletion_experiment(m, docs, gone, DeletionSource::kRandom, DeletionProtocol::kDecTrueOnCorrect, o);
  CHECK(again.accuracy == rnd.accuracy);
  CHECK(again.std == rnd.std);

  const DeletionCurve miss = deletion_experiment(m, docs, gone, DeletionSource::kBiasedRandom, DeletionProtocol::kIncTrueOnIncorrect, o);
  CHECK(miss.accuracy[0] == 0.0);

  o.min_length = 21;
  CHECK_THROWS_AS(deletion_experiment(m, docs, gone, DeletionSource::kLrp, DeletionProtocol::kDecTrueOnCorrect, o),
                  DataError);
}

TEST_CASE("protocol subsets split correct and misclassified documents") {
  Rng rng(5);
  const CnnModel m = testing::random_cnn(rng, {3, 3, 1, 2});
  MemoryCorpus docs;
  for (int d = 0; d < 30; ++d) {
    docs.xs.push_back(testing::random_matrix(rng, 3, 4 + static_cast<Eigen::Index>(rng.below(4))));
    docs.ys.push_back(rng.below(2));
    docs.known.emplace_back(10, true);
  }
  const auto a = deletion_subset(m, docs, DeletionProtocol::kDecTrueOnCorrect, 5);
  const auto b = deletion_subset(m, docs, DeletionProtocol::kIncTrueOnIncorrect, 5);
  const auto c = deletion_subset(m, docs, DeletionProtocol::kDecPredOnIncorrect, 5);
  CHECK(b == c);
  std::size_t eligible = 0;
  for (const auto& x : docs.xs) eligible += x.cols() >= 5;
  CHECK(a.size() + b.size() == eligible);
  for (auto i : a) CHECK(predict(m, docs.xs[i]).label == docs.ys[i]);
  for (auto i : b) CHECK(predict(m, docs.xs[i]).label != docs.ys[i]);
}

TEST_CASE("knn matches the all-pairs oracle") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<SummaryVector> s;
    std::vector<Eigen::VectorXd> pts;
    std::vector<std::size_t> labels;
    for (int i = 0; i < 40; ++i) {
      // coarse grid values so distance ties actually occur
      Eigen::VectorXd v = testing::random_matrix(rng, 4, 1).unaryExpr([](double x) { return std::round(2 * x) / 2; });
      pts.push_back(v);
      s.push_back(dense_summary(v));
      labels.push_back(rng.below(3));
    }
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    const std::vector<std::size_t> queries(perm.begin(), perm.begin() + 20), neighbors(perm.begin() + 20, perm.end());
    std::vector<std::size_t> ks(20);
    std::iota(ks.begin(), ks.end(), std::size_t{1});
    const std::vector<double> got = knn_accuracy(s, labels, queries, neighbors, ks);
    const std::vector<double> want = oracle::knn_accuracy(pts, labels, queries, neighbors, ks);
    CHECK(got == want);
  }
}

TEST_CASE("separated clusters give perfect EPI") {
  Rng rng(7);
  std::vector<SummaryVector> s;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd v = testing::random_matrix(rng, 5, 1, 0.01);
    v(i % 2) += 1.0;
    s.push_back(dense_summary(v.normalized()));
    labels.push_back(i % 2);
  }
  EpiOptions o;
  o.k_values = {1, 3, 5, 9};
  const EpiResult r = knn_epi(s, labels, o);
  CHECK(r.epi == 1.0);
  CHECK(r.best_k == 1);
  CHECK(r.accuracy.size() == 4);
  CHECK(r.accuracy[0].size() == 10);
  CHECK(r.n_eval == 30);
  CHECK(knn_epi(s, labels, o) == r);
  CHECK(r.epi == *std::max_element(r.mean.begin(), r.mean.end()));
}

TEST_CASE("EPI errors") {
  std::vector<SummaryVector> one{dense_summary(Eigen::Vector2d(1, 0))};
  const std::vector<std::size_t> l1{0};
  CHECK_THROWS_AS(knn_epi(one, l1, {}), ConfigError);
  std::vector<SummaryVector> four(4, dense_summary(Eigen::Vector2d(1, 0)));
  const std::vector<std::size_t> l4{0, 1, 0, 1};
  EpiOptions o;
  o.k_values = {3};
  CHECK_THROWS_AS(knn_epi(four, l4, o), ConfigError);
}

TEST_CASE("corrected resampled t-test") {
  const std::vector<double> a{0.8, 0.82, 0.79, 0.81, 0.8, 0.83, 0.78, 0.8, 0.81, 0.82};
  const TTestResult same = corrected_resampled_ttest(a, a, 50, 50);
  CHECK(same.indistinguishable);
  CHECK(same.t == 0.0);
  CHECK(!same.significant_05);

  // diff = 0.05 + tiny noise: mean 0.05, sample variance 1e-8.
  std::vector<double> b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] -= 0.05 + (i % 2 == 0 ? 1e-4 : -1e-4);
  const TTestResult big = corrected_resampled_ttest(a, b, 50, 50);
  const double var = 10 * 1e-8 / 9;
  CHECK(big.t == doctest::Approx(0.05 / std::sqrt((0.1 + 1.0) * var)).epsilon(1e-9));
  CHECK(big.significant_05);
  CHECK(big.dof == 9);

  // t at the tabulated two-sided 5% critical value for 9 degrees of freedom.
  std::vector<double> c(10), d(10, 0.0);
  const double crit = 2.262157;
  for (std::size_t i = 0; i < 10; ++i) c[i] = i % 2 == 0 ? 1.0 : -1.0;
  const double sd = std::sqrt(10.0 / 9.0);
  const double shift = crit * std::sqrt(1.1) * sd;
  for (double& x : c) x += shift;
  const TTestResult edge = corrected_resampled_ttest(c, d, 1, 1);
  CHECK(edge.t == doctest::Approx(crit).epsilon(1e-12));
  CHECK(edge.p_value == doctest::Approx(0.05).epsilon(1e-5));

  const std::vector<double> shortl{0.1};
  CHECK_THROWS_AS(corrected_resampled_ttest(shortl, shortl, 1, 1), ConfigError);
}

TEST_CASE("PCA recovers planar data exactly") {
  Rng rng(8);
  const Eigen::MatrixXd basis = testing::random_matrix(rng, 10, 2);
  const Eigen::MatrixXd coeff = testing::random_matrix(rng, 30, 2, 3.0);
  const Eigen::RowVectorXd offset = testing::random_matrix(rng, 1, 10);
  const Eigen::MatrixXd rows = (coeff * basis.transpose()).rowwise() + offset;
  const PcaResult p = pca_project(rows, 2);
  const Eigen::MatrixXd recon = (p.coordinates * p.components.transpose()).rowwise() + p.mean.transpose();
  CHECK((recon - rows).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(p.variances(0) >= p.variances(1));
}

TEST_CASE("PCA output covariance is diagonal and matches a Jacobi oracle") {
  Rng rng(9);
  Eigen::MatrixXd rows = testing::random_matrix(rng, 40, 6);
  rows.col(0) *= 4.0;
  rows.col(3) *= 2.0;
  const PcaResult p = pca_project(rows, 2);
  const Eigen::MatrixXd centered = p.coordinates.rowwise() - p.coordinates.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 39.0;
  CHECK(std::abs(cov(0, 1)) <= 1e-10 * cov(0, 0));
  CHECK(cov(0, 0) >= cov(1, 1));

  const Eigen::MatrixXd xc = rows.rowwise() - rows.colwise().mean();
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  oracle::jacobi_eigen(xc.transpose() * xc / 39.0, values, vectors);
  CHECK(p.variances(0) == doctest::Approx(values(0)).epsilon(1e-10));
  CHECK(p.variances(1) == doctest::Approx(values(1)).epsilon(1e-10));
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = vectors.col(c);
    Eigen::Index top;
    v.cwiseAbs().maxCoeff(&top);
    if (v(top) < 0) v = -v;
    CHECK((v - p.components.col(c)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(p.components.col(c).cwiseAbs().maxCoeff() == p.components.col(c).maxCoeff());
  }
}

TEST_CASE("PCA gives duplicates identical coordinates and rejects low rank") {
  Rng rng(10);
  Eigen::MatrixXd rows = testing::random_matrix(rng, 12, 5);
  rows.row(7) = rows.row(2);
  const PcaResult p = pca_project(rows, 2);
  CHECK(p.coordinates.row(7) == p.coordinates.row(2));

  Eigen::MatrixXd line(6, 3);
  for (int i = 0; i < 6; ++i) line.row(i) = Eigen::RowVector3d(1, 2, 3) * i;
  CHECK_THROWS_AS(pca_project(line, 2), NumericError);
  CHECK_THROWS_AS(pca_project(testing::random_matrix(rng, 2, 5), 2), ConfigError);
}

TEST_CASE("sparse and dense PCA paths agree") {
  Rng rng(11);
  std::vector<SummaryVector> sparse, dense;
  for (int i = 0; i < 15; ++i) {
    SummaryVector s;
    s.space = SummarySpace::kBow;
    s.length = 40;
    for (std::size_t f = 0; f < 40; ++f) {
      if (rng.uniform() < 0.2) s.sparse.emplace_back(f, rng.uniform());
    }
    if (s.sparse.empty()) s.sparse.emplace_back(i, 1.0);
    sparse.push_back(s);
    dense.push_back(dense_summary(s.to_dense()));
  }
  const PcaResult a = pca_project(sparse, 2);
  const PcaResult b = pca_project(dense, 2);
  CHECK((a.coordinates - b.coordinates).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("CSV layouts") {
  DeletionCurve c;
  c.accuracy = {1.0, 0.5};
  c.std = {0.0, 0.25};
  c.documents = 4;
  const std::vector<DeletionCurve> curves{c};
  CHECK(deletion_csv(curves) ==
        "protocol,method,k,accuracy,std,documents,runs\n"
        "dec_true_on_correct,lrp,0,1,0,4,1\n"
        "dec_true_on_correct,lrp,1,0.5,0.25,4,1\n");
  EpiResult e;
  e.k_values = {1, 2};
  e.mean = {0.5, 0.75};
  e.std = {0.1, 0.125};
  const std::vector<std::pair<std::string, EpiResult>> rows{{"lrp_ew", e}};
  CHECK(epi_csv(rows) == "weighting,K,mean,std\nlrp_ew,1,0.5,0.1\nlrp_ew,2,0.75,0.125\n");
  PcaResult p;
  p.coordinates = Eigen::MatrixXd(1, 2);
  p.coordinates << 0.5, -2;
  const std::vector<std::string> ids{"a,b"}, labels{"sci.space"}, groups{"sci"};
  CHECK(pca_csv(p, ids, labels, groups) == "doc_id,x,y,label,group\n\"a,b\",0.5,-2,sci.space,sci\n");
}

}  // TEST_SUITE
