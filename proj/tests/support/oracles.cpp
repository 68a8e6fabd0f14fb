#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace oracle {

NaiveForward forward(const lrptext::CnnModel& m, const Eigen::MatrixXd& x) {
  const std::size_t D = m.hyper.dim, F = m.hyper.filters, H = m.hyper.width, C = m.hyper.classes;
  const std::size_t L = static_cast<std::size_t>(x.cols());
  const std::size_t S = L - H + 1;
  NaiveForward r;
  r.pre.assign(F, std::vector<double>(S, 0.0));
  r.conv = r.pre;
  r.pooled.assign(F, 0.0);
  r.argmax.assign(F, 0);
  for (std::size_t j = 0; j < F; ++j) {
    for (std::size_t s = 0; s < S; ++s) {
      double z = m.conv_bias(j);
      for (std::size_t tau = 0; tau < H; ++tau) {
        for (std::size_t i = 0; i < D; ++i) z += x(i, s + H - 1 - tau) * m.conv_weights[tau](j, i);
      }
      r.pre[j][s] = z;
      r.conv[j][s] = z > 0 ? z : 0.0;
    }
    for (std::size_t s = 0; s < S; ++s) {
      if (s == 0 || r.conv[j][s] > r.pooled[j]) {
        r.pooled[j] = r.conv[j][s];
        r.argmax[j] = s;
      }
    }
  }
  r.scores.assign(C, 0.0);
  for (std::size_t k = 0; k < C; ++k) {
    double z = m.out_bias(k);
    for (std::size_t j = 0; j < F; ++j) z += r.pooled[j] * m.out_weights(j, k);
    r.scores[k] = z;
  }
  return r;
}

namespace {

struct Message {
  std::size_t lower_a, lower_b;  // lower neuron coordinates
  double value;
};

}  // namespace

LrpMessages lrp_enumerate(const lrptext::CnnModel& m, const Eigen::MatrixXd& x, std::size_t target, double eps) {
  const std::size_t D = m.hyper.dim, F = m.hyper.filters, H = m.hyper.width, C = m.hyper.classes;
  const std::size_t L = static_cast<std::size_t>(x.cols());
  const std::size_t S = L - H + 1;
  const NaiveForward fw = oracle::forward(m, x);

  LrpMessages out;
  out.output.assign(C, 0.0);
  out.output[target] = fw.scores[target];

  // Fully connected layer.
  std::vector<Message> fc;
  for (std::size_t k = 0; k < C; ++k) {
    const double sign = fw.scores[k] >= 0 ? 1.0 : -1.0;
    std::vector<double> z(F);
    double denom = 0.0;
    for (std::size_t j = 0; j < F; ++j) {
      z[j] = fw.pooled[j] * m.out_weights(j, k) + (m.out_bias(k) + eps * sign) / static_cast<double>(F);
      denom += z[j];
    }
    if (denom == 0.0) continue;
    for (std::size_t j = 0; j < F; ++j) fc.push_back({j, 0, z[j] / denom * out.output[k]});
  }
  out.pooled.assign(F, 0.0);
  for (const auto& msg : fc) out.pooled[msg.lower_a] += msg.value;

  // Max pooling: one message per feature map.
  std::vector<Message> pool;
  for (std::size_t j = 0; j < F; ++j) pool.push_back({j, fw.argmax[j], out.pooled[j]});
  out.conv.assign(F, std::vector<double>(S, 0.0));
  for (const auto& msg : pool) out.conv[msg.lower_a][msg.lower_b] += msg.value;

  // Convolution: messages from (j, s) to (i, s + H - 1 - tau).
  std::vector<Message> conv;
  for (std::size_t j = 0; j < F; ++j) {
    for (std::size_t s = 0; s < S; ++s) {
      const double sign = fw.conv[j][s] > 0 ? 1.0 : -1.0;
      std::vector<Message> local;
      double denom = 0.0;
      for (std::size_t tau = 0; tau < H; ++tau) {
        for (std::size_t i = 0; i < D; ++i) {
          const std::size_t t = s + H - 1 - tau;
          const double z = x(i, t) * m.conv_weights[tau](j, i) +
                           (m.conv_bias(j) + eps * sign) / static_cast<double>(H * D);
          local.push_back({i, t, z});
          denom += z;
        }
      }
      if (denom == 0.0) continue;
      for (auto& msg : local) {
        msg.value = msg.value / denom * out.conv[j][s];
        conv.push_back(msg);
      }
    }
  }
  out.input = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(L));
  for (const auto& msg : conv) out.input(msg.lower_a, msg.lower_b) += msg.value;
  out.messages = fc.size() + pool.size() + conv.size();
  return out;
}

Eigen::MatrixXd finite_difference(const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& at,
                                  double h) {
  Eigen::MatrixXd g(at.rows(), at.cols());
  Eigen::MatrixXd p = at;
  for (Eigen::Index c = 0; c < at.cols(); ++c) {
    for (Eigen::Index r = 0; r < at.rows(); ++r) {
      const double orig = p(r, c);
      p(r, c) = orig + h;
      const double up = f(p);
      p(r, c) = orig - h;
      const double down = f(p);
      p(r, c) = orig;
      g(r, c) = (up - down) / (2 * h);
    }
  }
  return g;
}

void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  values.resize(n);
  vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
}

std::vector<double> knn_accuracy(const std::vector<Eigen::VectorXd>& points, const std::vector<std::size_t>& labels,
                                 const std::vector<std::size_t>& queries, const std::vector<std::size_t>& neighbors,
                                 const std::vector<std::size_t>& ks) {
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> acc(ks.size(), 0.0);
  for (std::size_t q : queries) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t n : neighbors) {
      double d = 0.0;
      for (Eigen::Index i = 0; i < points[q].size(); ++i) {
        const double diff = points[q](i) - points[n](i);
        d += diff * diff;
      }
      all.push_back({d, n});
    }
    std::sort(all.begin(), all.end());
    for (std::size_t a = 0; a < ks.size(); ++a) {
      std::vector<std::size_t> votes(classes, 0);
      for (std::size_t r = 0; r < ks[a]; ++r) ++votes[labels[all[r].second]];
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c) {
        if (votes[c] > votes[best]) best = c;
      }
      if (best == labels[q]) acc[a] += 1.0;
    }
  }
  for (double& v : acc) v /= static_cast<double>(queries.size());
  return acc;
}

BinarySvm svm_dual_fista(const Eigen::MatrixXd& x, const std::vector<int>& y, double c, double bias_feature,
                         int iterations) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd xa(n, x.cols() + 1);
  xa << x, Eigen::VectorXd::Constant(n, bias_feature);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd q = (yv.asDiagonal() * xa) * (yv.asDiagonal() * xa).transpose();
  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n), prev = alpha, mom = alpha;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = q * mom - Eigen::VectorXd::Ones(n);
    prev = alpha;
    alpha = (mom - grad / lip).cwiseMax(0.0).cwiseMin(c);
    const double t_next = (1 + std::sqrt(1 + 4 * t * t)) / 2;
    mom = alpha + (t - 1) / t_next * (alpha - prev);
    t = t_next;
  }
  const Eigen::VectorXd wa = xa.transpose() * (alpha.cwiseProduct(yv));
  BinarySvm r;
  r.w = wa.head(x.cols());
  r.b = wa(x.cols()) * bias_feature;
  return r;
}

std::vector<std::pair<std::size_t, double>> tfidf(const std::vector<std::string>& doc,
                                                  const std::vector<std::vector<std::string>>& train) {
  std::set<std::string> words;
  for (const auto& d : train) words.insert(d.begin(), d.end());
  const std::vector<std::string> vocab(words.begin(), words.end());
  std::vector<std::pair<std::size_t, double>> out;
  double sq = 0.0;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    double tf = 0.0;
    for (const auto& t : doc) tf += t == vocab[w] ? 1.0 : 0.0;
    if (tf == 0.0) continue;
    double df = 0.0;
    for (const auto& d : train) df += std::find(d.begin(), d.end(), vocab[w]) != d.end() ? 1.0 : 0.0;
    const double weight = tf * std::log(static_cast<double>(train.size()) / df);
    if (weight == 0.0) continue;
    out.push_back({w, weight});
    sq += weight * weight;
  }
  for (auto& e : out) e.second /= std::sqrt(sq);
  return out;
}

}  // namespace oracle
