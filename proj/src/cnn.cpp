#include "lrptext/cnn.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"
#include "lrptext/rng.hpp"

namespace lrptext {

namespace {

constexpr char kCnnMagic[8] = {'L', 'R', 'P', 'T', 'C', 'N', 'N', '\0'};
constexpr std::uint32_t kCnnVersion = 1;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const double mx = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - mx).exp().matrix();
  return e / e.sum();
}

// Convolution pre-activations, F x (L-H+1).
Eigen::MatrixXd convolve(const CnnModel& model, const Eigen::MatrixXd& input) {
  const std::size_t H = model.hyper.width;
  const Eigen::Index positions = input.cols() - idx(H) + 1;
  Eigen::MatrixXd pre = model.conv_bias.replicate(1, positions);
  for (std::size_t tau = 0; tau < H; ++tau) {
    pre.noalias() += model.conv_weights[tau] * input.middleCols(idx(H - 1 - tau), positions);
  }
  return pre;
}

void check_input(const CnnModel& model, const Eigen::MatrixXd& input) {
  if (static_cast<std::size_t>(input.rows()) != model.hyper.dim) {
    throw ConfigError("input dimension " + std::to_string(input.rows()) +
                      " does not match model dimension " + std::to_string(model.hyper.dim));
  }
  if (static_cast<std::size_t>(input.cols()) < model.hyper.width) {
    throw ConfigError("document length " + std::to_string(input.cols()) +
                      " is shorter than the filter width " + std::to_string(model.hyper.width));
  }
}

}  // namespace

CnnModel CnnModel::zeros(const CnnHyper& hyper) {
  if (hyper.dim == 0 || hyper.filters == 0 || hyper.width == 0 || hyper.classes == 0) {
    throw ConfigError("CNN hyperparameters must all be positive");
  }
  CnnModel m;
  m.hyper = hyper;
  m.conv_weights.assign(hyper.width, Eigen::MatrixXd::Zero(idx(hyper.filters), idx(hyper.dim)));
  m.conv_bias = Eigen::VectorXd::Zero(idx(hyper.filters));
  m.out_weights = Eigen::MatrixXd::Zero(idx(hyper.filters), idx(hyper.classes));
  m.out_bias = Eigen::VectorXd::Zero(idx(hyper.classes));
  return m;
}

CnnModel CnnModel::random(const CnnHyper& hyper, std::uint64_t seed) {
  CnnModel m = zeros(hyper);
  Rng rng(seed);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(hyper.dim * hyper.width));
  for (auto& w : m.conv_weights) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-a1, a1);
    }
  }
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hyper.filters));
  for (Eigen::Index c = 0; c < m.out_weights.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.out_weights.rows(); ++r) m.out_weights(r, c) = rng.uniform(-a2, a2);
  }
  return m;
}

void CnnModel::validate() const {
  const auto F = idx(hyper.filters), D = idx(hyper.dim), C = idx(hyper.classes);
  bool ok = conv_weights.size() == hyper.width && conv_bias.size() == F &&
            out_weights.rows() == F && out_weights.cols() == C && out_bias.size() == C;
  for (const auto& w : conv_weights) ok = ok && w.rows() == F && w.cols() == D;
  if (!ok) throw ConfigError("CNN parameter shapes do not match its hyperparameters");
  bool finite = conv_bias.allFinite() && out_weights.allFinite() && out_bias.allFinite();
  for (const auto& w : conv_weights) finite = finite && w.allFinite();
  if (!finite) throw ConfigError("CNN parameters contain non-finite values");
}

std::uint64_t CnnModel::fingerprint() const {
  auto mix = [](const Eigen::MatrixXd& m, std::uint64_t h) {
    return io::hash_doubles(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())), h);
  };
  std::uint64_t h = io::fnv1a("cnn");
  const double dims[4] = {static_cast<double>(hyper.dim), static_cast<double>(hyper.filters),
                          static_cast<double>(hyper.width), static_cast<double>(hyper.classes)};
  h = io::hash_doubles(dims, h);
  for (const auto& w : conv_weights) h = mix(w, h);
  h = mix(conv_bias, h);
  h = mix(out_weights, h);
  return mix(out_bias, h);
}

ForwardTrace forward(const CnnModel& model, const Eigen::MatrixXd& input) {
  check_input(model, input);
  ForwardTrace tr;
  tr.input = input;
  tr.conv_pre = convolve(model, input);
  tr.conv = tr.conv_pre.cwiseMax(0.0);
  const auto F = tr.conv.rows();
  tr.pooled.resize(F);
  tr.argmax.resize(static_cast<std::size_t>(F));
  for (Eigen::Index j = 0; j < F; ++j) {
    Eigen::Index best = 0;
    double v = tr.conv(j, 0);
    for (Eigen::Index s = 1; s < tr.conv.cols(); ++s) {
      if (tr.conv(j, s) > v) {
        v = tr.conv(j, s);
        best = s;
      }
    }
    tr.pooled(j) = v;
    tr.argmax[static_cast<std::size_t>(j)] = static_cast<std::size_t>(best);
  }
  tr.scores = model.out_weights.transpose() * tr.pooled + model.out_bias;
  tr.probs = softmax(tr.scores);
  tr.model_fingerprint = model.fingerprint();
  return tr;
}

std::size_t argmax_lowest(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(idx(best))) best = static_cast<std::size_t>(k);
  }
  return best;
}

Prediction predict(const CnnModel& model, const Eigen::MatrixXd& input) {
  check_input(model, input);
  const Eigen::MatrixXd conv = convolve(model, input).cwiseMax(0.0);
  const Eigen::VectorXd pooled = conv.rowwise().maxCoeff();
  Prediction p;
  p.scores = model.out_weights.transpose() * pooled + model.out_bias;
  p.label = argmax_lowest(p.scores);
  return p;
}

CnnGradients CnnGradients::zeros_like(const CnnModel& model) {
  CnnGradients g;
  g.conv_weights.assign(model.conv_weights.size(),
                        Eigen::MatrixXd::Zero(idx(model.hyper.filters), idx(model.hyper.dim)));
  g.conv_bias = Eigen::VectorXd::Zero(model.conv_bias.size());
  g.out_weights = Eigen::MatrixXd::Zero(model.out_weights.rows(), model.out_weights.cols());
  g.out_bias = Eigen::VectorXd::Zero(model.out_bias.size());
  return g;
}

double cross_entropy_gradient(const CnnModel& model, const Eigen::MatrixXd& input, std::size_t label,
                              CnnGradients& grad, const Eigen::VectorXd* dropout_scale,
                              std::size_t* predicted) {
  check_input(model, input);
  const std::size_t H = model.hyper.width;
  const Eigen::MatrixXd pre = convolve(model, input);
  const auto F = pre.rows();
  Eigen::VectorXd pooled(F);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(F));
  for (Eigen::Index j = 0; j < F; ++j) {
    Eigen::Index best = 0;
    double v = std::max(pre(j, 0), 0.0);
    for (Eigen::Index s = 1; s < pre.cols(); ++s) {
      const double a = std::max(pre(j, s), 0.0);
      if (a > v) {
        v = a;
        best = s;
      }
    }
    pooled(j) = v;
    arg[static_cast<std::size_t>(j)] = best;
  }
  const Eigen::VectorXd features =
      dropout_scale ? Eigen::VectorXd(pooled.cwiseProduct(*dropout_scale)) : pooled;
  const Eigen::VectorXd scores = model.out_weights.transpose() * features + model.out_bias;
  const double mx = scores.maxCoeff();
  const double lse = mx + std::log((scores.array() - mx).exp().sum());
  const double loss = lse - scores(idx(label));
  if (predicted) *predicted = argmax_lowest(scores);

  Eigen::VectorXd dscores = (scores.array() - lse).exp().matrix();
  dscores(idx(label)) -= 1.0;
  grad.out_weights.noalias() += features * dscores.transpose();
  grad.out_bias += dscores;
  Eigen::VectorXd dpooled = model.out_weights * dscores;
  if (dropout_scale) dpooled = dpooled.cwiseProduct(*dropout_scale);
  for (Eigen::Index j = 0; j < F; ++j) {
    const Eigen::Index s = arg[static_cast<std::size_t>(j)];
    if (!(pre(j, s) > 0.0)) continue;
    const double g = dpooled(j);
    grad.conv_bias(j) += g;
    for (std::size_t tau = 0; tau < H; ++tau) {
      grad.conv_weights[tau].row(j) += g * input.col(s + idx(H - 1 - tau)).transpose();
    }
  }
  return loss;
}

InMemoryInputs::InMemoryInputs(std::vector<Eigen::MatrixXd> inputs, std::vector<std::size_t> labels)
    : inputs_(std::move(inputs)), labels_(std::move(labels)) {
  if (inputs_.size() != labels_.size()) throw ConfigError("inputs and labels differ in count");
}

double accuracy(const CnnModel& model, const InputSource& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(model, data.input(i)).label == data.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

CnnTrainResult train_cnn(const InputSource& train, const InputSource& val, const CnnHyper& hyper,
                         const CnnTrainOptions& options) {
  if (options.batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(options.dropout >= 0.0 && options.dropout < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  if (train.size() == 0 && options.epochs > 0) throw ConfigError("no training documents");
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.label(i) >= hyper.classes) throw ConfigError("training label out of range");
  }

  Rng rng(options.seed);
  CnnModel model = CnnModel::random(hyper, rng.next_u64());
  CnnTrainResult result;
  result.model = model;
  double best_val = val.size() > 0 ? accuracy(model, val) : -1.0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double keep = 1.0 - options.dropout;
  Eigen::VectorXd scale(idx(hyper.filters));

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      CnnGradients grad = CnnGradients::zeros_like(model);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        for (Eigen::Index j = 0; j < scale.size(); ++j) {
          scale(j) = (options.dropout == 0.0 || rng.uniform() < keep) ? 1.0 / keep : 0.0;
        }
        std::size_t predicted = 0;
        batch_loss += cross_entropy_gradient(model, train.input(i), train.label(i), grad, &scale, &predicted);
        if (predicted == train.label(i)) ++correct;
      }
      const double n = static_cast<double>(end - start);
      double penalty = model.out_weights.squaredNorm();
      for (const auto& w : model.conv_weights) penalty += w.squaredNorm();
      const double objective = batch_loss / n + 0.5 * options.l2 * penalty;
      if (!std::isfinite(objective)) {
        std::ostringstream msg;
        msg << "training loss became non-finite (epoch " << epoch << ", batch " << batches
            << ", learning rate " << options.learning_rate << "); lower the learning rate";
        throw NumericError(msg.str());
      }
      loss_sum += objective;
      ++batches;
      const double lr = options.learning_rate;
      for (std::size_t tau = 0; tau < hyper.width; ++tau) {
        model.conv_weights[tau] -= lr * (grad.conv_weights[tau] / n + options.l2 * model.conv_weights[tau]);
      }
      model.conv_bias -= lr * grad.conv_bias / n;
      model.out_weights -= lr * (grad.out_weights / n + options.l2 * model.out_weights);
      model.out_bias -= lr * grad.out_bias / n;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    entry.train_accuracy =
        order.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(order.size());
    entry.val_accuracy = val.size() > 0 ? accuracy(model, val) : 0.0;
    result.log.push_back(entry);
    // Without a validation set the last epoch wins.
    if (val.size() == 0 || entry.val_accuracy > best_val) {
      best_val = entry.val_accuracy;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::string serialize_cnn(const CnnModel& model) {
  model.validate();
  std::ostringstream out(std::ios::binary);
  out.write(kCnnMagic, sizeof(kCnnMagic));
  io::write_u32(out, kCnnVersion);
  io::write_u32(out, static_cast<std::uint32_t>(model.hyper.dim));
  io::write_u32(out, static_cast<std::uint32_t>(model.hyper.filters));
  io::write_u32(out, static_cast<std::uint32_t>(model.hyper.width));
  io::write_u32(out, static_cast<std::uint32_t>(model.hyper.classes));
  for (const auto& w : model.conv_weights) {
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      for (Eigen::Index i = 0; i < w.cols(); ++i) io::write_f64(out, w(j, i));
    }
  }
  for (Eigen::Index j = 0; j < model.conv_bias.size(); ++j) io::write_f64(out, model.conv_bias(j));
  for (Eigen::Index j = 0; j < model.out_weights.rows(); ++j) {
    for (Eigen::Index k = 0; k < model.out_weights.cols(); ++k) io::write_f64(out, model.out_weights(j, k));
  }
  for (Eigen::Index k = 0; k < model.out_bias.size(); ++k) io::write_f64(out, model.out_bias(k));
  return out.str();
}

CnnModel deserialize_cnn(std::string_view bytes) {
  std::istringstream in{std::string(bytes), std::ios::binary};
  char magic[8];
  if (!in.read(magic, 8) || std::string_view(magic, 8) != std::string_view(kCnnMagic, 8)) {
    throw DataError("not a CNN checkpoint");
  }
  const auto version = io::read_u32(in, "version");
  if (version != kCnnVersion) {
    throw DataError("CNN checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCnnVersion) + ")");
  }
  CnnHyper hyper;
  hyper.dim = io::read_u32(in, "dim");
  hyper.filters = io::read_u32(in, "filters");
  hyper.width = io::read_u32(in, "width");
  hyper.classes = io::read_u32(in, "classes");
  CnnModel m = CnnModel::zeros(hyper);
  for (auto& w : m.conv_weights) {
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      for (Eigen::Index i = 0; i < w.cols(); ++i) w(j, i) = io::read_f64(in, "conv weights");
    }
  }
  for (Eigen::Index j = 0; j < m.conv_bias.size(); ++j) m.conv_bias(j) = io::read_f64(in, "conv bias");
  for (Eigen::Index j = 0; j < m.out_weights.rows(); ++j) {
    for (Eigen::Index k = 0; k < m.out_weights.cols(); ++k) m.out_weights(j, k) = io::read_f64(in, "output weights");
  }
  for (Eigen::Index k = 0; k < m.out_bias.size(); ++k) m.out_bias(k) = io::read_f64(in, "output bias");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in CNN checkpoint");
  m.validate();
  return m;
}

void save_cnn(const CnnModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_cnn(model));
}

CnnModel load_cnn(const std::filesystem::path& path) {
  try {
    return deserialize_cnn(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace lrptext
