#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lrptext/embeddings.hpp"

namespace lrptext {

struct CnnHyper {
  std::size_t dim = 0;      // D, embedding size
  std::size_t filters = 0;  // F
  std::size_t width = 1;    // H, filter size in words
  std::size_t classes = 0;  // C

  bool operator==(const CnnHyper&) const = default;
};

// One convolution layer with ReLU, max-over-time pooling and a linear output
// layer.
//
// Convolution output position s in [0, L-H] corresponds to the text position
// t = s + H - 1 and reads input columns t - tau for tau in [0, H):
//   conv(j, s) = relu(sum_tau sum_i conv_weights[tau](j, i) * x(i, s + H - 1 - tau) + conv_bias(j))
struct CnnModel {
  CnnHyper hyper;
  std::vector<Eigen::MatrixXd> conv_weights;  // H matrices, each F x D
  Eigen::VectorXd conv_bias;                  // F
  Eigen::MatrixXd out_weights;                // F x C
  Eigen::VectorXd out_bias;                   // C

  static CnnModel zeros(const CnnHyper& hyper);
  // Centered uniform weights scaled by fan-in, zero biases.
  static CnnModel random(const CnnHyper& hyper, std::uint64_t seed);

  // Throws ConfigError on inconsistent shapes or non-finite parameters.
  void validate() const;
  // Hash over hyperparameters and parameter bits.
  std::uint64_t fingerprint() const;
};

struct ForwardTrace {
  Eigen::MatrixXd input;           // D x L
  Eigen::MatrixXd conv_pre;        // F x (L-H+1), before ReLU
  Eigen::MatrixXd conv;            // F x (L-H+1), after ReLU
  Eigen::VectorXd pooled;          // F
  std::vector<std::size_t> argmax; // F, first position attaining the max
  Eigen::VectorXd scores;          // C, unnormalized
  Eigen::VectorXd probs;           // C, softmax of scores
  std::uint64_t model_fingerprint = 0;
};

// Throws ConfigError when the input is shorter than the filter width or its
// dimension differs from the model's.
ForwardTrace forward(const CnnModel& model, const Eigen::MatrixXd& input);
inline ForwardTrace forward(const CnnModel& model, const InputMatrix& input) {
  return forward(model, input.values);
}

struct Prediction {
  std::size_t label = 0;
  Eigen::VectorXd scores;
};

// Argmax of the class scores, ties to the lowest index.
Prediction predict(const CnnModel& model, const Eigen::MatrixXd& input);
std::size_t argmax_lowest(const Eigen::VectorXd& v);

struct CnnGradients {
  std::vector<Eigen::MatrixXd> conv_weights;
  Eigen::VectorXd conv_bias;
  Eigen::MatrixXd out_weights;
  Eigen::VectorXd out_bias;

  static CnnGradients zeros_like(const CnnModel& model);
};

// Cross-entropy -log p_label of one document; adds the parameter gradients to
// `grad`. `dropout_scale` (length F) multiplies the pooled features when given.
// Max pooling routes the gradient to the argmax position; the ReLU derivative
// at exactly zero is taken as 0. `predicted` receives the argmax of the
// (dropout-perturbed) scores.
double cross_entropy_gradient(const CnnModel& model, const Eigen::MatrixXd& input, std::size_t label,
                              CnnGradients& grad, const Eigen::VectorXd* dropout_scale = nullptr,
                              std::size_t* predicted = nullptr);

// Labeled training inputs, materialized on demand.
class InputSource {
 public:
  virtual ~InputSource() = default;
  virtual std::size_t size() const = 0;
  virtual Eigen::MatrixXd input(std::size_t i) const = 0;
  virtual std::size_t label(std::size_t i) const = 0;
};

class InMemoryInputs final : public InputSource {
 public:
  InMemoryInputs(std::vector<Eigen::MatrixXd> inputs, std::vector<std::size_t> labels);
  std::size_t size() const override { return inputs_.size(); }
  Eigen::MatrixXd input(std::size_t i) const override { return inputs_[i]; }
  std::size_t label(std::size_t i) const override { return labels_[i]; }

 private:
  std::vector<Eigen::MatrixXd> inputs_;
  std::vector<std::size_t> labels_;
};

struct CnnTrainOptions {
  double learning_rate = 0.01;
  std::size_t batch_size = 50;
  std::size_t epochs = 10;
  double l2 = 1e-4;       // weight decay on conv and output weights
  double dropout = 0.5;   // on pooled features, training only
  std::uint64_t seed = 1;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean regularized mini-batch objective
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct CnnTrainResult {
  CnnModel model;  // parameters of the epoch with the best validation accuracy
  std::size_t best_epoch = 0;  // 0 = initialization
  std::vector<EpochLog> log;
};

// Mini-batch SGD on mean cross-entropy plus (l2/2)||w||^2. Throws NumericError
// when the loss becomes non-finite.
CnnTrainResult train_cnn(const InputSource& train, const InputSource& val, const CnnHyper& hyper,
                         const CnnTrainOptions& options);

double accuracy(const CnnModel& model, const InputSource& data);

// Versioned binary checkpoint, little-endian float64 tensors.
void save_cnn(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_cnn(const std::filesystem::path& path);
std::string serialize_cnn(const CnnModel& model);
CnnModel deserialize_cnn(std::string_view bytes);

}  // namespace lrptext
