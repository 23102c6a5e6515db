#pragma once
// Unsupervised domain adaptation with transport-aligned latent spaces.
//
// Two latent maps g_s, g_t (input -> tanh hidden layer -> linear latent) and
// one linear classifier f on the latent space. Training alternates between
// an OT plan between the latent batches (parameters frozen) and gradient
// steps on the combined loss (plan frozen).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fastot/dual_solver.hpp"
#include "fastot/measures.hpp"

namespace fastot::adapt {

struct ModelShape {
  std::size_t input_dim = 2;
  std::size_t hidden = 32;
  std::size_t latent = 8;
  std::size_t classes = 2;

  std::size_t latent_params() const { return hidden * input_dim + hidden + latent * hidden + latent; }
  std::size_t classifier_params() const { return classes * latent + classes; }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct AdaptModel {
  ModelShape shape;
  Eigen::VectorXd g_s;  // W1 (hidden x input, row-major), b1, W2 (latent x hidden), b2
  Eigen::VectorXd g_t;  // same layout as g_s
  Eigen::VectorXd f;    // W (classes x latent), b

  // Small random weights, zero biases; g_t starts as a copy of g_s.
  static AdaptModel random(const ModelShape& shape, std::uint64_t seed);
  static AdaptModel zeros(const ModelShape& shape);

  std::size_t parameter_count() const { return g_s.size() + g_t.size() + f.size(); }
  // g_s, then g_t, then f.
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);
  // Throws InvalidInput on wrong lengths or non-finite entries.
  void validate() const;
};

struct LabeledBatch {
  Eigen::MatrixXd inputs;  // one sample per row
  std::vector<int> labels;

  // Throws InvalidInput when shapes disagree or a label is outside [0, classes).
  void validate(std::size_t classes) const;
};

enum class AdaptMode { PlainOT, LabelAugmentedOT, Full };
enum class Path { SourcePath, TargetPath };

AdaptMode parse_mode(std::string_view text);  // plain, labels, full
std::string_view mode_name(AdaptMode mode);

struct AdaptConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double learn_rate = 1e-2;
  std::size_t epochs = 150;  // training rounds
  AdaptMode mode = AdaptMode::Full;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  std::size_t steps_per_round = 1;
  SolverConfig solver;

  void validate() const;
};

Eigen::MatrixXd forward_latent(const ModelShape& shape, const Eigen::VectorXd& g_params,
                               const Eigen::MatrixXd& inputs);
Eigen::MatrixXd classifier_logits(const ModelShape& shape, const Eigen::VectorXd& f_params,
                                  const Eigen::MatrixXd& latents);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// Batch mean of -log softmax(logits)[label].
double cross_entropy_loss(std::span<const int> labels, const Eigen::MatrixXd& logits);

// PlainOT: the latents. Otherwise the latents followed by the softmax class
// probabilities of f.
Eigen::MatrixXd augmented_features(const ModelShape& shape, const Eigen::MatrixXd& latents,
                                   const Eigen::VectorXd& f_params, AdaptMode mode);

// sum over plan entries of mass * |source row i - target row j|^2.
double transport_loss(const Eigen::MatrixXd& aug_source, const Eigen::MatrixXd& aug_target,
                      const TransportPlan& plan);

// Batch mean of the Shannon entropy of softmax(logits).
double entropy_regularizer(const Eigen::MatrixXd& logits);

struct LossTerms {
  double total = 0.0;
  double c_loss = 0.0;
  double t_loss = 0.0;
  double h_loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as AdaptModel::flat()
};

// c_loss + lambda1 t_loss + lambda2 h_loss, with lambda2 applied only in Full
// mode. The plan couples source rows (i) with target rows (j) and receives
// no gradient.
LossTerms total_loss(const AdaptModel& model, const LabeledBatch& source,
                     const Eigen::MatrixXd& target_inputs, const TransportPlan& plan,
                     const AdaptConfig& cfg);

// Predicted class per row; ties go to the lowest class index.
std::vector<int> predict(const Eigen::MatrixXd& logits);
double accuracy(const Eigen::MatrixXd& logits, std::span<const int> labels);
double evaluate(const AdaptModel& model, const LabeledBatch& batch, Path which);

struct HistoryRow {
  std::size_t round;
  double c_loss;
  double t_loss;
  double h_loss;
  double source_acc;
  double target_acc;
};

struct TrainResult {
  AdaptModel model;
  std::vector<HistoryRow> history;
};

// Target labels are read only for the target_acc history column. Solver
// failures are rethrown with the round index in the message.
TrainResult train(AdaptModel model, const LabeledBatch& source, const LabeledBatch& target,
                  const AdaptConfig& cfg);

void write_history_csv(std::ostream& out, std::span<const HistoryRow> history);

nlohmann::ordered_json model_to_json(const AdaptModel& model);
AdaptModel model_from_json(const nlohmann::json& j);

// Two Gaussian classes in the plane; the target domain is the source
// distribution rotated by 30 degrees and shifted by (1, 0.5).
struct SyntheticTask {
  LabeledBatch source;
  LabeledBatch target;
};

SyntheticTask make_synthetic_task(std::uint64_t seed, std::size_t samples_per_domain = 500,
                                  bool shifted = true);

// Source-only classifier trained by gradient descent on the cross-entropy,
// with g_t copied from g_s.
AdaptModel pretrain_source_only(const ModelShape& shape, const LabeledBatch& source,
                                std::uint64_t seed, std::size_t steps = 300,
                                double learn_rate = 0.1);

struct BenchmarkResult {
  AdaptMode mode;
  std::uint64_t seed;
  double baseline_target_acc;
  double adapted_source_acc;
  double adapted_target_acc;
};

BenchmarkResult run_benchmark(AdaptMode mode, std::uint64_t seed, const AdaptConfig& base = {});

}  // namespace fastot::adapt
