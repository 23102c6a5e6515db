#include "fastot/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "fastot/errors.hpp"
#include "fastot/io.hpp"

namespace fastot::adapt {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

struct LatentCache {
  Eigen::MatrixXd hidden;  // tanh activations
  Eigen::MatrixXd latent;
};

void check_latent_params(const ModelShape& shape, const Eigen::VectorXd& g) {
  if (static_cast<std::size_t>(g.size()) != shape.latent_params()) {
    throw InvalidInput("latent map has " + std::to_string(g.size()) + " parameters, expected " +
                       std::to_string(shape.latent_params()));
  }
}

LatentCache latent_forward(const ModelShape& shape, const Eigen::VectorXd& g,
                           const Eigen::MatrixXd& x) {
  check_latent_params(shape, g);
  if (static_cast<std::size_t>(x.cols()) != shape.input_dim) {
    throw InvalidInput("inputs have " + std::to_string(x.cols()) + " columns, expected " +
                       std::to_string(shape.input_dim));
  }
  const std::size_t h = shape.hidden;
  const std::size_t d = shape.input_dim;
  const std::size_t l = shape.latent;
  const double* p = g.data();
  const ConstRowMap w1(p, h, d);
  const Eigen::Map<const Eigen::VectorXd> b1(p + h * d, h);
  const ConstRowMap w2(p + h * d + h, l, h);
  const Eigen::Map<const Eigen::VectorXd> b2(p + h * d + h + l * h, l);
  LatentCache c;
  c.hidden = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
  c.latent = (c.hidden * w2.transpose()).rowwise() + b2.transpose();
  return c;
}

void latent_backward(const ModelShape& shape, const Eigen::VectorXd& g, const Eigen::MatrixXd& x,
                     const LatentCache& c, const Eigen::MatrixXd& d_latent, double* grad) {
  const std::size_t h = shape.hidden;
  const std::size_t d = shape.input_dim;
  const std::size_t l = shape.latent;
  const ConstRowMap w2(g.data() + h * d + h, l, h);
  RowMap(grad + h * d + h, l, h) = d_latent.transpose() * c.hidden;
  Eigen::Map<Eigen::VectorXd>(grad + h * d + h + l * h, l) = d_latent.colwise().sum().transpose();
  const Eigen::MatrixXd d_pre =
      ((d_latent * w2).array() * (1.0 - c.hidden.array().square())).matrix();
  RowMap(grad, h, d) = d_pre.transpose() * x;
  Eigen::Map<Eigen::VectorXd>(grad + h * d, h) = d_pre.colwise().sum().transpose();
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - mx;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

// Pulls a gradient with respect to softmax probabilities back to the logits.
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& d_probs) {
  const Eigen::VectorXd inner = (probs.array() * d_probs.array()).rowwise().sum().matrix();
  return (probs.array() * (d_probs.colwise() - inner).array()).matrix();
}

PointCloud to_cloud(const Eigen::MatrixXd& rows) {
  const RowMatrix rm = rows;
  return PointCloud(static_cast<std::size_t>(rm.cols()),
                    std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
}

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(n, k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

LabeledBatch take_rows(const LabeledBatch& b, const std::vector<std::size_t>& idx) {
  LabeledBatch out;
  out.inputs.resize(static_cast<Eigen::Index>(idx.size()), b.inputs.cols());
  out.labels.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = b.inputs.row(static_cast<Eigen::Index>(idx[r]));
    out.labels[r] = b.labels[idx[r]];
  }
  return out;
}

// Loss and gradient; with plan == nullptr only the source cross-entropy
// contributes.
LossTerms loss_and_gradient(const AdaptModel& model, const LabeledBatch& source,
                            const Eigen::MatrixXd* target_inputs, const TransportPlan* plan,
                            const AdaptConfig& cfg) {
  const ModelShape& shape = model.shape;
  source.validate(shape.classes);
  const std::size_t l = shape.latent;
  const std::size_t k = shape.classes;
  const ConstRowMap wf(model.f.data(), k, l);

  LossTerms out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  double* grad_gs = out.gradient.data();
  double* grad_gt = grad_gs + model.g_s.size();
  double* grad_f = grad_gt + model.g_t.size();

  const LatentCache cs = latent_forward(shape, model.g_s, source.inputs);
  const Eigen::MatrixXd logits_s = classifier_logits(shape, model.f, cs.latent);
  const Eigen::MatrixXd probs_s = softmax_rows(logits_s);
  out.c_loss = cross_entropy_loss(source.labels, logits_s);

  const double ns = static_cast<double>(source.inputs.rows());
  Eigen::MatrixXd d_logits_s = probs_s;
  for (Eigen::Index r = 0; r < d_logits_s.rows(); ++r) {
    d_logits_s(r, source.labels[static_cast<std::size_t>(r)]) -= 1.0;
  }
  d_logits_s /= ns;
  Eigen::MatrixXd d_latent_s = Eigen::MatrixXd::Zero(cs.latent.rows(), static_cast<Eigen::Index>(l));

  const bool use_target = plan != nullptr && target_inputs != nullptr;
  LatentCache ct;
  Eigen::MatrixXd d_logits_t;
  Eigen::MatrixXd d_latent_t;
  if (use_target) {
    ct = latent_forward(shape, model.g_t, *target_inputs);
    const Eigen::MatrixXd logits_t = classifier_logits(shape, model.f, ct.latent);
    const Eigen::MatrixXd probs_t = softmax_rows(logits_t);
    d_logits_t = Eigen::MatrixXd::Zero(logits_t.rows(), logits_t.cols());
    d_latent_t = Eigen::MatrixXd::Zero(ct.latent.rows(), static_cast<Eigen::Index>(l));

    const Eigen::MatrixXd aug_s = augmented_features(shape, cs.latent, model.f, cfg.mode);
    const Eigen::MatrixXd aug_t = augmented_features(shape, ct.latent, model.f, cfg.mode);
    out.t_loss = transport_loss(aug_s, aug_t, *plan);
    Eigen::MatrixXd d_aug_s = Eigen::MatrixXd::Zero(aug_s.rows(), aug_s.cols());
    Eigen::MatrixXd d_aug_t = Eigen::MatrixXd::Zero(aug_t.rows(), aug_t.cols());
    for (const auto& e : plan->entries()) {
      const Eigen::RowVectorXd diff = 2.0 * cfg.lambda1 * e.mass * (aug_s.row(e.i) - aug_t.row(e.j));
      d_aug_s.row(e.i) += diff;
      d_aug_t.row(e.j) -= diff;
    }
    d_latent_s += d_aug_s.leftCols(static_cast<Eigen::Index>(l));
    d_latent_t += d_aug_t.leftCols(static_cast<Eigen::Index>(l));
    if (cfg.mode != AdaptMode::PlainOT) {
      const auto kk = static_cast<Eigen::Index>(k);
      d_logits_s += softmax_backward(probs_s, d_aug_s.rightCols(kk));
      d_logits_t += softmax_backward(probs_t, d_aug_t.rightCols(kk));
    }
    // Reported in every mode, weighted only in Full.
    out.h_loss = entropy_regularizer(logits_t);
    if (cfg.mode == AdaptMode::Full) {
      if (cfg.lambda2 != 0.0) {
        // dH/dlogit_k = -p_k (log p_k - sum_m p_m log p_m) per row.
        const Eigen::MatrixXd log_p = log_softmax_rows(logits_t);
        const Eigen::VectorXd plogp = (probs_t.array() * log_p.array()).rowwise().sum().matrix();
        const double nt = static_cast<double>(logits_t.rows());
        d_logits_t -= (cfg.lambda2 / nt) *
                      (probs_t.array() * (log_p.colwise() - plogp).array()).matrix();
      }
    }
  }

  out.total = out.c_loss + cfg.lambda1 * out.t_loss +
              (cfg.mode == AdaptMode::Full ? cfg.lambda2 * out.h_loss : 0.0);

  d_latent_s += d_logits_s * wf;
  RowMap(grad_f, k, l) = d_logits_s.transpose() * cs.latent;
  Eigen::Map<Eigen::VectorXd>(grad_f + k * l, k) = d_logits_s.colwise().sum().transpose();
  latent_backward(shape, model.g_s, source.inputs, cs, d_latent_s, grad_gs);
  if (use_target) {
    d_latent_t += d_logits_t * wf;
    RowMap(grad_f, k, l) += d_logits_t.transpose() * ct.latent;
    Eigen::Map<Eigen::VectorXd>(grad_f + k * l, k) += d_logits_t.colwise().sum().transpose();
    latent_backward(shape, model.g_t, *target_inputs, ct, d_latent_t, grad_gt);
  }
  return out;
}

}  // namespace

AdaptModel AdaptModel::zeros(const ModelShape& shape) {
  AdaptModel m;
  m.shape = shape;
  m.g_s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.latent_params()));
  m.g_t = m.g_s;
  m.f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.classifier_params()));
  return m;
}

AdaptModel AdaptModel::random(const ModelShape& shape, std::uint64_t seed) {
  AdaptModel m = zeros(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](double* w, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
    for (std::size_t k = 0; k < rows * cols; ++k) w[k] = dist(rng);
  };
  const std::size_t h = shape.hidden;
  const std::size_t d = shape.input_dim;
  fill(m.g_s.data(), h, d);
  fill(m.g_s.data() + h * d + h, shape.latent, h);
  fill(m.f.data(), shape.classes, shape.latent);
  m.g_t = m.g_s;
  return m;
}

Eigen::VectorXd AdaptModel::flat() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(parameter_count()));
  v << g_s, g_t, f;
  return v;
}

void AdaptModel::set_flat(const Eigen::VectorXd& params) {
  if (static_cast<std::size_t>(params.size()) != parameter_count()) {
    throw InvalidInput("parameter vector has the wrong length");
  }
  g_s = params.segment(0, g_s.size());
  g_t = params.segment(g_s.size(), g_t.size());
  f = params.segment(g_s.size() + g_t.size(), f.size());
}

void AdaptModel::validate() const {
  if (shape.input_dim == 0 || shape.hidden == 0 || shape.latent == 0 || shape.classes == 0) {
    throw InvalidInput("model dimensions must be positive");
  }
  check_latent_params(shape, g_s);
  check_latent_params(shape, g_t);
  if (static_cast<std::size_t>(f.size()) != shape.classifier_params()) {
    throw InvalidInput("classifier has the wrong number of parameters");
  }
  if (!g_s.allFinite() || !g_t.allFinite() || !f.allFinite()) {
    throw InvalidInput("model parameters must be finite");
  }
}

void LabeledBatch::validate(std::size_t classes) const {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw InvalidInput("batch has " + std::to_string(inputs.rows()) + " rows but " +
                       std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidInput("label " + std::to_string(y) + " is out of range");
    }
  }
}

AdaptMode parse_mode(std::string_view text) {
  if (text == "plain") return AdaptMode::PlainOT;
  if (text == "labels") return AdaptMode::LabelAugmentedOT;
  if (text == "full") return AdaptMode::Full;
  throw InvalidInput("unknown mode '" + std::string(text) + "' (expected plain, labels or full)");
}

std::string_view mode_name(AdaptMode mode) {
  switch (mode) {
    case AdaptMode::PlainOT: return "plain";
    case AdaptMode::LabelAugmentedOT: return "labels";
    case AdaptMode::Full: return "full";
  }
  return "?";
}

void AdaptConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw InvalidInput("lambdas must be nonnegative");
  if (!(learn_rate > 0.0)) throw InvalidInput("learn_rate must be positive");
  if (batch_size == 0) throw InvalidInput("batch_size must be positive");
  if (steps_per_round == 0) throw InvalidInput("steps_per_round must be positive");
  solver.validate();
}

Eigen::MatrixXd forward_latent(const ModelShape& shape, const Eigen::VectorXd& g_params,
                               const Eigen::MatrixXd& inputs) {
  return latent_forward(shape, g_params, inputs).latent;
}

Eigen::MatrixXd classifier_logits(const ModelShape& shape, const Eigen::VectorXd& f_params,
                                  const Eigen::MatrixXd& latents) {
  if (static_cast<std::size_t>(f_params.size()) != shape.classifier_params()) {
    throw InvalidInput("classifier has the wrong number of parameters");
  }
  if (static_cast<std::size_t>(latents.cols()) != shape.latent) {
    throw InvalidInput("latents have the wrong width");
  }
  const ConstRowMap w(f_params.data(), shape.classes, shape.latent);
  const Eigen::Map<const Eigen::VectorXd> b(f_params.data() + shape.classes * shape.latent,
                                            shape.classes);
  return (latents * w.transpose()).rowwise() + b.transpose();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  return log_softmax_rows(logits).array().exp().matrix();
}

double cross_entropy_loss(std::span<const int> labels, const Eigen::MatrixXd& logits) {
  if (labels.size() != static_cast<std::size_t>(logits.rows())) {
    throw InvalidInput("label count does not match the logit rows");
  }
  if (labels.empty()) return 0.0;
  const Eigen::MatrixXd log_p = log_softmax_rows(logits);
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || labels[r] >= logits.cols()) throw InvalidInput("label out of range");
    total -= log_p(static_cast<Eigen::Index>(r), labels[r]);
  }
  return total / static_cast<double>(labels.size());
}

Eigen::MatrixXd augmented_features(const ModelShape& shape, const Eigen::MatrixXd& latents,
                                   const Eigen::VectorXd& f_params, AdaptMode mode) {
  if (mode == AdaptMode::PlainOT) return latents;
  const Eigen::MatrixXd probs = softmax_rows(classifier_logits(shape, f_params, latents));
  Eigen::MatrixXd out(latents.rows(), latents.cols() + probs.cols());
  out << latents, probs;
  return out;
}

double transport_loss(const Eigen::MatrixXd& aug_source, const Eigen::MatrixXd& aug_target,
                      const TransportPlan& plan) {
  if (plan.n_source() != static_cast<std::size_t>(aug_source.rows()) ||
      plan.n_target() != static_cast<std::size_t>(aug_target.rows())) {
    throw InvalidInput("plan dimensions do not match the batches");
  }
  if (aug_source.cols() != aug_target.cols()) throw InvalidInput("feature widths differ");
  double total = 0.0;
  for (const auto& e : plan.entries()) {
    total += e.mass * (aug_source.row(e.i) - aug_target.row(e.j)).squaredNorm();
  }
  return total;
}

double entropy_regularizer(const Eigen::MatrixXd& logits) {
  if (logits.rows() == 0) return 0.0;
  const Eigen::MatrixXd log_p = log_softmax_rows(logits);
  const Eigen::ArrayXXd p = log_p.array().exp();
  // exp(log p) underflows to 0 before log p reaches -inf, so 0 log 0 is 0 here.
  const double total = -(p * log_p.array()).sum();
  return total / static_cast<double>(logits.rows());
}

LossTerms total_loss(const AdaptModel& model, const LabeledBatch& source,
                     const Eigen::MatrixXd& target_inputs, const TransportPlan& plan,
                     const AdaptConfig& cfg) {
  return loss_and_gradient(model, source, &target_inputs, &plan, cfg);
}

std::vector<int> predict(const Eigen::MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(logits.rows())) {
    throw InvalidInput("label count does not match the logit rows");
  }
  if (labels.empty()) return 0.0;
  const auto pred = predict(logits);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) hits += pred[r] == labels[r];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate(const AdaptModel& model, const LabeledBatch& batch, Path which) {
  batch.validate(model.shape.classes);
  const auto& g = which == Path::SourcePath ? model.g_s : model.g_t;
  return accuracy(classifier_logits(model.shape, model.f, forward_latent(model.shape, g, batch.inputs)),
                  batch.labels);
}

TrainResult train(AdaptModel model, const LabeledBatch& source, const LabeledBatch& target,
                  const AdaptConfig& cfg) {
  cfg.validate();
  model.validate();
  source.validate(model.shape.classes);
  target.validate(model.shape.classes);
  TrainResult result{std::move(model), {}};
  AdaptModel& m = result.model;
  std::mt19937_64 rng(cfg.seed);

  for (std::size_t round = 0; round < cfg.epochs; ++round) {
    const LabeledBatch sb = take_rows(source, sample_rows(source.labels.size(), cfg.batch_size, rng));
    const LabeledBatch tb = take_rows(target, sample_rows(target.labels.size(), cfg.batch_size, rng));

    // Plan between the current augmented features, parameters frozen.
    const Eigen::MatrixXd aug_s = augmented_features(
        m.shape, forward_latent(m.shape, m.g_s, sb.inputs), m.f, cfg.mode);
    const Eigen::MatrixXd aug_t = augmented_features(
        m.shape, forward_latent(m.shape, m.g_t, tb.inputs), m.f, cfg.mode);
    const auto mu_s = uniform_measure(to_cloud(aug_s));
    const auto mu_t = uniform_measure(to_cloud(aug_t));
    const CostOracle oracle(mu_s.cloud(), mu_t.cloud());
    SolverConfig scfg = cfg.solver;
    scfg.seed = cfg.solver.seed + round;
    const OTSolution ot = [&] {
      try {
        return solve(mu_s, mu_t, oracle, scfg);
      } catch (const Diverged& e) {
        throw Diverged("round " + std::to_string(round) + ": " + e.what());
      } catch (const CapacityError& e) {
        throw CapacityError("round " + std::to_string(round) + ": " + e.what());
      } catch (const SupportEmpty& e) {
        throw SupportEmpty("round " + std::to_string(round) + ": " + e.what());
      }
    }();

    // Gradient steps, plan frozen.
    LossTerms terms;
    for (std::size_t s = 0; s < cfg.steps_per_round; ++s) {
      terms = loss_and_gradient(m, sb, &tb.inputs, &ot.plan, cfg);
      m.set_flat(m.flat() - cfg.learn_rate * terms.gradient);
    }
    result.history.push_back({round, terms.c_loss, terms.t_loss, terms.h_loss,
                              evaluate(m, source, Path::SourcePath),
                              evaluate(m, target, Path::TargetPath)});
  }
  return result;
}

void write_history_csv(std::ostream& out, std::span<const HistoryRow> history) {
  out << "round,c_loss,t_loss,h_loss,source_acc,target_acc\n";
  for (const auto& h : history) {
    out << h.round << ',' << io::format_double(h.c_loss) << ',' << io::format_double(h.t_loss)
        << ',' << io::format_double(h.h_loss) << ',' << io::format_double(h.source_acc) << ','
        << io::format_double(h.target_acc) << '\n';
  }
}

nlohmann::ordered_json model_to_json(const AdaptModel& model) {
  nlohmann::ordered_json j;
  j["architecture"] = {{"input_dim", model.shape.input_dim},
                       {"hidden", model.shape.hidden},
                       {"latent", model.shape.latent},
                       {"classes", model.shape.classes},
                       {"activation", "tanh"},
                       {"layout", "g_s,g_t,f"}};
  const Eigen::VectorXd flat = model.flat();
  j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return j;
}

AdaptModel model_from_json(const nlohmann::json& j) {
  try {
    const auto& a = j.at("architecture");
    ModelShape shape{a.at("input_dim").get<std::size_t>(), a.at("hidden").get<std::size_t>(),
                     a.at("latent").get<std::size_t>(), a.at("classes").get<std::size_t>()};
    AdaptModel m = AdaptModel::zeros(shape);
    const auto params = j.at("params").get<std::vector<double>>();
    m.set_flat(Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size())));
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed model JSON: ") + e.what());
  }
}

AdaptModel pretrain_source_only(const ModelShape& shape, const LabeledBatch& source,
                                std::uint64_t seed, std::size_t steps, double learn_rate) {
  AdaptModel m = AdaptModel::random(shape, seed);
  const AdaptConfig cfg;
  for (std::size_t s = 0; s < steps; ++s) {
    const LossTerms terms = loss_and_gradient(m, source, nullptr, nullptr, cfg);
    m.set_flat(m.flat() - learn_rate * terms.gradient);
  }
  m.g_t = m.g_s;
  return m;
}

BenchmarkResult run_benchmark(AdaptMode mode, std::uint64_t seed, const AdaptConfig& base) {
  const SyntheticTask task = make_synthetic_task(seed);
  const ModelShape shape{2, 32, 8, 2};
  AdaptModel model = pretrain_source_only(shape, task.source, seed);
  const double baseline = evaluate(model, task.target, Path::TargetPath);
  AdaptConfig cfg = base;
  cfg.mode = mode;
  cfg.seed = seed;
  const TrainResult trained = train(std::move(model), task.source, task.target, cfg);
  return {mode, seed, baseline, evaluate(trained.model, task.source, Path::SourcePath),
          evaluate(trained.model, task.target, Path::TargetPath)};
}

}  // namespace fastot::adapt
