#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "textnorm/model.hpp"

namespace textnorm {

struct TrainConfig {
  size_t epochs = 30;
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;
  uint64_t seed = 42;
};

// Scales all trainable gradients so their joint L2 norm is at most
// max_norm; returns the pre-clip norm.
template <typename Real>
Real clip_global_norm(ParamStore<Real>& store, Real max_norm) {
  if (max_norm <= Real(0)) throw ConfigError("clip norm must be positive");
  double sq = 0.0;
  for (const auto& e : store.entries()) {
    if (!e.trainable) continue;
    for (Real g : e.grad) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const Real norm = static_cast<Real>(std::sqrt(sq));
  if (norm > max_norm) {
    const Real s = max_norm / norm;
    for (auto& e : store.entries()) {
      if (!e.trainable) continue;
      for (Real& g : e.grad) g *= s;
    }
  }
  return norm;
}

// Adam with bias correction. One shared step counter; first and second
// moments per trainable tensor, created on first use.
template <typename Real>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double epsilon)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(epsilon) {
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (b1_ < 0 || b1_ >= 1 || b2_ < 0 || b2_ >= 1) {
      throw ConfigError("adam betas must lie in [0, 1)");
    }
  }

  explicit Adam(const TrainConfig& tc) : Adam(tc.lr, tc.beta1, tc.beta2, tc.epsilon) {}

  size_t steps() const { return t_; }

  void step(ParamStore<Real>& store) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (auto& e : store.entries()) {
      if (!e.trainable) continue;
      auto& m = m_[e.name];
      auto& v = v_[e.name];
      if (m.empty()) m.assign(e.value.size(), 0.0);
      if (v.empty()) v.assign(e.value.size(), 0.0);
      for (size_t i = 0; i < e.value.size(); ++i) {
        const double g = static_cast<double>(e.grad[i]);
        m[i] = b1_ * m[i] + (1.0 - b1_) * g;
        v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        e.value[i] -= static_cast<Real>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

struct EpochLoss {
  double train = 0.0;
  double dev = 0.0;
};

inline size_t target_token_count(const Batch& batch) {
  size_t n = 0;
  for (size_t len : batch.tgt_len) n += len - 1;  // SOS predicts nothing
  return n;
}

// Evaluation loss: teacher forcing, no dropout, no sampling.
template <typename Real>
double eval_loss(const Model<Real>& model, const std::vector<Batch>& batches,
                 const std::vector<FeatureBatch>& feats) {
  if (batches.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  size_t count = 0;
  Rng rng(0);  // unused without dropout or sampling
  for (size_t k = 0; k < batches.size(); ++k) {
    Tape<Real> tape;
    TensorRef loss = model.forward_train(tape, batches[k], feats[k], rng,
                                         /*training=*/false, /*sampling=*/0.0);
    const size_t n = target_token_count(batches[k]);
    sum += static_cast<double>(tape.value(loss)[0]) * static_cast<double>(n);
    count += n;
  }
  return sum / static_cast<double>(count);
}

// Runs the full optimization loop over fixed batches. Per-epoch losses
// are means per target token; log lines go through `log` when set.
template <typename Real>
std::vector<EpochLoss> train_model(Model<Real>& model,
                                   const std::vector<Batch>& train_batches,
                                   const std::vector<FeatureBatch>& train_feats,
                                   const std::vector<Batch>& dev_batches,
                                   const std::vector<FeatureBatch>& dev_feats,
                                   const TrainConfig& tc,
                                   std::FILE* log = nullptr,
                                   bool (*stop)(const Model<Real>&, size_t,
                                                void*) = nullptr,
                                   void* stop_arg = nullptr) {
  if (train_batches.empty()) throw DataError("no training batches");
  if (train_batches.size() != train_feats.size() ||
      dev_batches.size() != dev_feats.size()) {
    throw DimensionError("feature batches must pair with token batches");
  }
  Adam<Real> opt(tc);
  Rng rng(tc.seed);
  std::vector<EpochLoss> history;
  for (size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    double sum = 0.0;
    size_t count = 0;
    for (size_t k = 0; k < train_batches.size(); ++k) {
      Tape<Real> tape;
      TensorRef loss = model.forward_train(tape, train_batches[k], train_feats[k], rng,
                                           /*training=*/true);
      const double lv = static_cast<double>(tape.value(loss)[0]);
      if (!std::isfinite(lv)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(k));
      }
      const size_t n = target_token_count(train_batches[k]);
      sum += lv * static_cast<double>(n);
      count += n;

      model.params().zero_grads();
      tape.backward(loss);
      tape.collect_param_grads(model.params());
      clip_global_norm(model.params(), static_cast<Real>(tc.clip_norm));
      opt.step(model.params());
    }
    EpochLoss el;
    el.train = sum / static_cast<double>(count);
    el.dev = eval_loss(model, dev_batches, dev_feats);
    history.push_back(el);
    if (log != nullptr) {
      std::fprintf(log, "%zu\t%.6f\t%.6f\n", epoch, el.train, el.dev);
      std::fflush(log);
    }
    if (stop != nullptr && stop(model, epoch, stop_arg)) break;
  }
  return history;
}

}  // namespace textnorm
