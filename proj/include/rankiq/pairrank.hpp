// Pairwise learning-to-rank: pair probability, uncertainty-weighted cross
// entropy, batch gradients, and mini-batch SGD with momentum and weight
// decay. The trainer core is shared with the listwise module: it splits
// validation data by source image, shuffles once per epoch, snapshots on
// every validation improvement and returns the best snapshot.
#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rankiq/dataset.hpp"
#include "rankiq/pairgen.hpp"
#include "rankiq/qnet.hpp"

namespace rankiq {

struct TrainConfig {
  int batch_size = 512;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double learning_rate = 1e-4;
  int epochs = 1;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  bool shuffle = true;
};

namespace detail {

inline double sigmoid(double d) {
  return d >= 0.0 ? 1.0 / (1.0 + std::exp(-d))
                  : std::exp(d) / (1.0 + std::exp(d));
}

// -label*(fi-fj) + log(1+exp(fi-fj)), evaluated in the branch that never
// overflows.
inline double pair_loss_unchecked(double fi, double fj, double label) {
  const double d = fi - fj;
  if (d > 0.0) return (1.0 - label) * d + std::log1p(std::exp(-d));
  return -label * d + std::log1p(std::exp(d));
}

}  // namespace detail

inline double pair_probability(double fi, double fj) {
  require(std::isfinite(fi) && std::isfinite(fj),
          "pair_probability: non-finite input");
  return detail::sigmoid(fi - fj);
}

inline double pair_loss(double fi, double fj, double label) {
  require(std::isfinite(fi) && std::isfinite(fj), "pair_loss: non-finite input");
  require(label >= 0.0 && label <= 1.0, "pair_loss: label outside [0, 1]");
  return detail::pair_loss_unchecked(fi, fj, label);
}

namespace detail {

inline void validate_dips(const Dataset& ds, std::span<const Dip> dips) {
  for (const Dip& d : dips) {
    ds.record(d.better);
    ds.record(d.worse);
    require(d.label >= 0.0 && d.label <= 1.0, "pair label outside [0, 1]");
    require(d.uncertainty >= 0.0 && d.uncertainty <= 1.0,
            "pair uncertainty outside [0, 1]");
  }
}

inline constexpr std::size_t kGradChunk = 64;

// Weighted loss sum with an ordered per-chunk reduction, so results are
// identical for any thread count.
template <typename Model>
double pair_loss_sum(const Model& model, std::span<const Dip> batch,
                     const Dataset& ds, int threads) {
  const std::size_t chunks = (batch.size() + kGradChunk - 1) / kGradChunk;
  std::vector<double> chunk_loss(chunks, 0.0);
  parallel_chunks(batch.size(), kGradChunk, threads,
                  [&](std::size_t c, std::size_t lo, std::size_t hi) {
                    double acc = 0.0;
                    for (std::size_t n = lo; n < hi; ++n) {
                      const Dip& d = batch[n];
                      const double w = 1.0 - d.uncertainty;
                      if (w == 0.0) continue;
                      const auto& ri = ds.records[static_cast<std::size_t>(d.better)];
                      const auto& rj = ds.records[static_cast<std::size_t>(d.worse)];
                      acc += w * pair_loss_unchecked(model.forward(ri.features),
                                                     model.forward(rj.features),
                                                     d.label);
                    }
                    chunk_loss[c] = acc;
                  });
  double total = 0.0;
  for (double l : chunk_loss) total += l;
  return total;
}

template <typename Model>
double pair_gradient_sum(const Model& model, std::span<const Dip> batch,
                         const Dataset& ds, std::vector<double>& grad,
                         int threads) {
  const std::size_t chunks = (batch.size() + kGradChunk - 1) / kGradChunk;
  std::vector<std::vector<double>> chunk_grad(chunks);
  std::vector<double> chunk_loss(chunks, 0.0);
  parallel_chunks(
      batch.size(), kGradChunk, threads,
      [&](std::size_t c, std::size_t lo, std::size_t hi) {
        auto& g = chunk_grad[c];
        g.assign(model.parameters().size(), 0.0);
        typename Model::Scratch si, sj;
        double acc = 0.0;
        for (std::size_t n = lo; n < hi; ++n) {
          const Dip& d = batch[n];
          const double w = 1.0 - d.uncertainty;
          if (w == 0.0) continue;
          const auto& ri = ds.records[static_cast<std::size_t>(d.better)];
          const auto& rj = ds.records[static_cast<std::size_t>(d.worse)];
          const double fi = model.forward(ri.features, si);
          const double fj = model.forward(rj.features, sj);
          acc += w * pair_loss_unchecked(fi, fj, d.label);
          const double coeff = (-d.label + sigmoid(fi - fj)) * w;
          model.backward(si, coeff, g);
          model.backward(sj, -coeff, g);
        }
        chunk_loss[c] = acc;
      });
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += chunk_loss[c];
    const auto& g = chunk_grad[c];
    for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += g[p];
  }
  return total;
}

}  // namespace detail

// Uncertainty-weighted cross-entropy over one batch; the weight-decay
// penalty is not part of the loss, it lives in the update step.
template <typename Model>
double batch_loss(const Model& model, std::span<const Dip> batch,
                  const Dataset& ds) {
  require(!batch.empty(), "batch_loss: empty batch");
  detail::validate_dips(ds, batch);
  return detail::pair_loss_sum(model, batch, ds, 1);
}

template <typename Model>
std::vector<double> batch_gradient(const Model& model,
                                   std::span<const Dip> batch,
                                   const Dataset& ds, int threads = 1) {
  require(!batch.empty(), "batch_gradient: empty batch");
  detail::validate_dips(ds, batch);
  std::vector<double> grad(model.parameters().size(), 0.0);
  detail::pair_gradient_sum(model, batch, ds, grad, threads);
  return grad;
}

// v <- momentum*v - lr*(g + weight_decay*theta); theta <- theta + v.
// Weight decay applies to every parameter, biases included.
template <typename Model>
void sgd_step(Model& model, const std::vector<double>& gradients,
              std::vector<double>& velocity, const TrainConfig& cfg) {
  auto& theta = model.parameters();
  require(gradients.size() == theta.size() && velocity.size() == theta.size(),
          "sgd_step: shape mismatch");
  for (std::size_t p = 0; p < theta.size(); ++p) {
    velocity[p] = cfg.momentum * velocity[p] -
                  cfg.learning_rate *
                      (gradients[p] + cfg.weight_decay * theta[p]);
    theta[p] += velocity[p];
  }
}

// --------------------------------------------------------------------------
// Trainer core (shared with listrank).

struct TrainLogRow {
  long long batch_index = 0;
  double train_loss = 0.0;  // mean per example since the previous checkpoint
  double val_loss = 0.0;    // mean per example over the validation split
};

template <typename Model>
struct TrainResult {
  Model model;
  std::vector<TrainLogRow> log;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  long long best_batch = 0;
  std::size_t train_examples = 0;
  std::size_t val_examples = 0;
  long long examples_consumed = 0;
};

inline void save_train_log(const std::vector<TrainLogRow>& log,
                           const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "batch_index,train_loss,val_loss\n";
  for (const auto& row : log) {
    out << row.batch_index << ",";
    if (!std::isnan(row.train_loss)) out << format_double(row.train_loss);
    out << "," << format_double(row.val_loss) << "\n";
  }
}

namespace detail {

inline constexpr std::uint64_t kSplitSalt = 0x5714;
inline constexpr std::uint64_t kShuffleSalt = 0x5aff;
inline constexpr long long kValCadence = 50;

inline void validate_train_config(const TrainConfig& cfg) {
  require(cfg.batch_size >= 1, "train: batch size must be >= 1");
  require(cfg.momentum >= 0.0 && cfg.momentum < 1.0,
          "train: momentum must be in [0, 1)");
  require(cfg.weight_decay >= 0.0, "train: weight decay must be >= 0");
  require(cfg.learning_rate > 0.0, "train: learning rate must be > 0");
  require(cfg.epochs >= 1, "train: epochs must be >= 1");
  require(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0,
          "train: validation fraction must be in (0, 1)");
}

// Splits examples by the source images they reference: all versions of a
// held-out source go to validation, examples straddling the split are
// dropped from both sides.
template <typename Example, typename IdsFn>
void split_by_source(const Dataset& ds, const std::vector<Example>& examples,
                     const TrainConfig& cfg, IdsFn&& for_ids,
                     std::vector<Example>* train_out,
                     std::vector<Example>* val_out) {
  std::set<int> source_set;
  for (const Example& ex : examples) {
    for_ids(ex, [&](int id) { source_set.insert(ds.record(id).source_id); });
  }
  require(source_set.size() >= 2, "train: need at least 2 sources to split");
  std::vector<int> sources(source_set.begin(), source_set.end());
  Rng rng(mix_seed(cfg.seed, kSplitSalt));
  rng.shuffle(sources);
  const long long s = static_cast<long long>(sources.size());
  const long long n_val = std::clamp<long long>(
      std::llround(cfg.validation_fraction * static_cast<double>(s)), 1, s - 1);
  const std::set<int> val_sources(sources.begin(), sources.begin() + n_val);

  for (const Example& ex : examples) {
    int in_val = 0, total = 0;
    for_ids(ex, [&](int id) {
      ++total;
      if (val_sources.count(ds.record(id).source_id)) ++in_val;
    });
    if (in_val == 0) {
      train_out->push_back(ex);
    } else if (in_val == total) {
      val_out->push_back(ex);
    }
  }
  require(!train_out->empty(), "train: empty training set after source split");
  require(!val_out->empty(), "train: empty validation set after source split");
}

template <typename Model, typename Example, typename LossFn, typename GradFn,
          typename IdsFn>
TrainResult<Model> train_ranker(const Dataset& ds,
                                const std::vector<Example>& examples,
                                Model model, const TrainConfig& cfg,
                                LossFn&& loss_sum, GradFn&& gradient_sum,
                                IdsFn&& for_ids, int threads) {
  validate_train_config(cfg);
  require(!examples.empty(), "train: no examples");

  std::vector<Example> train_ex, val_ex;
  split_by_source(ds, examples, cfg, for_ids, &train_ex, &val_ex);

  TrainResult<Model> result;
  result.train_examples = train_ex.size();
  result.val_examples = val_ex.size();

  const auto val_loss = [&](const Model& m) {
    return loss_sum(m, std::span<const Example>(val_ex), threads) /
           static_cast<double>(val_ex.size());
  };

  std::vector<double> velocity(model.parameters().size(), 0.0);
  std::vector<double> grad(model.parameters().size(), 0.0);

  result.initial_val_loss = val_loss(model);
  result.best_val_loss = result.initial_val_loss;
  result.best_batch = 0;
  std::vector<double> best_params = model.parameters();
  result.log.push_back(
      {0, std::numeric_limits<double>::quiet_NaN(), result.initial_val_loss});

  long long batch_index = 0;
  long long last_checkpoint = 0;
  double since_loss = 0.0;
  long long since_count = 0;

  const auto checkpoint = [&]() {
    const double v = val_loss(model);
    result.log.push_back(
        {batch_index,
         since_count > 0 ? since_loss / static_cast<double>(since_count)
                         : std::numeric_limits<double>::quiet_NaN(),
         v});
    since_loss = 0.0;
    since_count = 0;
    last_checkpoint = batch_index;
    if (v < result.best_val_loss) {
      result.best_val_loss = v;
      result.best_batch = batch_index;
      best_params = model.parameters();
    }
  };

  std::vector<Example> epoch_ex(train_ex.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_ex.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.shuffle) {
      Rng rng(mix_seed(cfg.seed, kShuffleSalt + static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
    }
    for (std::size_t i = 0; i < order.size(); ++i) epoch_ex[i] = train_ex[order[i]];

    for (std::size_t start = 0; start < epoch_ex.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.batch_size), epoch_ex.size() - start);
      const std::span<const Example> batch(epoch_ex.data() + start, len);
      std::fill(grad.begin(), grad.end(), 0.0);
      since_loss += gradient_sum(model, batch, grad, threads);
      since_count += static_cast<long long>(len);
      result.examples_consumed += static_cast<long long>(len);
      sgd_step(model, grad, velocity, cfg);
      ++batch_index;
      if (batch_index % kValCadence == 0) checkpoint();
    }
    if (batch_index != last_checkpoint) checkpoint();
  }

  model.parameters() = std::move(best_params);
  result.model = std::move(model);
  return result;
}

}  // namespace detail

// Pairwise training; returns the snapshot with the lowest validation loss.
template <typename Model>
TrainResult<Model> train_pairwise(const Dataset& ds,
                                  const std::vector<Dip>& dips, Model model,
                                  const TrainConfig& cfg, int threads = 1) {
  detail::validate_dips(ds, dips);
  return detail::train_ranker(
      ds, dips, std::move(model), cfg,
      [&ds](const auto& m, std::span<const Dip> ex, int t) {
        return detail::pair_loss_sum(m, ex, ds, t);
      },
      [&ds](const auto& m, std::span<const Dip> ex, std::vector<double>& g,
            int t) { return detail::pair_gradient_sum(m, ex, ds, g, t); },
      [](const Dip& d, auto&& fn) {
        fn(d.better);
        fn(d.worse);
      },
      threads);
}

}  // namespace rankiq
