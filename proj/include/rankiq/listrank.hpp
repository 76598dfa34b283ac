// Listwise losses: permutation probabilities, the general cross-entropy
// list loss (an oracle, n <= 6), the closed-form three-element list loss,
// and listwise training that reuses the pairwise optimizer. For two-element
// lists the loss coincides with the pairwise cross entropy.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rankiq/pairrank.hpp"

namespace rankiq {

// A ranked list of image ids, best quality first.
struct RankList {
  std::vector<int> ids;
  double uncertainty = 0.0;
};

namespace detail {

// log sum exp over f[begin..end), max-shifted.
inline double logsumexp(std::span<const double> f, std::size_t begin) {
  double mx = f[begin];
  for (std::size_t k = begin + 1; k < f.size(); ++k) mx = std::max(mx, f[k]);
  double s = 0.0;
  for (std::size_t k = begin; k < f.size(); ++k) s += std::exp(f[k] - mx);
  return mx + std::log(s);
}

// Cross entropy of the degenerate truth concentrated on the given order:
// sum_j (-f_j + log sum_{k>=j} exp f_k); the last position contributes 0.
inline double ordered_list_loss(std::span<const double> f) {
  double loss = 0.0;
  for (std::size_t j = 0; j + 1 < f.size(); ++j) {
    loss += -f[j] + logsumexp(f, j);
  }
  return loss;
}

// d loss / d f_m = sum_{j <= m, j < n-1} softmax_j(m) - [m < n-1].
inline void ordered_list_score_grad(std::span<const double> f,
                                    std::vector<double>& g) {
  const std::size_t n = f.size();
  g.assign(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double lse = logsumexp(f, j);
    for (std::size_t m = j; m < n; ++m) g[m] += std::exp(f[m] - lse);
    g[j] -= 1.0;
  }
}

}  // namespace detail

// Probability of the permutation under the score vector. pi[j] is the
// zero-based index of the instance placed at position j.
inline double permutation_probability(const std::vector<double>& scores,
                                      const std::vector<std::size_t>& pi) {
  require(scores.size() >= 2, "permutation_probability: need n >= 2");
  require(pi.size() == scores.size(),
          "permutation_probability: permutation length mismatch");
  std::vector<bool> seen(scores.size(), false);
  for (std::size_t p : pi) {
    require(p < scores.size() && !seen[p],
            "permutation_probability: not a permutation");
    seen[p] = true;
  }
  for (double s : scores) {
    require(std::isfinite(s), "permutation_probability: non-finite score");
  }
  std::vector<double> ordered(scores.size());
  for (std::size_t j = 0; j < pi.size(); ++j) ordered[j] = scores[pi[j]];
  double log_p = 0.0;
  for (std::size_t j = 0; j + 1 < ordered.size(); ++j) {
    log_p += ordered[j] - detail::logsumexp(ordered, j);
  }
  return std::exp(log_p);
}

// Cross entropy between a full ground-truth distribution over all n!
// permutations and the model's permutation probabilities. Permutations are
// indexed in lexicographic order of their position vectors. Restricted to
// n <= 6; this exists as an oracle for dil_loss, not a training path.
inline double list_loss_general(const std::vector<double>& scores,
                                const std::vector<double>& ground_truth) {
  const std::size_t n = scores.size();
  require(n >= 2 && n <= 6, "list_loss_general: n must be in [2, 6]");
  std::size_t factorial = 1;
  for (std::size_t k = 2; k <= n; ++k) factorial *= k;
  require(ground_truth.size() == factorial,
          "list_loss_general: ground truth must cover all n! permutations");
  double sum = 0.0;
  for (double p : ground_truth) {
    require(p >= 0.0, "list_loss_general: negative ground-truth probability");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-9,
          "list_loss_general: ground truth is not a distribution");

  std::vector<std::size_t> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = i;
  double loss = 0.0;
  std::size_t index = 0;
  do {
    if (ground_truth[index] > 0.0) {
      loss -= ground_truth[index] * std::log(permutation_probability(scores, pi));
    }
    ++index;
  } while (std::next_permutation(pi.begin(), pi.end()));
  return loss;
}

// Closed-form list loss for a three-element list ordered best to worst:
// -fi - fj + log(e^fi + e^fj + e^fk) + log(e^fj + e^fk).
inline double dil_loss(double fi, double fj, double fk) {
  require(std::isfinite(fi) && std::isfinite(fj) && std::isfinite(fk),
          "dil_loss: non-finite input");
  const double f[3] = {fi, fj, fk};
  return detail::ordered_list_loss(std::span<const double>(f, 3));
}

namespace detail {

inline void validate_lists(const Dataset& ds,
                           std::span<const RankList> lists) {
  for (const RankList& l : lists) {
    require(l.ids.size() >= 2, "rank list needs at least 2 images");
    for (int id : l.ids) ds.record(id);
    require(l.uncertainty >= 0.0 && l.uncertainty <= 1.0,
            "list uncertainty outside [0, 1]");
  }
}

template <typename Model>
double list_loss_sum(const Model& model, std::span<const RankList> batch,
                     const Dataset& ds, int threads) {
  const std::size_t chunks = (batch.size() + kGradChunk - 1) / kGradChunk;
  std::vector<double> chunk_loss(chunks, 0.0);
  parallel_chunks(batch.size(), kGradChunk, threads,
                  [&](std::size_t c, std::size_t lo, std::size_t hi) {
                    double acc = 0.0;
                    std::vector<double> f;
                    for (std::size_t n = lo; n < hi; ++n) {
                      const RankList& l = batch[n];
                      const double w = 1.0 - l.uncertainty;
                      if (w == 0.0) continue;
                      f.resize(l.ids.size());
                      for (std::size_t j = 0; j < l.ids.size(); ++j) {
                        f[j] = model.forward(
                            ds.records[static_cast<std::size_t>(l.ids[j])].features);
                      }
                      acc += w * ordered_list_loss(f);
                    }
                    chunk_loss[c] = acc;
                  });
  double total = 0.0;
  for (double l : chunk_loss) total += l;
  return total;
}

template <typename Model>
double list_gradient_sum(const Model& model, std::span<const RankList> batch,
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
        double acc = 0.0;
        std::vector<double> f, score_grad;
        std::vector<typename Model::Scratch> scratch;
        for (std::size_t n = lo; n < hi; ++n) {
          const RankList& l = batch[n];
          const double w = 1.0 - l.uncertainty;
          if (w == 0.0) continue;
          const std::size_t k = l.ids.size();
          f.resize(k);
          if (scratch.size() < k) scratch.resize(k);
          for (std::size_t j = 0; j < k; ++j) {
            f[j] = model.forward(
                ds.records[static_cast<std::size_t>(l.ids[j])].features,
                scratch[j]);
          }
          acc += w * ordered_list_loss(f);
          ordered_list_score_grad(f, score_grad);
          for (std::size_t j = 0; j < k; ++j) {
            model.backward(scratch[j], w * score_grad[j], g);
          }
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

inline std::vector<RankList> lists_from_dils(const std::vector<Dil>& dils) {
  std::vector<RankList> lists;
  lists.reserve(dils.size());
  for (const Dil& d : dils) {
    lists.push_back({{d.first, d.second, d.third}, d.uncertainty});
  }
  return lists;
}

}  // namespace detail

// Uncertainty-weighted listwise batch loss.
template <typename Model>
double dil_batch_loss(const Model& model, std::span<const Dil> batch,
                      const Dataset& ds) {
  require(!batch.empty(), "dil_batch_loss: empty batch");
  const auto lists = detail::lists_from_dils(
      std::vector<Dil>(batch.begin(), batch.end()));
  detail::validate_lists(ds, lists);
  return detail::list_loss_sum(model, lists, ds, 1);
}

template <typename Model>
std::vector<double> dil_batch_gradient(const Model& model,
                                       std::span<const Dil> batch,
                                       const Dataset& ds, int threads = 1) {
  require(!batch.empty(), "dil_batch_gradient: empty batch");
  const auto lists = detail::lists_from_dils(
      std::vector<Dil>(batch.begin(), batch.end()));
  detail::validate_lists(ds, lists);
  std::vector<double> grad(model.parameters().size(), 0.0);
  detail::list_gradient_sum(model, lists, ds, grad, threads);
  return grad;
}

// Listwise training over generic ranked lists; shares the optimizer,
// source-level validation split and snapshot rule with pairwise training.
template <typename Model>
TrainResult<Model> train_lists(const Dataset& ds,
                               const std::vector<RankList>& lists, Model model,
                               const TrainConfig& cfg, int threads = 1) {
  detail::validate_lists(ds, lists);
  return detail::train_ranker(
      ds, lists, std::move(model), cfg,
      [&ds](const auto& m, std::span<const RankList> ex, int t) {
        return detail::list_loss_sum(m, ex, ds, t);
      },
      [&ds](const auto& m, std::span<const RankList> ex, std::vector<double>& g,
            int t) { return detail::list_gradient_sum(m, ex, ds, g, t); },
      [](const RankList& l, auto&& fn) {
        for (int id : l.ids) fn(id);
      },
      threads);
}

template <typename Model>
TrainResult<Model> train_list(const Dataset& ds, const std::vector<Dil>& dils,
                              Model model, const TrainConfig& cfg,
                              int threads = 1) {
  require(!dils.empty(), "train_list: no lists");
  return train_lists(ds, detail::lists_from_dils(dils), std::move(model), cfg,
                     threads);
}

}  // namespace rankiq
