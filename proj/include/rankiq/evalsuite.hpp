// The five evaluation criteria: SRCC, PLCC with logistic remapping, the
// pristine/distorted discriminability test, the listwise ranking consistency
// test, the pairwise preference consistency test, and the resampled-session
// protocol reporting median correlations per distortion type.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rankiq/dataset.hpp"
#include "rankiq/froracles.hpp"
#include "rankiq/pairgen.hpp"

namespace rankiq {

// Fractional (average) ranks, 1-based.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "pearson: length mismatch");
  require(a.size() >= 2, "pearson: need at least 2 points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  require(saa > 0.0 && sbb > 0.0, "pearson: constant input vector");
  return sab / std::sqrt(saa * sbb);
}

// Spearman rank correlation. Tie-free inputs take the exact classical
// formula on rank differences; ties fall back to Pearson over fractional
// ranks, which reduces to the same value when no ties exist.
inline double srcc(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "srcc: length mismatch");
  require(a.size() >= 2, "srcc: need at least 2 points");
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  const auto tied = [](const std::vector<double>& r) {
    for (double v : r) {
      if (v != std::floor(v)) return true;
    }
    return false;
  };
  const auto constant = [](std::span<const double> v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] != v[0]) return false;
    }
    return true;
  };
  require(!constant(a) && !constant(b), "srcc: constant input vector");
  if (!tied(ra) && !tied(rb)) {
    const double n = static_cast<double>(a.size());
    double sum_d2 = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      const double d = ra[i] - rb[i];
      sum_d2 += d * d;
    }
    return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
  }
  return pearson(ra, rb);
}

// Pearson correlation, optionally after remapping predictions through a
// 4-parameter logistic fitted on the same points.
inline double plcc(std::span<const double> predictions,
                   std::span<const double> mos, bool remap) {
  require(predictions.size() == mos.size(), "plcc: length mismatch");
  if (!remap) return pearson(predictions, mos);
  require(predictions.size() >= 5, "plcc: remapping needs at least 5 points");
  const LogisticParams params =
      fit_logistic(std::vector<double>(predictions.begin(), predictions.end()),
                   std::vector<double>(mos.begin(), mos.end()));
  std::vector<double> remapped(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    remapped[i] = params.evaluate(predictions[i]);
  }
  return pearson(remapped, mos);
}

// --------------------------------------------------------------------------
// D-test: best pristine/distorted classification rate over all thresholds.

struct DTestResult {
  double d = 0.0;
  double threshold = 0.0;  // first threshold attaining d, candidates ascending
};

inline DTestResult d_test(std::span<const double> pristine_scores,
                          std::span<const double> distorted_scores) {
  require(!pristine_scores.empty() && !distorted_scores.empty(),
          "d_test: empty class");
  std::vector<double> p(pristine_scores.begin(), pristine_scores.end());
  std::vector<double> d(distorted_scores.begin(), distorted_scores.end());
  std::sort(p.begin(), p.end());
  std::sort(d.begin(), d.end());

  std::vector<double> uniq;
  uniq.reserve(p.size() + d.size());
  std::merge(p.begin(), p.end(), d.begin(), d.end(), std::back_inserter(uniq));
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  }
  candidates.push_back(std::numeric_limits<double>::infinity());

  const double np = static_cast<double>(p.size());
  const double nd = static_cast<double>(d.size());
  DTestResult best{-1.0, 0.0};
  for (double t : candidates) {
    const double pc =
        static_cast<double>(p.end() - std::upper_bound(p.begin(), p.end(), t));
    const double dc =
        static_cast<double>(std::upper_bound(d.begin(), d.end(), t) - d.begin());
    const double r = 0.5 * (pc / np + dc / nd);
    if (r > best.d) best = {r, t};
  }
  return best;
}

// --------------------------------------------------------------------------
// L-test: mean rank consistency between distortion levels and model scores
// over (source, distortion type) groups. Scores are negated before the
// correlation so that a model whose score drops monotonically with the
// level scores +1. Groups with constant scores contribute 0.

inline double l_test(const Dataset& ds, std::span<const double> model_scores) {
  require(model_scores.size() == ds.size(), "l_test: score vector size mismatch");
  std::map<std::pair<int, std::string>, std::vector<std::pair<int, double>>>
      groups;
  for (const auto& r : ds.records) {
    if (r.distortion.is_pristine()) continue;
    groups[{r.source_id, r.distortion.tag}].emplace_back(
        r.level, model_scores[static_cast<std::size_t>(r.id)]);
  }
  require(!groups.empty(), "l_test: no distorted records");
  double acc = 0.0;
  for (auto& [key, members] : groups) {
    require(members.size() >= 2, "l_test: group with fewer than 2 levels");
    std::sort(members.begin(), members.end());
    std::vector<double> levels, neg_scores;
    for (const auto& [level, score] : members) {
      levels.push_back(static_cast<double>(level));
      neg_scores.push_back(-score);
    }
    const bool constant = std::all_of(
        neg_scores.begin(), neg_scores.end(),
        [&](double v) { return v == neg_scores.front(); });
    acc += constant ? 0.0 : srcc(levels, neg_scores);
  }
  return acc / static_cast<double>(groups.size());
}

// --------------------------------------------------------------------------
// P-test: fraction of pairs whose preference the model reproduces. Score
// ties count as incorrect.

struct PTestResult {
  double p = 0.0;
  long long correct = 0;    // M_c
  long long incorrect = 0;  // M_i
};

inline PTestResult p_test(std::span<const Dip> dips,
                          std::span<const double> model_scores) {
  require(!dips.empty(), "p_test: empty pair set");
  PTestResult r;
  for (const Dip& d : dips) {
    require(d.better >= 0 && static_cast<std::size_t>(d.better) < model_scores.size() &&
                d.worse >= 0 && static_cast<std::size_t>(d.worse) < model_scores.size(),
            "p_test: pair references unknown id");
    const double si = model_scores[static_cast<std::size_t>(d.better)];
    const double sj = model_scores[static_cast<std::size_t>(d.worse)];
    const bool concordant = d.label >= 0.5 ? si > sj : sj > si;
    if (concordant) ++r.correct;
  }
  r.incorrect = static_cast<long long>(dips.size()) - r.correct;
  r.p = static_cast<double>(r.correct) / static_cast<double>(dips.size());
  return r;
}

// --------------------------------------------------------------------------
// Session protocol: repeated random source splits; the logistic remap is
// fitted on the fit side and correlations are evaluated on the held-out
// side; medians are reported per distortion type and overall ("all").

struct SessionSummary {
  std::map<std::string, double> srcc_median;
  std::map<std::string, double> plcc_median;
};

inline SessionSummary session_protocol(const Dataset& ds,
                                       std::span<const double> model_scores,
                                       int sessions, double split,
                                       std::uint64_t seed, bool remap = true,
                                       int threads = 1) {
  require(model_scores.size() == ds.size(),
          "session_protocol: score vector size mismatch");
  require(sessions >= 1, "session_protocol: sessions must be >= 1");
  require(split >= 0.0 && split < 1.0,
          "session_protocol: split must be in [0, 1)");
  require(!remap || split > 0.0,
          "session_protocol: remapping needs a nonempty fit side");

  std::set<int> source_set;
  for (const auto& r : ds.records) {
    if (r.mos) source_set.insert(r.source_id);
  }
  require(source_set.size() >= 2, "session_protocol: need MOS on >= 2 sources");
  const std::vector<int> all_sources(source_set.begin(), source_set.end());
  const long long s = static_cast<long long>(all_sources.size());
  const long long n_fit = split == 0.0
                              ? 0
                              : std::clamp<long long>(
                                    std::llround(split * static_cast<double>(s)),
                                    1, s - 1);

  std::vector<std::string> group_names = ds.distortion_tags();
  group_names.push_back("all");

  const std::size_t g = group_names.size();
  std::vector<double> srcc_slots(static_cast<std::size_t>(sessions) * g);
  std::vector<double> plcc_slots(static_cast<std::size_t>(sessions) * g);

  parallel_for(static_cast<std::size_t>(sessions), threads, [&](std::size_t session) {
    Rng rng(mix_seed(seed, 0x5e55ULL + session));
    std::vector<int> sources = all_sources;
    rng.shuffle(sources);
    const std::set<int> fit_sources(sources.begin(), sources.begin() + n_fit);

    for (std::size_t gi = 0; gi < g; ++gi) {
      const std::string& tag = group_names[gi];
      std::vector<double> fit_pred, fit_mos, test_pred, test_mos;
      for (const auto& r : ds.records) {
        if (!r.mos) continue;
        if (tag != "all" && r.distortion.tag != tag) continue;
        if (fit_sources.count(r.source_id)) {
          fit_pred.push_back(model_scores[static_cast<std::size_t>(r.id)]);
          fit_mos.push_back(*r.mos);
        } else {
          test_pred.push_back(model_scores[static_cast<std::size_t>(r.id)]);
          test_mos.push_back(*r.mos);
        }
      }
      const std::size_t slot = session * g + gi;
      srcc_slots[slot] = std::numeric_limits<double>::quiet_NaN();
      plcc_slots[slot] = std::numeric_limits<double>::quiet_NaN();
      try {
        srcc_slots[slot] = srcc(test_pred, test_mos);
      } catch (const Error&) {
      }
      try {
        if (!remap) {
          plcc_slots[slot] = pearson(test_pred, test_mos);
        } else {
          const LogisticParams params = fit_logistic(fit_pred, fit_mos);
          std::vector<double> remapped(test_pred.size());
          for (std::size_t i = 0; i < test_pred.size(); ++i) {
            remapped[i] = params.evaluate(test_pred[i]);
          }
          plcc_slots[slot] = pearson(remapped, test_mos);
        }
      } catch (const Error&) {
      }
    }
  });

  SessionSummary out;
  for (std::size_t gi = 0; gi < g; ++gi) {
    std::vector<double> sv, pv;
    for (int session = 0; session < sessions; ++session) {
      sv.push_back(srcc_slots[static_cast<std::size_t>(session) * g + gi]);
      pv.push_back(plcc_slots[static_cast<std::size_t>(session) * g + gi]);
    }
    out.srcc_median[group_names[gi]] = median_of(sv);
    out.plcc_median[group_names[gi]] = median_of(pv);
  }
  return out;
}

// --------------------------------------------------------------------------
// Aggregate report.

struct EvalReport {
  std::optional<DTestResult> d;
  std::optional<double> l_s;
  std::optional<PTestResult> p;
  std::map<std::string, double> srcc_median;
  std::map<std::string, double> plcc_median;
  int session_count = 0;
  double split_fraction = 0.0;
  std::uint64_t seed = 0;
};

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["D"] = r.d ? nlohmann::json(r.d->d) : nlohmann::json();
  j["D_threshold"] = r.d ? nlohmann::json(r.d->threshold) : nlohmann::json();
  j["L_s"] = r.l_s ? nlohmann::json(*r.l_s) : nlohmann::json();
  if (r.p) {
    j["P"] = r.p->p;
    j["M_c"] = r.p->correct;
    j["M_i"] = r.p->incorrect;
  } else {
    j["P"] = nullptr;
    j["M_c"] = nullptr;
    j["M_i"] = nullptr;
  }
  j["srcc_median"] = r.srcc_median.empty() ? nlohmann::json() : nlohmann::json(r.srcc_median);
  j["plcc_median"] = r.plcc_median.empty() ? nlohmann::json() : nlohmann::json(r.plcc_median);
  j["session_count"] = r.session_count;
  j["split_fraction"] = r.split_fraction;
  j["seed"] = r.seed;
  return j;
}

}  // namespace rankiq
