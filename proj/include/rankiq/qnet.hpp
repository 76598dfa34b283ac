// The shared-weight quality network f(x): a fully connected ReLU net with a
// single identity output, plus the bias-free linear model used for the
// convex variant. Both expose the same surface (forward, gradient
// accumulation, flat parameter vector) so the trainers are model-agnostic.
//
// Parameter layout per layer: weight matrix row-major (out x in), then bias.
// Model files are JSON with fields layer_dims, weights, biases, meta.
#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rankiq/common.hpp"

namespace rankiq {

struct QNetModel {
  std::vector<int> layer_dims;  // input, hidden..., 1
  std::vector<double> params;

  struct Scratch {
    std::vector<std::vector<double>> act;  // act[0] = input
    std::vector<std::vector<double>> pre;  // pre-activation per layer
  };

  int input_dim() const { return layer_dims.front(); }
  std::size_t layer_count() const { return layer_dims.size() - 1; }

  std::size_t weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
      off += static_cast<std::size_t>(layer_dims[l]) * layer_dims[l + 1] +
             layer_dims[l + 1];
    }
    return off;
  }

  static std::size_t param_count_for(const std::vector<int>& dims) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      n += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
    }
    return n;
  }

  double forward(std::span<const double> x, Scratch& ws) const {
    require(static_cast<int>(x.size()) == input_dim(),
            "qnet forward: input dimension mismatch");
    const std::size_t layers = layer_count();
    ws.act.resize(layers + 1);
    ws.pre.resize(layers);
    ws.act[0].assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const int in = layer_dims[l], out = layer_dims[l + 1];
      ws.pre[l].assign(static_cast<std::size_t>(out), 0.0);
      const double* w = params.data() + off;
      const double* b = w + static_cast<std::size_t>(in) * out;
      const std::vector<double>& src = ws.act[l];
      for (int o = 0; o < out; ++o) {
        double acc = b[o];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * src[static_cast<std::size_t>(i)];
        ws.pre[l][static_cast<std::size_t>(o)] = acc;
      }
      ws.act[l + 1].resize(static_cast<std::size_t>(out));
      const bool is_output = l + 1 == layers;
      for (int o = 0; o < out; ++o) {
        const double v = ws.pre[l][static_cast<std::size_t>(o)];
        ws.act[l + 1][static_cast<std::size_t>(o)] =
            is_output ? v : (v > 0.0 ? v : 0.0);
      }
      off += static_cast<std::size_t>(in) * out + out;
    }
    return ws.act[layers][0];
  }

  double forward(std::span<const double> x) const {
    Scratch ws;
    return forward(x, ws);
  }

  // Accumulates upstream * df/dtheta into grad, reusing the activations of
  // the preceding forward call. ReLU subgradient at exactly 0 is 0.
  void backward(const Scratch& ws, double upstream,
                std::vector<double>& grad) const {
    require(grad.size() == params.size(), "qnet backward: gradient size mismatch");
    const std::size_t layers = layer_count();
    std::vector<double> delta{upstream};
    for (std::size_t l = layers; l-- > 0;) {
      const int in = layer_dims[l], out = layer_dims[l + 1];
      const std::size_t off = weight_offset(l);
      double* gw = grad.data() + off;
      double* gb = gw + static_cast<std::size_t>(in) * out;
      const double* w = params.data() + off;
      const std::vector<double>& src = ws.act[l];
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        double* grow = gw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += d * src[static_cast<std::size_t>(i)];
        gb[o] += d;
      }
      if (l == 0) break;
      std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) prev[static_cast<std::size_t>(i)] += d * row[i];
      }
      for (int i = 0; i < in; ++i) {
        if (!(ws.pre[l - 1][static_cast<std::size_t>(i)] > 0.0)) {
          prev[static_cast<std::size_t>(i)] = 0.0;
        }
      }
      delta = std::move(prev);
    }
  }

  void add_gradient(std::span<const double> x, double upstream,
                    std::vector<double>& grad) const {
    Scratch ws;
    forward(x, ws);
    backward(ws, upstream, grad);
  }

  std::vector<double>& parameters() { return params; }
  const std::vector<double>& parameters() const { return params; }
};

inline QNetModel qnet_init(const std::vector<int>& layer_dims,
                           std::uint64_t seed) {
  require(layer_dims.size() >= 2, "qnet_init: need at least input and output dims");
  for (int d : layer_dims) require(d > 0, "qnet_init: non-positive dimension");
  require(layer_dims.back() == 1, "qnet_init: output dimension must be 1");
  QNetModel m;
  m.layer_dims = layer_dims;
  m.params.assign(QNetModel::param_count_for(layer_dims), 0.0);
  Rng rng(mix_seed(seed, 0x1417ULL));
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int in = layer_dims[l], out = layer_dims[l + 1];
    const double half = std::sqrt(6.0 / (in + out));
    for (std::size_t i = 0; i < static_cast<std::size_t>(in) * out; ++i) {
      m.params[off + i] = rng.uniform(-half, half);
    }
    off += static_cast<std::size_t>(in) * out + out;  // biases stay zero
  }
  return m;
}

// Bias-free linear scorer f(x) = w . x; pairwise differences cancel any
// bias, so none is carried.
struct LinearModel {
  std::vector<double> params;

  struct Scratch {
    std::vector<double> x;
  };

  explicit LinearModel(int dim = 0) : params(static_cast<std::size_t>(dim), 0.0) {}

  int input_dim() const { return static_cast<int>(params.size()); }

  double forward(std::span<const double> x, Scratch& ws) const {
    ws.x.assign(x.begin(), x.end());
    return forward(x);
  }

  double forward(std::span<const double> x) const {
    require(x.size() == params.size(), "linear forward: input dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) acc += params[i] * x[i];
    return acc;
  }

  void backward(const Scratch& ws, double upstream,
                std::vector<double>& grad) const {
    require(grad.size() == params.size(), "linear backward: gradient size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) grad[i] += upstream * ws.x[i];
  }

  void add_gradient(std::span<const double> x, double upstream,
                    std::vector<double>& grad) const {
    require(x.size() == params.size(), "linear backward: input dimension mismatch");
    require(grad.size() == params.size(), "linear backward: gradient size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) grad[i] += upstream * x[i];
  }

  std::vector<double>& parameters() { return params; }
  const std::vector<double>& parameters() const { return params; }
};

// --------------------------------------------------------------------------
// Serialization.

using AnyModel = std::variant<LinearModel, QNetModel>;

inline double model_forward(const AnyModel& m, std::span<const double> x) {
  return std::visit([&](const auto& model) { return model.forward(x); }, m);
}

inline int model_input_dim(const AnyModel& m) {
  return std::visit([](const auto& model) { return model.input_dim(); }, m);
}

inline void save_model(const AnyModel& model, const std::string& path,
                       nlohmann::json meta = nlohmann::json::object()) {
  nlohmann::json j;
  if (std::holds_alternative<LinearModel>(model)) {
    const auto& lin = std::get<LinearModel>(model);
    meta["model_type"] = "linear";
    j["layer_dims"] = {lin.input_dim(), 1};
    j["weights"] = nlohmann::json::array({lin.params});
    j["biases"] = nlohmann::json::array({nlohmann::json::array()});
  } else {
    const auto& net = std::get<QNetModel>(model);
    meta["model_type"] = "mlp";
    j["layer_dims"] = net.layer_dims;
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
      const std::size_t in = static_cast<std::size_t>(net.layer_dims[l]);
      const std::size_t out = static_cast<std::size_t>(net.layer_dims[l + 1]);
      const std::size_t off = net.weight_offset(l);
      weights.push_back(std::vector<double>(net.params.begin() + off,
                                            net.params.begin() + off + in * out));
      biases.push_back(std::vector<double>(
          net.params.begin() + off + in * out,
          net.params.begin() + off + in * out + out));
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
  }
  j["meta"] = std::move(meta);
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  require(out.good(), "failed writing '" + path + "'");
}

inline AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("malformed model file '" + path + "': " + e.what());
  }
  try {
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    const auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
    const auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
    require(dims.size() >= 2, path + ": layer_dims needs at least 2 entries");
    for (int d : dims) require(d > 0, path + ": non-positive layer dimension");
    require(dims.back() == 1, path + ": output dimension must be 1");
    require(weights.size() == dims.size() - 1 && biases.size() == dims.size() - 1,
            path + ": layer count mismatch between dims and parameters");
    const std::string type =
        j.contains("meta") && j["meta"].contains("model_type")
            ? j["meta"]["model_type"].get<std::string>()
            : "mlp";
    if (type == "linear") {
      require(dims.size() == 2 && biases[0].empty(),
              path + ": linear model must have two dims and no bias");
      require(weights[0].size() == static_cast<std::size_t>(dims[0]),
              path + ": weight count does not match declared dims");
      LinearModel lin(dims[0]);
      lin.params = weights[0];
      for (double p : lin.params) {
        require(std::isfinite(p), path + ": non-finite parameter");
      }
      return lin;
    }
    QNetModel net;
    net.layer_dims = dims;
    net.params.reserve(QNetModel::param_count_for(dims));
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const std::size_t in = static_cast<std::size_t>(dims[l]);
      const std::size_t out = static_cast<std::size_t>(dims[l + 1]);
      require(weights[l].size() == in * out,
              path + ": weight count does not match declared dims");
      require(biases[l].size() == out,
              path + ": bias count does not match declared dims");
      net.params.insert(net.params.end(), weights[l].begin(), weights[l].end());
      net.params.insert(net.params.end(), biases[l].begin(), biases[l].end());
    }
    for (double p : net.params) {
      require(std::isfinite(p), path + ": non-finite parameter");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail("malformed model file '" + path + "': " + e.what());
  }
}

}  // namespace rankiq
