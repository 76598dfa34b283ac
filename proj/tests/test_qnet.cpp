#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rankiq/qnet.hpp"

using namespace rankiq;

namespace {

std::vector<double> random_input(Rng& rng, int dim) {
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Central finite differences of upstream * f(x) w.r.t. every parameter.
std::vector<double> fd_gradient(QNetModel model, const std::vector<double>& x,
                                double upstream, double h) {
  std::vector<double> g(model.params.size());
  for (std::size_t p = 0; p < model.params.size(); ++p) {
    const double keep = model.params[p];
    model.params[p] = keep + h;
    const double up = upstream * model.forward(x);
    model.params[p] = keep - h;
    const double down = upstream * model.forward(x);
    model.params[p] = keep;
    g[p] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-5});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// The finite-difference probe needs pre-activations away from the ReLU kink;
// resample the input until the margin holds.
std::vector<double> kink_free_input(const QNetModel& model, Rng& rng,
                                    double margin = 1e-4) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    const auto x = random_input(rng, model.input_dim());
    QNetModel::Scratch ws;
    model.forward(x, ws);
    double closest = 1e300;
    for (std::size_t l = 0; l + 1 < ws.pre.size(); ++l) {
      for (double v : ws.pre[l]) closest = std::min(closest, std::abs(v));
    }
    if (closest > margin) return x;
  }
  FAIL("could not find a kink-free input");
  return {};
}

}  // namespace

TEST_CASE("init produces the parameter count implied by the dims") {
  const std::vector<int> dims{16, 256, 128, 3, 1};
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    expected += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  }
  CHECK(expected == 37639);
  const QNetModel m = qnet_init(dims, 7);
  CHECK(m.params.size() == expected);

  const QNetModel small = qnet_init({5, 1}, 7);
  CHECK(small.params.size() == 6);
}

TEST_CASE("init is deterministic per seed and validates dims") {
  const QNetModel a = qnet_init({8, 4, 1}, 11);
  const QNetModel b = qnet_init({8, 4, 1}, 11);
  CHECK(a.params == b.params);
  const QNetModel c = qnet_init({8, 4, 1}, 12);
  CHECK(a.params != c.params);

  CHECK_THROWS_WITH(qnet_init({8, 0, 1}, 1),
                    Catch::Matchers::ContainsSubstring("non-positive"));
  CHECK_THROWS_AS(qnet_init({8, 4, 2}, 1), Error);
  CHECK_THROWS_AS(qnet_init({8}, 1), Error);
}

TEST_CASE("forward of an all-zero model is zero") {
  QNetModel m = qnet_init({6, 4, 1}, 3);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  Rng rng(1);
  CHECK(m.forward(random_input(rng, 6)) == 0.0);
}

TEST_CASE("linear model forward is the dot product") {
  LinearModel lin(2);
  lin.params = {1.0, 2.0};
  const std::vector<double> x{3.0, 4.0};
  CHECK(lin.forward(x) == 11.0);
}

TEST_CASE("forward is pure") {
  const QNetModel m = qnet_init({8, 4, 1}, 5);
  Rng rng(2);
  const auto x = random_input(rng, 8);
  CHECK(m.forward(x) == m.forward(x));
  CHECK_THROWS_WITH(m.forward(random_input(rng, 7)),
                    Catch::Matchers::ContainsSubstring("dimension"));
}

TEST_CASE("linear gradient is the input itself") {
  LinearModel lin(3);
  lin.params = {0.5, -0.25, 2.0};
  const std::vector<double> x{1.0, 2.0, 3.0};
  std::vector<double> g(3, 0.0);
  lin.add_gradient(x, 1.0, g);
  CHECK(g == x);
  std::vector<double> gz(3, 0.0);
  lin.add_gradient(x, 0.0, gz);
  CHECK(gz == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(31);
  const QNetModel m = qnet_init({6, 8, 5, 1}, 13);
  const auto x = kink_free_input(m, rng);
  const double upstream = 1.7;
  std::vector<double> analytic(m.params.size(), 0.0);
  m.add_gradient(x, upstream, analytic);
  const auto fd = fd_gradient(m, x, upstream, 1e-5);
  CHECK(max_rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("gradient check over 20 random triples") {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const QNetModel m = qnet_init({5, 7, 4, 1}, 100 + trial);
    const auto x = kink_free_input(m, rng);
    const double upstream = rng.uniform(-2.0, 2.0);
    std::vector<double> analytic(m.params.size(), 0.0);
    m.add_gradient(x, upstream, analytic);
    const auto fd = fd_gradient(m, x, upstream, 1e-5);
    CHECK(max_rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("scaling the output layer scales the score") {
  Rng rng(33);
  QNetModel m = qnet_init({6, 8, 3, 1}, 21);
  const auto x = random_input(rng, 6);
  const double before = m.forward(x);
  const std::size_t off = m.weight_offset(m.layer_count() - 1);
  for (std::size_t p = off; p < m.params.size(); ++p) m.params[p] *= 2.5;
  CHECK(m.forward(x) == Catch::Approx(2.5 * before).epsilon(1e-12));
}

TEST_CASE("models survive a save/load round trip bit-exactly") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rankiq_qnet";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(34);
  const QNetModel m = qnet_init({7, 6, 1}, 55);
  save_model(m, (dir / "net.json").string());
  const AnyModel back = load_model((dir / "net.json").string());
  REQUIRE(std::holds_alternative<QNetModel>(back));
  for (int i = 0; i < 100; ++i) {
    const auto x = random_input(rng, 7);
    CHECK(m.forward(x) == model_forward(back, x));
  }

  LinearModel lin(4);
  for (double& w : lin.params) w = rng.normal();
  save_model(lin, (dir / "lin.json").string());
  const AnyModel lin_back = load_model((dir / "lin.json").string());
  REQUIRE(std::holds_alternative<LinearModel>(lin_back));
  CHECK(std::get<LinearModel>(lin_back).params == lin.params);
}

TEST_CASE("load_model rejects truncated and inconsistent files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rankiq_qnet_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const QNetModel m = qnet_init({4, 3, 1}, 2);
  save_model(m, (dir / "net.json").string());
  std::string text;
  {
    std::ifstream in(dir / "net.json");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(dir / "trunc.json");
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_WITH(load_model((dir / "trunc.json").string()),
                    Catch::Matchers::ContainsSubstring("malformed"));

  // Declared dims inconsistent with the stored weights.
  auto pos = text.find("\"layer_dims\"");
  REQUIRE(pos != std::string::npos);
  std::string bad = text;
  bad.replace(bad.find("[", pos), bad.find("]", pos) - bad.find("[", pos) + 1,
              "[4,5,1]");
  {
    std::ofstream out(dir / "baddims.json");
    out << bad;
  }
  CHECK_THROWS_WITH(load_model((dir / "baddims.json").string()),
                    Catch::Matchers::ContainsSubstring("match"));
}
