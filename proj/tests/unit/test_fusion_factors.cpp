#include "catch_amalgamated.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "gbpfusion/bp/inference.hpp"
#include "gbpfusion/fusion/graph_builder.hpp"
#include "gbpfusion/oracle/compare.hpp"
#include "gbpfusion/oracle/fusion_problem.hpp"
#include "gbpfusion/power/case_file.hpp"
#include "test_helpers.hpp"

using namespace gbpfusion;
using namespace gbpfusion::fusion;
using Catch::Approx;

namespace {

std::shared_ptr<const power::Network> case14_network() {
  std::ifstream in(testing_support::source_path("data/case14.m"));
  std::stringstream ss;
  ss << in.rdbuf();
  return std::make_shared<const power::Network>(power::parse_case_file(ss.str()));
}

struct Truth {
  power::GridState state;
  Vector x1;
  Vector x2;
};

// Physically consistent hour: load buses carry `load_scale` times their case
// load plus `solar`, everything else keeps the case file values.
Truth consistent_truth(const power::Network& net, const FusionStateLayout& layout, double load_scale,
                       const Vector& solar) {
  auto t = power::base_case_targets(net.model);
  Vector x2(layout.x2_dim());
  for (std::size_t k = 0; k < layout.num_loads(); ++k) {
    const std::size_t pos = layout.load_positions[k];
    const auto& bus = net.model.buses[pos];
    const double demand = bus.pd * load_scale + solar(static_cast<Index>(k));
    x2(FusionStateLayout::demand_index(k)) = demand;
    x2(FusionStateLayout::solar_index(k)) = solar(static_cast<Index>(k));
    t.p(static_cast<Index>(pos)) = net.model.generation_p(pos) - demand + solar(static_cast<Index>(k));
    t.q(static_cast<Index>(pos)) = net.model.generation_q(pos) - bus.qd * load_scale;
  }
  Truth truth;
  truth.state = power::solve_power_flow(net, t);
  truth.x1 = net.indexer.to_vector(truth.state);
  truth.x2 = x2;
  return truth;
}

HourlyEvidence evidence_from(const power::Network& net, const FusionStateLayout& layout, const Truth& truth,
                             std::mt19937_64& rng, double forecast_sd = 0.05) {
  std::normal_distribution<double> n(0.0, 1.0);
  HourlyEvidence ev;
  const auto nb = static_cast<Index>(net.num_buses());
  ev.y1 = power::power_flow_equations(net, truth.state, power::full_selector(net.num_buses()));
  for (Index i = 0; i < 3 * nb; ++i) ev.y1(i) += (i < 2 * nb ? 0.01 : 0.5e-3) * n(rng);
  ev.y1_available.assign(static_cast<std::size_t>(3 * nb), 1);
  ev.y2 = truth.x2;
  for (Index i = 0; i < ev.y2.size(); ++i) ev.y2(i) += 0.02 * n(rng);
  ev.y2_available.assign(static_cast<std::size_t>(layout.x2_dim()), 1);
  ev.y3_mean = truth.x2;
  for (Index i = 0; i < ev.y3_mean.size(); ++i) ev.y3_mean(i) += forecast_sd * n(rng);
  ev.y3_variance = Vector::Constant(layout.x2_dim(), forecast_sd * forecast_sd);
  ev.y3_available.assign(static_cast<std::size_t>(layout.x2_dim()), 1);
  return ev;
}

}  // namespace

TEST_CASE("FusionStateLayout on case14", "[fusion][layout]") {
  const auto net = case14_network();
  const auto layout = FusionStateLayout::for_model(net->model);
  CHECK(layout.num_loads() == 10);
  CHECK(layout.x1_dim == 27);
  CHECK(layout.x2_dim() == 20);
  CHECK(layout.entry_name(3) == "solar_bus4");
  CHECK(layout.load_slot(9) == 4);
  CHECK_THROWS_AS(FusionStateLayout::for_model(net->model, {3, 99}), ConfigError);
  CHECK_THROWS_AS(FusionStateLayout::for_model(net->model, {3, 3}), ConfigError);
}

TEST_CASE("make_state_estimation_factor", "[fusion][factors]") {
  const auto net = case14_network();
  SECTION("full selector has 42 rows with the documented noise") {
    const auto sel = power::full_selector(14);
    const auto f = make_state_estimation_factor(net, Vector::Zero(42), sel);
    CHECK(f.y().size() == 42);
    for (Index i = 0; i < 28; ++i) CHECK(f.noise()(i, i) == Approx(1e-4));
    for (Index i = 28; i < 42; ++i) CHECK(f.noise()(i, i) == Approx(0.25e-6));
    CHECK((f.noise() - Matrix(f.noise().diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("single voltage reading touches one coordinate") {
    const power::Selector sel{{power::Quantity::Vm, 3}};
    const auto f = make_state_estimation_factor(net, Vector::Ones(1), sel);
    const Matrix F = f.jacobian(net->indexer.flat_start());
    CHECK(F.rows() == 1);
    CHECK((F.array() != 0.0).count() == 1);
    CHECK(F(0, net->indexer.magnitude_index(3)) == 1.0);
  }
  SECTION("empty selector is rejected") {
    CHECK_THROWS_AS(make_state_estimation_factor(net, Vector(0), {}), ConfigError);
  }
}

TEST_CASE("make_meter_factor and make_forecast_factor", "[fusion][factors]") {
  const auto net = case14_network();
  const auto layout = FusionStateLayout::for_model(net->model);
  std::mt19937_64 rng(4);
  const Vector y2 = testing_support::random_vector(rng, 20);

  SECTION("meter noise defaults to 0.02 on all 20 entries") {
    const auto f = make_meter_factor(layout, y2, 0.02);
    CHECK((f.noise() - 4e-4 * Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-18);
  }
  SECTION("reading equal to the linearization point adds no pull") {
    const auto f = make_meter_factor(layout, y2, 0.02);
    const auto lin = bp::linearize_factor(f, y2, {20});
    CHECK(lin.h.cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("meter alone: posterior equals the readings") {
    bp::FactorGraph g;
    g.add_variable(kResourceVariable, Vector::Zero(20));
    g.add_factor(make_meter_factor(layout, y2, 0.02));
    const auto r = bp::run_inference(g, {});
    CHECK((r.marginals.at(kResourceVariable).mean - y2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.marginals.at(kResourceVariable).cov - 4e-4 * Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("forecast alone: posterior equals the forecasts") {
    bp::FactorGraph g;
    g.add_variable(kResourceVariable, Vector::Zero(20));
    g.add_factor(make_forecast_factor(layout, y2, Vector::Constant(20, 0.05 * 0.05)));
    const auto r = bp::run_inference(g, {});
    CHECK((r.marginals.at(kResourceVariable).mean - y2).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("meter and forecast: precisions add") {
    bp::FactorGraph g;
    g.add_variable(kResourceVariable, Vector::Zero(20));
    g.add_factor(make_meter_factor(layout, y2, 0.02));
    g.add_factor(make_forecast_factor(layout, Vector::Zero(20), Vector::Constant(20, 0.05 * 0.05)));
    const auto r = bp::run_inference(g, {});
    const Vector var = r.marginals.at(kResourceVariable).cov.diagonal();
    for (Index i = 0; i < 20; ++i) {
      CHECK(var(i) == Approx(1.0 / (1.0 / 4e-4 + 1.0 / 2.5e-3)).epsilon(1e-12));
      CHECK(var(i) == Approx(3.448e-4).epsilon(1e-3));
      CHECK(var(i) <= std::min(4e-4, 2.5e-3));
    }
  }
  SECTION("malformed inputs") {
    CHECK_THROWS_AS(make_meter_factor(layout, Vector::Zero(19), 0.02), ConfigError);
    CHECK_THROWS_AS(make_meter_factor(layout, y2, 0.0), ConfigError);
    CHECK_THROWS_AS(make_forecast_factor(layout, y2, Vector::Zero(20)), ConfigError);
    CHECK_THROWS_AS(make_forecast_factor(layout, y2, Vector::Constant(19, 1.0)), ConfigError);
    const std::vector<char> none(20, 0);
    CHECK_THROWS_AS(make_meter_factor(layout, y2, 0.02, &none), ConfigError);
  }
}

TEST_CASE("fusion dominance holds at any linearization", "[fusion][property]") {
  const auto net = case14_network();
  const auto layout = FusionStateLayout::for_model(net->model);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> sd(0.005, 0.2);
  for (int trial = 0; trial < 20; ++trial) {
    Vector var(20);
    for (Index i = 0; i < 20; ++i) var(i) = std::pow(sd(rng), 2);
    const double meter_sd = sd(rng);
    bp::FactorGraph g;
    g.add_variable(kResourceVariable, testing_support::random_vector(rng, 20));
    g.add_factor(make_meter_factor(layout, testing_support::random_vector(rng, 20), meter_sd));
    g.add_factor(make_forecast_factor(layout, testing_support::random_vector(rng, 20), var));
    bp::InferenceConfig cfg;
    cfg.max_outer_iters = 1;
    const auto r = bp::run_inference(g, cfg);
    const Vector post = r.marginals.at(kResourceVariable).cov.diagonal();
    for (Index i = 0; i < 20; ++i) CHECK(post(i) <= std::min(meter_sd * meter_sd, var(i)) * (1 + 1e-12));
  }
}

TEST_CASE("make_joint_factor", "[fusion][factors]") {
  const auto net = case14_network();
  const auto layout = FusionStateLayout::for_model(net->model);
  std::mt19937_64 rng(3);
  Vector solar(10);
  for (Index k = 0; k < 10; ++k) solar(k) = 0.05 + 0.01 * static_cast<double>(k);
  const Truth truth = consistent_truth(*net, layout, 0.8, solar);
  const auto f = make_joint_factor(net, layout);

  SECTION("consistent triple has zero residual") {
    Vector x(47);
    x << truth.x1, truth.x2;
    CHECK(f.evaluate(x).cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("default constraint noise") {
    CHECK((f.noise() - 1e-10 * Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.vars() == std::vector<std::string>{kGridVariable, kResourceVariable});
  }
  SECTION("x2 block is the constant +1 demand / -1 solar pattern, checked numerically") {
    Vector x(47);
    x << truth.x1, testing_support::random_vector(rng, 20);
    const Matrix Ffd = oracle::finite_difference_jacobian([&](const Vector& z) { return f.evaluate(z); }, x);
    const Matrix F = f.jacobian(x);
    CHECK((F - Ffd).cwiseAbs().maxCoeff() < 1e-6);
    for (Index k = 0; k < 10; ++k) {
      for (Index j = 0; j < 20; ++j) {
        const double expect = j == 2 * k ? 1.0 : j == 2 * k + 1 ? -1.0 : 0.0;
        CHECK(std::abs(Ffd(k, 27 + j) - expect) < 1e-8);
      }
    }
  }
  SECTION("unknown load bus") {
    FusionStateLayout bad = layout;
    bad.load_buses.back() = 42;
    CHECK_THROWS_AS(make_joint_factor(net, bad), ConfigError);
  }
}

TEST_CASE("build_fusion_graph structure and masking", "[fusion][graph]") {
  const auto net = case14_network();
  const auto layout = FusionStateLayout::for_model(net->model);
  std::mt19937_64 rng(31);
  const Truth truth = consistent_truth(*net, layout, 0.7, Vector::Constant(10, 0.04));
  HourlyEvidence ev = evidence_from(*net, layout, truth, rng);

  SECTION("all sources: two variables, four factors, five edges, a tree") {
    const auto g = build_fusion_graph(net, layout, ev);
    CHECK(g.num_variables() == 2);
    CHECK(g.num_factors() == 4);
    CHECK(g.num_edges() == 5);
    CHECK(g.is_tree());
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& e : g.edges()) edges.insert({g.factor(e.factor).id(), g.variable(e.variable).id});
    const std::set<std::pair<std::string, std::string>> expected{{"state_estimation", "x1"},
                                                                 {"joint", "x1"},
                                                                 {"joint", "x2"},
                                                                 {"smart_meter", "x2"},
                                                                 {"forecast", "x2"}};
    CHECK(edges == expected);
  }
  SECTION("meter fully masked: three factors and inference still runs") {
    std::fill(ev.y2_available.begin(), ev.y2_available.end(), 0);
    auto g = build_fusion_graph(net, layout, ev);
    CHECK(g.num_factors() == 3);
    CHECK_FALSE(g.has_factor("smart_meter"));
    CHECK(bp::run_inference(g, {}).diagnostics.converged);
  }
  SECTION("no data at all") {
    std::fill(ev.y1_available.begin(), ev.y1_available.end(), 0);
    std::fill(ev.y2_available.begin(), ev.y2_available.end(), 0);
    std::fill(ev.y3_available.begin(), ev.y3_available.end(), 0);
    CHECK_THROWS_AS(build_fusion_graph(net, layout, ev), ConfigError);
  }
  SECTION("masked values are never read") {
    // Poison everything behind a cleared flag; any read would put NaN into a
    // factor's observation and be rejected at construction.
    const std::vector<int> lost{3, 4, 9, 10};
    for (int id : lost) {
      const std::size_t pos = net->model.index_of(id);
      for (std::size_t q = 0; q < 3; ++q) {
        ev.y1_available[q * 14 + pos] = 0;
        ev.y1(static_cast<Index>(q * 14 + pos)) = std::numeric_limits<double>::quiet_NaN();
      }
      const std::size_t k = layout.load_slot(id);
      for (Index i : {FusionStateLayout::demand_index(k), FusionStateLayout::solar_index(k)}) {
        ev.y2_available[static_cast<std::size_t>(i)] = 0;
        ev.y2(i) = std::numeric_limits<double>::quiet_NaN();
      }
    }
    auto g = build_fusion_graph(net, layout, ev);
    CHECK(g.factor("state_estimation").y().size() == 30);
    CHECK(g.factor("smart_meter").y().size() == 12);
    CHECK(g.factor("state_estimation").y().allFinite());
    const auto r = bp::run_inference(g, {});
    CHECK(r.diagnostics.converged);
  }
}

TEST_CASE("fusion graph inference agrees with the stacked Gauss-Newton problem", "[fusion][oracle]") {
  const auto net = case14_network();
  const auto layout = FusionStateLayout::for_model(net->model);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 0.15);
  for (int trial = 0; trial < 5; ++trial) {
    Vector solar(10);
    for (Index k = 0; k < 10; ++k) solar(k) = u(rng);
    const Truth truth = consistent_truth(*net, layout, 0.6 + 0.1 * trial, solar);
    const HourlyEvidence ev = evidence_from(*net, layout, truth, rng);
    const auto g = build_fusion_graph(net, layout, ev);
    bp::InferenceConfig cfg;
    cfg.audit_messages = true;
    bp::FactorGraph work = g;
    const auto r = bp::run_inference(work, cfg);
    INFO("trial " << trial << " sweeps " << r.diagnostics.sweeps << " min eig " << r.diagnostics.audit.min_eigenvalue
                  << " max asym " << r.diagnostics.audit.max_asymmetry);
    CHECK(r.diagnostics.converged);
    CHECK(r.diagnostics.sweeps < 10);
    CHECK(r.diagnostics.audit.violations == 0);

    const auto problem = oracle::build_fusion_problem(net, layout, ev);
    const auto gn = oracle::gauss_newton_solve(problem, oracle::stacked_initial_state(g), cfg.tol, 50);
    CHECK(gn.converged);
    Vector bp_mean(47);
    bp_mean << r.marginals.at("x1").mean, r.marginals.at("x2").mean;
    CHECK((bp_mean - gn.x).cwiseAbs().maxCoeff() < 1e-8);

    // The generic graph-to-problem conversion agrees too.
    const auto report = oracle::compare_bp_vs_gn(g, oracle::problem_from_graph(g), cfg);
    CHECK(report.max_abs_mean_diff < 1e-8);
  }
}
