#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>
#include <set>

#include "gaussian_oracle.hpp"
#include "gbpfusion/bp/inference.hpp"
#include "gbpfusion/oracle/compare.hpp"
#include "test_helpers.hpp"

using namespace gbpfusion;
using namespace gbpfusion::bp;
using testing_support::linear_factor;
using testing_support::vec;
using Catch::Approx;

namespace {

FactorSpec scalar_prior(const std::string& id, const std::string& var, double y, double r) {
  return linear_factor(id, {var}, Matrix::Identity(1, 1), vec({y}), Matrix::Constant(1, 1, r));
}

// f(x1, x2) = x1 - x2, observed 0
FactorSpec difference_factor(const std::string& id, const std::string& a, const std::string& b, double r = 1.0) {
  Matrix A(1, 2);
  A << 1.0, -1.0;
  return linear_factor(id, {a, b}, A, vec({0.0}), Matrix::Constant(1, 1, r));
}

}  // namespace

TEST_CASE("linearize_factor: identity factor", "[linearize]") {
  FactorSpec f = linear_factor("f", {"x"}, Matrix::Identity(2, 2), vec({2.0, 0.0}), 4.0 * Matrix::Identity(2, 2));
  const auto lin = linearize_factor(f, vec({0.0, 0.0}), {2});
  CHECK((lin.J - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(lin.h(0) == Approx(0.5));
  CHECK(lin.h(1) == Approx(0.0).margin(1e-15));
}

TEST_CASE("linearize_factor: scalar square with analytic and numeric Jacobian", "[linearize]") {
  auto f = [](const Vector& x) { return Vector(x.array().square()); };
  FactorSpec analytic("sq", {"x"}, f, vec({5.0}), Matrix::Identity(1, 1),
                      [](const Vector& x) { return Matrix(Matrix::Constant(1, 1, 2.0 * x(0))); });
  FactorSpec numeric("sq", {"x"}, f, vec({5.0}), Matrix::Identity(1, 1));
  for (const FactorSpec* spec : {&analytic, &numeric}) {
    const auto lin = linearize_factor(*spec, vec({2.0}), {1});
    CHECK(lin.J(0, 0) == Approx(16.0).epsilon(1e-9));
    CHECK(lin.h(0) == Approx(4.0).epsilon(1e-9));
  }
}

TEST_CASE("linearize_factor: non-finite evaluation names the factor", "[linearize][errors]") {
  FactorSpec f("bad_factor", {"x"}, [](const Vector& x) { return Vector(x.array().log()); }, vec({0.0}),
               Matrix::Identity(1, 1));
  try {
    (void)linearize_factor(f, vec({-1.0}), {1});
    FAIL("expected LinearizationError");
  } catch (const LinearizationError& e) {
    CHECK(e.factor_id() == "bad_factor");
  }
  CHECK_THROWS_AS(linearize_factor(f, vec({1.0, 2.0}), {2}), Error);
}

TEST_CASE("FactorSpec rejects malformed noise and variable lists", "[factor][errors]") {
  auto id = [](const Vector& x) { return x; };
  CHECK_THROWS_AS(FactorSpec("f", {}, id, vec({0.0}), Matrix::Identity(1, 1)), ConfigError);
  CHECK_THROWS_AS(FactorSpec("f", {"a", "a"}, id, vec({0.0, 0.0}), Matrix::Identity(2, 2)), ConfigError);
  CHECK_THROWS_AS(FactorSpec("f", {"a"}, id, vec({0.0}), Matrix::Identity(2, 2)), ConfigError);
  CHECK_THROWS_AS(FactorSpec("f", {"a"}, id, vec({0.0}), Matrix::Zero(1, 1)), ConfigError);
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(FactorSpec("f", {"a"}, id, vec({0.0, 0.0}), asym), ConfigError);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(FactorSpec("f", {"a"}, id, vec({0.0, 0.0}), indefinite), ConfigError);
}

TEST_CASE("FactorGraph rejects unknown variables and duplicate ids", "[graph][errors]") {
  FactorGraph g;
  g.add_variable("x", vec({0.0}));
  CHECK_THROWS_AS(g.add_variable("x", vec({0.0})), GraphError);
  CHECK_THROWS_AS(g.add_factor(scalar_prior("p", "nope", 0.0, 1.0)), GraphError);
  g.add_factor(scalar_prior("p", "x", 0.0, 1.0));
  CHECK_THROWS_AS(g.add_factor(scalar_prior("p", "x", 0.0, 1.0)), GraphError);
  CHECK_THROWS_AS(g.edge_between("p", "y"), GraphError);
}

TEST_CASE("message_variable_to_factor sums the other incoming messages", "[messages]") {
  FactorGraph g;
  g.add_variable("x", vec({0.0}));
  g.add_factor(scalar_prior("a", "x", 0.0, 1.0));
  g.add_factor(scalar_prior("b", "x", 0.0, 1.0));
  g.add_factor(scalar_prior("c", "x", 0.0, 1.0));
  g.reset_messages();

  SECTION("leaf variable gives the zero message") {
    FactorGraph leaf;
    leaf.add_variable("x", vec({0.0}));
    leaf.add_factor(scalar_prior("a", "x", 0.0, 1.0));
    leaf.reset_messages();
    const auto m = message_variable_to_factor(leaf, "x", "a");
    CHECK(m.h(0) == 0.0);
    CHECK(m.J(0, 0) == 0.0);
  }
  SECTION("single other message is forwarded") {
    g.messages().to_variable(g.edge_between("a", "x")) = {vec({4.0}), Matrix::Constant(1, 1, 2.0)};
    const auto m = message_variable_to_factor(g, "x", "c");
    CHECK(m.h(0) == 4.0);
    CHECK(m.J(0, 0) == 2.0);
  }
  SECTION("two other messages are added") {
    g.messages().to_variable(g.edge_between("a", "x")) = {vec({1.0}), Matrix::Constant(1, 1, 1.0)};
    g.messages().to_variable(g.edge_between("b", "x")) = {vec({3.0}), Matrix::Constant(1, 1, 2.0)};
    g.messages().to_variable(g.edge_between("c", "x")) = {vec({100.0}), Matrix::Constant(1, 1, 100.0)};
    const auto m = message_variable_to_factor(g, "x", "c");
    CHECK(m.h(0) == 4.0);
    CHECK(m.J(0, 0) == 3.0);
  }
}

TEST_CASE("message_factor_to_variable: unary factor passes its linearization", "[messages]") {
  FactorGraph g;
  g.add_variable("x", vec({0.0, 0.0}));
  Matrix R(2, 2);
  R << 2.0, 0.3, 0.3, 1.0;
  g.add_factor(linear_factor("u", {"x"}, Matrix::Identity(2, 2), vec({1.0, -2.0}), R));
  g.reset_messages();
  const auto lin = linearize_factor(g, 0);
  const auto m = message_factor_to_variable(g, "u", "x", lin);
  CHECK((m.J - lin.J).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m.h - lin.h).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("message_factor_to_variable: pairwise constraint", "[messages]") {
  FactorGraph g;
  g.add_variable("x1", vec({0.0}));
  g.add_variable("x2", vec({0.0}));
  g.add_factor(difference_factor("f", "x1", "x2"));
  g.reset_messages();
  const auto lin = linearize_factor(g, 0);

  SECTION("informative incoming message") {
    g.messages().to_factor(g.edge_between("f", "x2")) = {vec({1.0}), Matrix::Constant(1, 1, 1.0)};
    const auto m = message_factor_to_variable(g, "f", "x1", lin);
    CHECK(m.h(0) == Approx(0.5).epsilon(1e-10));
    CHECK(m.J(0, 0) == Approx(0.5).epsilon(1e-10));

    // Gaussian conditioning oracle: joint of the factor and the x2 message,
    // then marginalize x2.
    testing_support::JointGaussian joint(2);
    Matrix A(1, 2);
    A << 1.0, -1.0;
    joint.add({{0, 1}, A, vec({0.0}), Matrix::Identity(1, 1)});
    joint.add({{1}, Matrix::Identity(1, 1), vec({1.0}), Matrix::Identity(1, 1)});
    const auto [h_ref, J_ref] = joint.marginal_information({0});
    CHECK(m.h(0) == Approx(h_ref(0)).epsilon(1e-10));
    CHECK(m.J(0, 0) == Approx(J_ref(0, 0)).epsilon(1e-10));
  }
  SECTION("zero incoming message cancels") {
    const auto m = message_factor_to_variable(g, "f", "x1", lin);
    CHECK(std::abs(m.h(0)) < 1e-11);
    CHECK(std::abs(m.J(0, 0)) < 1e-11);
  }
}

TEST_CASE("message_factor_to_variable matches Gaussian conditioning on a random 3-variable factor", "[messages]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Index> dims{2, 3, 1};
    const Matrix A = testing_support::random_matrix(rng, 7, 6);
    const Vector y = testing_support::random_vector(rng, 7);
    const Matrix R = testing_support::random_spd(rng, 7);
    FactorGraph g;
    g.add_variable("a", Vector::Zero(2));
    g.add_variable("b", Vector::Zero(3));
    g.add_variable("c", Vector::Zero(1));
    g.add_factor(linear_factor("f", {"a", "b", "c"}, A, y, R));
    g.reset_messages();
    const Matrix Jb = testing_support::random_spd(rng, 3);
    const Vector hb = testing_support::random_vector(rng, 3);
    const Matrix Jc = testing_support::random_spd(rng, 1);
    const Vector hc = testing_support::random_vector(rng, 1);
    g.messages().to_factor(g.edge_between("f", "b")) = {hb, Jb};
    g.messages().to_factor(g.edge_between("f", "c")) = {hc, Jc};
    const auto m = message_factor_to_variable(g, "f", "a", linearize_factor(g, 0));

    testing_support::JointGaussian joint(6);
    joint.add({{0, 1, 2, 3, 4, 5}, A, y, R});
    // Information messages written as pseudo-observations: J = L L^T.
    joint.Lambda.block(2, 2, 3, 3) += Jb;
    joint.eta.segment(2, 3) += hb;
    joint.Lambda(5, 5) += Jc(0, 0);
    joint.eta(5) += hc(0);
    const auto [h_ref, J_ref] = joint.marginal_information({0, 1});
    CHECK((m.J - J_ref).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, J_ref.cwiseAbs().maxCoeff()));
    CHECK((m.h - h_ref).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, h_ref.cwiseAbs().maxCoeff()));
    CHECK(asymmetry(m.J) == 0.0);
  }
}

TEST_CASE("message_factor_to_variable: singular elimination names factor and variable", "[messages][errors]") {
  // x2 enters the factor through a zero column and receives no message.
  FactorGraph g;
  g.add_variable("x1", vec({0.0}));
  g.add_variable("x2", vec({0.0}));
  Matrix A(1, 2);
  A << 1.0, 0.0;
  g.add_factor(linear_factor("f", {"x1", "x2"}, A, vec({0.0}), Matrix::Identity(1, 1)));
  g.reset_messages();
  try {
    (void)message_factor_to_variable(g, "f", "x1", linearize_factor(g, 0), 0.0);
    FAIL("expected EliminationSingularity");
  } catch (const EliminationSingularity& e) {
    CHECK(e.factor_id() == "f");
    CHECK(e.variable_id() == "x1");
  }
}

TEST_CASE("schedule_messages on trees and loops", "[schedule]") {
  SECTION("single factor, single variable") {
    FactorGraph g;
    g.add_variable("x", vec({0.0}));
    g.add_factor(scalar_prior("f", "x", 0.0, 1.0));
    const auto s = schedule_messages(g);
    CHECK_FALSE(s.loopy);
    CHECK(s.order.size() == 2);
  }
  SECTION("chain: leaf factor messages precede dependent variable messages") {
    FactorGraph g;
    g.add_variable("x1", vec({0.0}));
    g.add_variable("x2", vec({0.0}));
    g.add_factor(scalar_prior("f1", "x1", 0.0, 1.0));
    g.add_factor(difference_factor("f2", "x1", "x2"));
    g.add_factor(scalar_prior("f3", "x2", 0.0, 1.0));
    const auto s = schedule_messages(g);
    CHECK_FALSE(s.loopy);
    CHECK(s.order.size() == 2 * g.num_edges());
    auto pos = [&](const std::string& f, const std::string& v, Direction d) {
      const EdgeIndex e = g.edge_between(f, v);
      for (std::size_t i = 0; i < s.order.size(); ++i) {
        if (s.order[i].edge == e && s.order[i].direction == d) return i;
      }
      FAIL("message missing from schedule");
      return s.order.size();
    };
    CHECK(pos("f1", "x1", Direction::FactorToVariable) < pos("f2", "x1", Direction::VariableToFactor));
    CHECK(pos("f3", "x2", Direction::FactorToVariable) < pos("f2", "x2", Direction::VariableToFactor));
    // Every message comes after all of its inputs.
    std::set<std::pair<EdgeIndex, int>> done;
    for (const auto& m : s.order) {
      const Edge& edge = g.edges()[m.edge];
      if (m.direction == Direction::VariableToFactor) {
        for (EdgeIndex e : g.variable_edges(edge.variable)) {
          if (e != m.edge) CHECK(done.contains({e, 1}));
        }
      } else {
        for (EdgeIndex e : g.factor_edges(edge.factor)) {
          if (e != m.edge) CHECK(done.contains({e, 0}));
        }
      }
      done.insert({m.edge, m.direction == Direction::VariableToFactor ? 0 : 1});
    }
  }
  SECTION("three-factor cycle is loopy and sweeps every directed edge once") {
    FactorGraph g;
    g.add_variable("a", vec({0.0}));
    g.add_variable("b", vec({0.0}));
    g.add_variable("c", vec({0.0}));
    g.add_factor(difference_factor("ab", "a", "b"));
    g.add_factor(difference_factor("bc", "b", "c"));
    g.add_factor(difference_factor("ca", "c", "a"));
    const auto s = schedule_messages(g);
    CHECK(s.loopy);
    CHECK_FALSE(g.is_tree());
    std::set<std::pair<EdgeIndex, int>> seen;
    for (const auto& m : s.order) seen.insert({m.edge, static_cast<int>(m.direction)});
    CHECK(s.order.size() == 2 * g.num_edges());
    CHECK(seen.size() == 2 * g.num_edges());
  }
}

TEST_CASE("update_marginal examples", "[marginal]") {
  SECTION("precision-weighted average of two unary factors") {
    FactorGraph g;
    g.add_variable("x", vec({0.0}));
    g.add_factor(scalar_prior("a", "x", 1.0, 1.0));
    g.add_factor(scalar_prior("b", "x", 3.0, 1.0));
    g.reset_messages();
    for (const char* f : {"a", "b"}) {
      const std::size_t fi = g.factor_index(f);
      g.messages().to_variable(g.edge_between(f, "x")) =
          message_factor_to_variable(g, f, "x", linearize_factor(g, fi));
    }
    const auto u = update_marginal(g, "x");
    CHECK(u.delta(0) == Approx(2.0));
    CHECK(u.cov(0, 0) == Approx(0.5));
  }
  SECTION("single incoming message") {
    FactorGraph g;
    g.add_variable("x", vec({1.0}));
    g.add_factor(scalar_prior("a", "x", 0.0, 1.0));
    g.reset_messages();
    g.messages().to_variable(0) = {vec({4.0}), Matrix::Constant(1, 1, 2.0)};
    const auto u = update_marginal(g, "x");
    CHECK(u.delta(0) == Approx(2.0));
    CHECK(u.mean(0) == Approx(3.0));
    CHECK(u.cov(0, 0) == Approx(0.5));
  }
  SECTION("no information is reported as unobservable") {
    FactorGraph g;
    g.add_variable("x", vec({1.0}));
    g.add_factor(scalar_prior("a", "x", 0.0, 1.0));
    g.reset_messages();
    try {
      (void)update_marginal(g, "x");
      FAIL("expected UnobservableVariable");
    } catch (const UnobservableVariable& e) {
      CHECK(e.variable_id() == "x");
    }
  }
}

namespace {

// Tree with non-linear factors of mixed dimensions.
FactorGraph nonlinear_tree(std::mt19937_64& rng) {
  FactorGraph g;
  g.add_variable("p", Vector::Zero(2));
  g.add_variable("q", Vector::Zero(2));
  g.add_variable("r", Vector::Zero(1));
  const Vector tp = testing_support::random_vector(rng, 2) * 0.5;
  const Vector tq = testing_support::random_vector(rng, 2) * 0.5;
  const Vector tr = testing_support::random_vector(rng, 1) * 0.5;
  auto f_pq = [](const Vector& x) {
    Vector out(3);
    out << std::sin(x(0)) + x(2) * x(2), x(1) * x(3) + x(0), std::exp(0.3 * x(2)) - x(3);
    return out;
  };
  Vector xpq(4);
  xpq << tp, tq;
  g.add_factor(FactorSpec("pq", {"p", "q"}, f_pq, f_pq(xpq) + 0.01 * testing_support::random_vector(rng, 3),
                          0.01 * Matrix::Identity(3, 3)));
  auto f_qr = [](const Vector& x) {
    Vector out(2);
    out << x(0) * x(2) + x(1), x(2) * x(2) * x(2) + x(0);
    return out;
  };
  Vector xqr(3);
  xqr << tq, tr;
  g.add_factor(FactorSpec("qr", {"q", "r"}, f_qr, f_qr(xqr) + 0.01 * testing_support::random_vector(rng, 2),
                          testing_support::random_spd(rng, 2, 0.005, 0.02)));
  g.add_factor(linear_factor("prior_p", {"p"}, Matrix::Identity(2, 2), tp, 0.1 * Matrix::Identity(2, 2)));
  g.add_factor(FactorSpec(
      "r_sq", {"r"}, [](const Vector& x) { return Vector(x.array().square() + x.array()); },
      Vector((tr.array().square() + tr.array()).matrix()), Matrix::Constant(1, 1, 0.01)));
  return g;
}

}  // namespace

TEST_CASE("run_inference: linear tree converges in one outer iteration", "[inference]") {
  FactorGraph g;
  g.add_variable("x1", vec({5.0}));
  g.add_variable("x2", vec({-3.0}));
  g.add_factor(scalar_prior("f1", "x1", 1.0, 1.0));
  g.add_factor(difference_factor("f2", "x1", "x2", 0.5));
  g.add_factor(scalar_prior("f3", "x2", 2.0, 2.0));
  const auto r = run_inference(g, {});
  CHECK(r.diagnostics.converged);
  CHECK_FALSE(r.diagnostics.loopy);
  CHECK(r.diagnostics.iterations == 1);

  testing_support::JointGaussian joint(2);
  joint.add({{0}, Matrix::Identity(1, 1), vec({1.0}), Matrix::Identity(1, 1)});
  Matrix A(1, 2);
  A << 1.0, -1.0;
  joint.add({{0, 1}, A, vec({0.0}), Matrix::Constant(1, 1, 0.5)});
  joint.add({{1}, Matrix::Identity(1, 1), vec({2.0}), Matrix::Constant(1, 1, 2.0)});
  const Vector mean = joint.mean();
  const Matrix cov = joint.covariance();
  CHECK(r.marginals.at("x1").mean(0) == Approx(mean(0)).epsilon(1e-12));
  CHECK(r.marginals.at("x2").mean(0) == Approx(mean(1)).epsilon(1e-12));
  CHECK(r.marginals.at("x1").cov(0, 0) == Approx(cov(0, 0)).epsilon(1e-10));
  CHECK(r.marginals.at("x2").cov(0, 0) == Approx(cov(1, 1)).epsilon(1e-10));
}

TEST_CASE("run_inference: non-linear trees match the Gauss-Newton oracle", "[inference][oracle]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    FactorGraph g = nonlinear_tree(rng);
    InferenceConfig cfg;
    cfg.tol = 1e-10;
    cfg.audit_messages = true;
    const auto problem = oracle::problem_from_graph(g);
    const auto report = oracle::compare_bp_vs_gn(g, problem, cfg);
    INFO("trial " << trial << " note " << report.note);
    CHECK(report.both_converged());
    CHECK(report.max_abs_mean_diff < 1e-8);

    FactorGraph work = g;
    const auto r = run_inference(work, cfg);
    CHECK(r.diagnostics.audit.violations == 0);
    CHECK(r.diagnostics.audit.checked > 0);
    const auto gn = oracle::gauss_newton_solve(problem, oracle::stacked_initial_state(g), 1e-10, 50);
    // Posterior covariance of each block agrees with the global one on trees.
    CHECK((r.marginals.at("p").cov - gn.covariance.block(0, 0, 2, 2)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((r.marginals.at("r").cov - gn.covariance.block(4, 4, 1, 1)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("run_inference: linear loopy graph reaches the weighted least-squares means", "[inference][loopy]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    FactorGraph g;
    testing_support::JointGaussian joint(3);
    const std::vector<std::string> names{"a", "b", "c"};
    for (const auto& n : names) g.add_variable(n, vec({0.0}));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
      const double y = nd(rng);
      g.add_factor(scalar_prior("prior_" + names[i], names[i], y, 1.0));
      joint.add({{static_cast<Index>(i)}, Matrix::Identity(1, 1), vec({y}), Matrix::Identity(1, 1)});
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t j = (i + 1) % 3;
      Matrix A(1, 2);
      A << 1.0, -0.7;
      const double y = nd(rng);
      g.add_factor(linear_factor("pair_" + names[i], {names[i], names[j]}, A, vec({y}), Matrix::Constant(1, 1, 0.5)));
      joint.add({{static_cast<Index>(i), static_cast<Index>(j)}, A, vec({y}), Matrix::Constant(1, 1, 0.5)});
    }
    InferenceConfig cfg;
    cfg.max_outer_iters = 500;
    cfg.tol = 1e-12;
    const auto r = run_inference(g, cfg);
    CHECK(r.diagnostics.loopy);
    REQUIRE(r.diagnostics.converged);
    const Vector mean = joint.mean();
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(r.marginals.at(names[i]).mean(0) - mean(static_cast<Index>(i))) < 1e-6);
    }
  }
}

TEST_CASE("run_inference: adding a unary factor never inflates posterior variance", "[inference][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FactorGraph g = nonlinear_tree(rng);
    // Fixed linearization: a single outer iteration from the same start.
    InferenceConfig cfg;
    cfg.max_outer_iters = 1;
    FactorGraph before = g;
    const auto r0 = run_inference(before, cfg);
    FactorGraph after = g;
    after.add_factor(linear_factor("extra", {"q"}, testing_support::random_matrix(rng, 1, 2),
                                   testing_support::random_vector(rng, 1), Matrix::Constant(1, 1, 0.3)));
    const auto r1 = run_inference(after, cfg);
    for (const char* v : {"p", "q", "r"}) {
      const Vector d0 = r0.marginals.at(v).cov.diagonal();
      const Vector d1 = r1.marginals.at(v).cov.diagonal();
      for (Index i = 0; i < d0.size(); ++i) CHECK(d1(i) <= d0(i) * (1.0 + 1e-12));
    }
  }
}

namespace {

// Store double that records which edges a message computation touches.
struct TrackingStore {
  const MessageStore* inner;
  mutable std::set<EdgeIndex> touched;
  const GaussianMessage& to_variable(EdgeIndex e) const {
    touched.insert(e);
    return inner->to_variable(e);
  }
  const GaussianMessage& to_factor(EdgeIndex e) const {
    touched.insert(e);
    return inner->to_factor(e);
  }
};

}  // namespace

TEST_CASE("message computations read only edges adjacent to their source node", "[messages][locality]") {
  std::mt19937_64 rng(9);
  FactorGraph g = nonlinear_tree(rng);
  g.reset_messages();
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    const Edge& edge = g.edges()[e];
    TrackingStore vs{&g.messages(), {}};
    (void)variable_to_factor(g, vs, e);
    for (EdgeIndex t : vs.touched) CHECK(g.edges()[t].variable == edge.variable);

    // Give the incoming messages information so elimination is well posed.
    for (EdgeIndex k : g.factor_edges(edge.factor)) {
      const Index d = g.variable(g.edges()[k].variable).dim;
      g.messages().to_factor(k) = {Vector::Zero(d), Matrix::Identity(d, d)};
    }
    TrackingStore fs{&g.messages(), {}};
    (void)factor_to_variable(g, fs, e, linearize_factor(g, edge.factor), 1e-12);
    for (EdgeIndex t : fs.touched) CHECK(g.edges()[t].factor == edge.factor);
  }
}

TEST_CASE("run_inference is deterministic", "[inference][determinism]") {
  std::mt19937_64 rng(21);
  const FactorGraph g = nonlinear_tree(rng);
  FactorGraph a = g, b = g;
  const auto ra = run_inference(a, {});
  const auto rb = run_inference(b, {});
  CHECK(ra.diagnostics.iterations == rb.diagnostics.iterations);
  CHECK(ra.diagnostics.residual_history == rb.diagnostics.residual_history);
  for (const auto& [id, m] : ra.marginals) {
    CHECK(m.mean == rb.marginals.at(id).mean);
    CHECK(m.cov == rb.marginals.at(id).cov);
  }
}

TEST_CASE("run_inference reports non-convergence instead of throwing", "[inference]") {
  std::mt19937_64 rng(2);
  FactorGraph g = nonlinear_tree(rng);
  InferenceConfig cfg;
  cfg.max_outer_iters = 1;
  cfg.tol = 1e-15;
  const auto r = run_inference(g, cfg);
  CHECK_FALSE(r.diagnostics.converged);
  CHECK(r.diagnostics.sweeps == 1);
  for (const auto& v : g.variables()) CHECK(v.x.allFinite());
}

TEST_CASE("run_inference propagates unobservable variables by id", "[inference][errors]") {
  FactorGraph g;
  g.add_variable("seen", vec({0.0}));
  g.add_variable("hidden", vec({0.0}));
  Matrix A(1, 2);
  A << 1.0, 0.0;
  g.add_factor(linear_factor("only", {"seen", "hidden"}, A, vec({1.0}), Matrix::Identity(1, 1)));
  InferenceConfig cfg;
  cfg.jitter = 0.0;
  try {
    (void)run_inference(g, cfg);
    FAIL("expected an inference error");
  } catch (const UnobservableVariable& e) {
    CHECK(e.variable_id() == "hidden");
  } catch (const EliminationSingularity& e) {
    CHECK(e.variable_id() == "seen");
  }
}

TEST_CASE("InferenceConfig validation", "[config][errors]") {
  InferenceConfig c;
  c.tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.damping = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.jitter = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
