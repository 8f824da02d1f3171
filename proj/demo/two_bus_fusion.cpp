// Two-bus feeder: a slack substation and one household bus with rooftop
// solar whose meter under-reads the solar output. State estimation fixes the
// net injection solar - demand tightly; how that net value splits into
// demand and solar still rests on the meters and forecasts.
//
//   gbpfusion_demo

#include <cmath>
#include <cstdio>
#include <memory>
#include <random>

#include "gbpfusion/bp/inference.hpp"
#include "gbpfusion/fusion/graph_builder.hpp"
#include "gbpfusion/power/case_file.hpp"

using namespace gbpfusion;

namespace {

const char* kFeeder = R"(function mpc = feeder
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0  0 0 1 1.02 0 20 1 1.1 0.9;
  2 1 30 8  0 0 1 1.00 0 20 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 100 -100 1.02 100 1 200 0;
];
mpc.branch = [
  1 2 0.02 0.06 0.01 0 0 0 0 0 1 -360 360;
];
)";

}  // namespace

int main() {
  const auto net = std::make_shared<const power::Network>(power::parse_case_file(kFeeder));
  const auto layout = fusion::FusionStateLayout::for_model(net->model, {2});

  // Truth: 0.40 p.u. gross demand, 0.10 p.u. solar, so 0.30 net load.
  const double demand = 0.40, solar = 0.10;
  auto targets = power::base_case_targets(net->model);
  targets.p(1) = solar - demand;
  const power::GridState truth = power::solve_power_flow(*net, targets);

  const fusion::NoiseLevels noise;  // 0.01 p.u. power, 0.0005 p.u. voltage, 0.02 p.u. meters
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01(0.0, 1.0);

  fusion::HourlyEvidence ev;
  ev.y1 = power::power_flow_equations(*net, truth, power::full_selector(2));
  for (Index i = 0; i < ev.y1.size(); ++i) ev.y1(i) += (i < 4 ? noise.power_sd : noise.voltage_sd) * n01(rng);
  ev.y1_available.assign(6, 1);
  // The meter sees only the panels it was installed with: 60% of the output.
  ev.y2 = Vector(2);
  ev.y2 << demand + noise.meter_sd * n01(rng), 0.6 * solar + noise.meter_sd * n01(rng);
  ev.y2_available.assign(2, 1);
  // Day-ahead forecasts, deliberately vague.
  ev.y3_mean = Vector(2);
  ev.y3_mean << 0.38, 0.09;
  ev.y3_variance = Vector::Constant(2, 0.05 * 0.05);
  ev.y3_available.assign(2, 1);

  fusion::FusionOptions options;
  options.noise = noise;
  bp::FactorGraph graph = fusion::build_fusion_graph(net, layout, ev, options);
  const bp::InferenceResult result = bp::run_inference(graph, {});
  const auto& x2 = result.marginals.at(fusion::kResourceVariable);

  std::printf("converged %s after %d sweeps (residual %.2e)\n", result.diagnostics.converged ? "yes" : "no",
              result.diagnostics.sweeps, result.diagnostics.final_residual);
  std::printf("%-14s %8s %8s %8s %8s\n", "entity", "truth", "meter", "fused", "sd");
  const double truths[2] = {demand, solar};
  for (Index i = 0; i < 2; ++i) {
    std::printf("%-14s %8.4f %8.4f %8.4f %8.4f\n", layout.entry_name(i).c_str(), truths[i], ev.y2(i), x2.mean(i),
                std::sqrt(x2.cov(i, i)));
  }
  const double net_sd = std::sqrt(x2.cov(0, 0) + x2.cov(1, 1) - 2.0 * x2.cov(0, 1));
  std::printf("%-14s %8.4f %8.4f %8.4f %8.4f\n", "injection_bus2", solar - demand, ev.y2(1) - ev.y2(0),
              x2.mean(1) - x2.mean(0), net_sd);
  const double z = (x2.mean(1) - ev.y2(1)) / std::hypot(std::sqrt(x2.cov(1, 1)), noise.meter_sd);
  std::printf("solar meter z-score %.2f%s\n", z, std::abs(z) > 1.96 ? "  (inconsistent at 95%)" : "");
  return 0;
}
