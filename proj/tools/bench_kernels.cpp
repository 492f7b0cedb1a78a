// Times the OpenMP residual/Jacobian kernels against the serial reference on
// the large scenario profile and cross-checks their results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "mergeopf/hierarchy.hpp"
#include "mergeopf/powerflow.hpp"
#include "mergeopf/scenario.hpp"

using namespace mergeopf;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_ms(int reps, F&& fn) {
  fn();  // warm up
  const double t0 = now_ms();
  for (int i = 0; i < reps; ++i) fn();
  return (now_ms() - t0) / reps;
}

}  // namespace

int main(int argc, char** argv) {
  ScenarioSpec spec;
  spec.n_areas = 10;
  spec.buses_per_area = 50;
  spec.dacf_areas = {3, 7};
  spec.seed = 42;
  if (argc > 1) spec.buses_per_area = std::stoi(argv[1]);

  Scenario sc = generate(spec);
  const Network& net = sc.network;
  NetworkState state = sc.ground_truth;
  std::printf("profile: %d buses, %d branches, %d loads, %d interconnections, %d threads\n",
              net.n_buses(), net.n_branches(), net.n_loads(), net.n_interconnections(),
              omp_get_max_threads());

  const int reps = 2000;
  Residual res_omp, res_ser;
  std::vector<BranchFlow> scratch;
  const double t_res_omp = time_ms(reps, [&] { residual(net, state, res_omp, scratch); });
  const double t_res_ser = time_ms(reps, [&] { residual_serial(net, state, res_ser); });
  const double res_diff = std::max((res_omp.p - res_ser.p).cwiseAbs().maxCoeff(),
                                   (res_omp.q - res_ser.q).cwiseAbs().maxCoeff());

  PowerJacobian jac_omp, jac_ser;
  build_jacobian_pattern(net, jac_omp);
  build_jacobian_pattern(net, jac_ser);
  const double t_jac_omp = time_ms(reps, [&] { jacobian(net, state, jac_omp); });
  const double t_jac_ser = time_ms(reps, [&] { jacobian_serial(net, state, jac_ser); });
  const double jac_diff = (jac_omp.vals - jac_ser.vals).cwiseAbs().maxCoeff();

  std::printf("%-22s %10s %10s %9s %12s\n", "kernel", "omp [ms]", "serial", "speedup", "max |diff|");
  std::printf("%-22s %10.4f %10.4f %8.2fx %12.3e\n", "residual", t_res_omp, t_res_ser,
              t_res_ser / t_res_omp, res_diff);
  std::printf("%-22s %10.4f %10.4f %8.2fx %12.3e\n", "jacobian", t_jac_omp, t_jac_ser,
              t_jac_ser / t_jac_omp, jac_diff);

  // end-to-end merge timing on the same profile
  MergeOptions opts;
  const double t0 = now_ms();
  MergeResult merged = merge(net, default_schedule(opts.tol), opts);
  const double t_merge = now_ms() - t0;
  std::printf("full hierarchical merge: %.0f ms, %d total violations\n", t_merge,
              merged.indicators.total_violations());
  return res_diff < 1e-12 && jac_diff < 1e-12 ? 0 : 1;
}
