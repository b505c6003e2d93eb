#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mono3d/config.hpp"
#include "mono3d/tensor.hpp"

namespace mono3d {

// The gradient suite behind `gradcheck`: every differentiable op plus the
// composite modules, checked over `seeds` random restarts each at tiny dims.
// `corrupt_op` wires the deliberate-corruption negative control.
std::vector<GradCheckResult> run_gradient_suite(int seeds, double eps, double tol,
                                                const std::string& corrupt_op = "");

// Exit codes: 0 success, 1 check failure, 2 input error. `parallel` opts in
// to per-file parallelism where files are independent; the benchmark refuses
// it because timings would be meaningless.
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out, bool parallel = false);
int cmd_train_toy(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const std::string& det_dir, const std::string& gt_dir, const RunConfig& cfg,
             std::ostream& out, bool parallel = false);
int cmd_inspect(const std::string& path, std::ostream& out);

}  // namespace mono3d
