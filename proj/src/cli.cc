// Copyright 2026 The vcluster Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "vcluster/cli.h"

#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "absl/status/statusor.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "vcluster/energy.h"
#include "vcluster/kernels.h"

namespace vcluster {
namespace {

struct RunConfig {
  std::string kernel = "matmul";
  int64_t n = 64;
  uint64_t seed = kDefaultSeed;
  MachineConfig machine;
  std::string profile = "model";
  std::string csv;
  std::string trace;
  std::string config;
};

void AddMachineOptions(CLI::App* app, RunConfig& rc) {
  app->add_option("--pes", rc.machine.num_pes, "processing elements (C)");
  app->add_option("--fpus", rc.machine.fpus_per_pe, "FPUs per PE (F)");
  app->add_option("--vlen", rc.machine.vlen_bytes, "VLEN in bytes");
  app->add_option("--vlsu-ports", rc.machine.vlsu_ports,
                  "64-bit VLSU ports per PE");
  app->add_option("--banks", rc.machine.l1_banks, "L1 banks");
  app->add_option("--profile", rc.profile, "FPU energy profile")
      ->check(CLI::IsMember({"model", "measured"}));
  app->add_option("--config", rc.config, "key=value file; flags override it");
}

// Applies `key=value` lines to options the command line left unset.
absl::Status ApplyConfigFile(CLI::App* app, const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open config file " + path);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    absl::string_view s = absl::StripAsciiWhitespace(line);
    if (s.empty() || s[0] == '#') continue;
    std::vector<std::string> kv = absl::StrSplit(s, absl::MaxSplits('=', 1));
    if (kv.size() != 2) {
      return absl::InvalidArgumentError(
          absl::StrFormat("%s:%d: expected key=value", path, lineno));
    }
    const std::string key(absl::StripAsciiWhitespace(kv[0]));
    const std::string value(absl::StripAsciiWhitespace(kv[1]));
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      return absl::InvalidArgumentError(
          absl::StrFormat("%s:%d: unknown key '%s'", path, lineno, key));
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      return absl::InvalidArgumentError(
          absl::StrFormat("%s:%d: %s", path, lineno, e.what()));
    }
  }
  return absl::OkStatus();
}

EnergyProfile Profile(const RunConfig& rc) {
  return rc.profile == "measured" ? EnergyProfile::kMeasured
                                  : EnergyProfile::kModel;
}

ClusterEnergyParams EnergyParams(const RunConfig& rc, bool n_given) {
  ClusterEnergyParams p;
  p.pes = rc.machine.num_pes;
  p.fpus = rc.machine.fpus_per_pe;
  p.vlen_bytes = rc.machine.vlen_bytes;
  if (n_given) p.n = static_cast<double>(rc.n);
  p.fpu_pj_per_fma = FpuEnergyPerFma(Profile(rc));
  return p;
}

absl::Status WriteFile(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return absl::PermissionDeniedError("cannot write " + path);
  f << text;
  return f ? absl::OkStatus() : absl::DataLossError("short write to " + path);
}

absl::Status Simulate(const RunConfig& rc, std::ostream& out) {
  if (absl::Status s = rc.machine.Validate(); !s.ok()) return s;
  absl::StatusOr<KernelSpec> spec = ParseKernelName(rc.kernel, rc.n);
  if (!spec.ok()) return spec.status();
  spec->seed = rc.seed;
  SimOptions opts;
  opts.profile = Profile(rc);
  std::ofstream trace;
  if (!rc.trace.empty()) {
    trace.open(rc.trace);
    if (!trace) return absl::PermissionDeniedError("cannot write " + rc.trace);
    opts.trace = &trace;
  }
  absl::StatusOr<KernelRun> run = RunAndValidate(*spec, rc.machine, opts);
  if (!run.ok()) return run.status();
  out << "kernel " << KernelName(*spec) << " n=" << spec->n << "\n"
      << FormatReport(run->sim.report);
  out << "validation: " << (run->validation.pass ? "pass" : "FAIL") << " ("
      << run->validation.message << ")\n";
  if (!rc.csv.empty()) {
    absl::Status s = WriteFile(rc.csv, std::string(kReportCsvHeader) + "\n" +
                                           ReportCsvRow(run->sim.report) + "\n");
    if (!s.ok()) return s;
  }
  if (!run->validation.pass) {
    return absl::InternalError("output does not match the reference");
  }
  return absl::OkStatus();
}

absl::Status EnergySweep(const RunConfig& rc, bool n_given, int lo, int hi,
                         int step, std::ostream& out) {
  if (step <= 0 || lo > hi) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "bad VLEN range [%d, %d] step %d", lo, hi, step));
  }
  std::vector<double> vlens;
  for (int v = lo; v <= hi; v += step) vlens.push_back(v);
  auto curve = EfficiencyCurve(EnergyParams(rc, n_given),
                               ScmEnergyModel::Reconciled(), vlens);
  if (!curve.ok()) return curve.status();
  const std::string csv = EfficiencyCurveCsv(*curve);
  if (rc.csv.empty()) {
    out << csv;
  } else if (absl::Status s = WriteFile(rc.csv, csv); !s.ok()) {
    return s;
  }
  const EnergyBreakdown* best = &curve->front();
  for (const EnergyBreakdown& e : *curve) {
    if (e.gflops_per_watt > best->gflops_per_watt) best = &e;
  }
  out << absl::StrFormat("max: vlen=%g gflops_per_watt=%.2f\n",
                         best->vlen_bytes, best->gflops_per_watt);
  return absl::OkStatus();
}

absl::Status Optimize(const RunConfig& rc, bool n_given, int lo, int hi,
                      std::ostream& out) {
  const ClusterEnergyParams p = EnergyParams(rc, n_given);
  const ScmEnergyModel scm = ScmEnergyModel::Reconciled();
  auto any = OptimizeVlen(p, scm, lo, hi);
  if (!any.ok()) return any.status();
  out << absl::StrFormat("optimum: vlen=%g B gflops_per_watt=%.2f\n",
                         any->vlen_bytes, any->gflops_per_watt);
  auto pow2 = OptimizeVlen(p, scm, lo, hi, true);
  if (pow2.ok()) {
    out << absl::StrFormat("power-of-two optimum: vlen=%g B gflops_per_watt=%.2f\n",
                           pow2->vlen_bytes, pow2->gflops_per_watt);
  }
  const BalanceResult bal = BalanceCheck(p.pes, p.fpus, 0, 32 * p.vlen_bytes);
  out << absl::StrFormat("beta_min at vlen=%g B: %.2f words/cycle\n",
                         p.vlen_bytes, bal.beta_min);
  return absl::OkStatus();
}

// Rows of W,K,energy_fJ with an optional fourth column naming the access
// kind. A non-numeric first row is taken as a header.
absl::Status Fit(const std::string& path, std::ostream& out) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open samples file " + path);
  std::map<std::string, std::vector<ScmSample>> groups;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    absl::string_view s = absl::StripAsciiWhitespace(line);
    if (s.empty() || s[0] == '#') continue;
    std::vector<absl::string_view> f = absl::StrSplit(s, ',');
    ScmSample sample;
    const bool numeric = f.size() >= 3 &&
                         absl::SimpleAtod(f[0], &sample.width_bytes) &&
                         absl::SimpleAtod(f[1], &sample.capacity_bytes) &&
                         absl::SimpleAtod(f[2], &sample.energy_fj);
    if (!numeric || f.size() > 4) {
      if (lineno == 1 && f.size() >= 3) continue;
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s:%d: expected W,K,energy_fJ[,kind]", path, lineno));
    }
    const std::string kind =
        f.size() == 4 ? std::string(absl::StripAsciiWhitespace(f[3])) : "all";
    groups[kind].push_back(sample);
  }
  if (groups.empty()) return absl::InvalidArgumentError(path + ": no samples");
  for (const auto& [kind, samples] : groups) {
    auto c = FitScmCoefficients(samples);
    if (!c.ok()) {
      return absl::Status(c.status().code(),
                          kind + ": " + std::string(c.status().message()));
    }
    out << absl::StrFormat("%s: a=%.9g b=%.9g c=%.9g residual=%.6g\n", kind,
                           c->a, c->b, c->c, FitResidual(*c, samples));
  }
  return absl::OkStatus();
}

absl::Status Validate(const RunConfig& rc, bool kernel_given, bool n_given,
                      std::ostream& out) {
  if (absl::Status s = rc.machine.Validate(); !s.ok()) return s;
  std::vector<std::pair<std::string, int64_t>> jobs = {
      {"matmul", 16}, {"wid-matmul16", 16}, {"wid-matmul8", 16},
      {"conv2d", 16}, {"dotp", 512},        {"fft", 64}};
  if (kernel_given) {
    jobs = {{rc.kernel, n_given ? rc.n : 16}};
  } else if (n_given) {
    for (auto& j : jobs) j.second = rc.n;
  }
  int failures = 0;
  for (const auto& [name, n] : jobs) {
    auto spec = ParseKernelName(name, n);
    if (!spec.ok()) return spec.status();
    spec->seed = rc.seed;
    auto run = RunAndValidate(*spec, rc.machine);
    if (!run.ok()) return run.status();
    const bool ok = run->validation.pass &&
                    run->sim.report.chaining_violations == 0;
    failures += !ok;
    out << absl::StrFormat("%-4s %s n=%d max_err=%.3g cycles=%d\n",
                           ok ? "ok" : "FAIL", name, n,
                           run->validation.max_error, run->sim.report.cycles);
  }
  if (failures > 0) {
    return absl::InternalError(absl::StrFormat("%d kernel(s) failed", failures));
  }
  return absl::OkStatus();
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Cycle-level simulator and energy model of a vector cluster",
               "vcluster"};
  app.require_subcommand(1);
  RunConfig rc;

  CLI::App* sim = app.add_subcommand("simulate", "run one kernel");
  sim->add_option("--kernel", rc.kernel,
                  "matmul|wid-matmul16|wid-matmul8|conv2d|dotp|fft");
  sim->add_option("--n", rc.n, "problem size");
  sim->add_option("--seed", rc.seed, "input data seed");
  sim->add_option("--csv", rc.csv, "write the report as CSV");
  sim->add_option("--trace", rc.trace, "write the cycle event log");
  AddMachineOptions(sim, rc);

  int lo = 8, hi = 256, step = 1;
  CLI::App* sweep =
      app.add_subcommand("energy-sweep", "efficiency as a function of VLEN");
  sweep->add_option("--vlen-min", lo);
  sweep->add_option("--vlen-max", hi);
  sweep->add_option("--vlen-step", step);
  sweep->add_option("--n", rc.n, "matrix dimension (default 256)");
  sweep->add_option("--csv", rc.csv, "write the curve here instead of stdout");
  AddMachineOptions(sweep, rc);

  int opt_lo = 8, opt_hi = 1024;
  CLI::App* optimize =
      app.add_subcommand("optimize", "most efficient VLEN and machine balance");
  optimize->add_option("--vlen-min", opt_lo);
  optimize->add_option("--vlen-max", opt_hi);
  optimize->add_option("--n", rc.n, "matrix dimension (default 256)");
  AddMachineOptions(optimize, rc);

  std::string samples;
  CLI::App* fit = app.add_subcommand("fit", "fit SCM energy coefficients");
  fit->add_option("samples", samples, "CSV of W,K,energy_fJ[,kind]")
      ->required();

  CLI::App* validate =
      app.add_subcommand("validate", "check kernels against references");
  validate->add_option("--kernel", rc.kernel);
  validate->add_option("--n", rc.n);
  validate->add_option("--seed", rc.seed);
  AddMachineOptions(validate, rc);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code;
  }

  CLI::App* chosen = app.get_subcommands().front();
  absl::Status status;
  if (!rc.config.empty()) status = ApplyConfigFile(chosen, rc.config);
  if (status.ok()) {
    const bool n_given = chosen->get_option_no_throw("--n") != nullptr &&
                         chosen->get_option("--n")->count() > 0;
    if (chosen == sim) {
      status = Simulate(rc, out);
    } else if (chosen == sweep) {
      status = EnergySweep(rc, n_given, lo, hi, step, out);
    } else if (chosen == optimize) {
      status = Optimize(rc, n_given, opt_lo, opt_hi, out);
    } else if (chosen == fit) {
      status = Fit(samples, out);
    } else {
      status = Validate(rc, validate->get_option("--kernel")->count() > 0,
                        n_given, out);
    }
  }
  if (!status.ok()) {
    err << "error: " << status.message() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vcluster
