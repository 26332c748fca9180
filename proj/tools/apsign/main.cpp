// apsign: command-line front end for compression sign-off.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "apsign/error.hpp"
#include "apsign/signoff.hpp"
#include "apsign/simulator.hpp"
#include "apsign/theory/verify.hpp"
#include "apsign/util.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitComputation = 3;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_boot;
  std::optional<double> level;
  std::optional<unsigned> workers;
  std::string out;
};

apsign::SignoffConfig load_config(const GlobalFlags& g) {
  if (g.config.empty()) apsign::fail(apsign::ErrorCode::ConfigError, "--config is required");
  auto cfg = apsign::SignoffConfig::load(g.config);
  if (g.seed) cfg.bootstrap.seed = *g.seed;
  if (g.n_boot) cfg.bootstrap.n_boot = *g.n_boot;
  if (g.level) cfg.bootstrap.level = *g.level;
  if (g.workers) cfg.bootstrap.workers = *g.workers;
  if (!g.out.empty()) cfg.output = g.out;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) apsign::fail(apsign::ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
  out << text;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) apsign::fail(apsign::ErrorCode::IoFailure, "cannot create '" + dir.string() + "'");
}

int cmd_signoff(const GlobalFlags& g) {
  const auto cfg = load_config(g);
  const auto report = apsign::run_signoff(cfg);
  make_dir(cfg.output);
  write_text(cfg.output / "report.json", report.to_json());
  write_text(cfg.output / "summary.txt", report.summary_text());
  apsign::export_curves(report, cfg.output);
  std::cout << report.summary_text();
  std::cout << "\nreport written to " << (cfg.output / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_curves(const GlobalFlags& g) {
  const auto cfg = load_config(g);
  const auto report = apsign::run_signoff(cfg);
  apsign::export_curves(report, cfg.output);
  std::cout << "curves written to " << cfg.output.string() << "\n";
  return kExitOk;
}

int cmd_frontier(const GlobalFlags& g) {
  auto cfg = load_config(g);
  cfg.gains.clear();
  const auto report = apsign::run_signoff(cfg);
  std::cout << "method,seed,epsilon,avg_point,avg_certified,fam_point,fam_certified\n";
  for (const auto& run : report.runs) {
    for (const auto& f : run.frontiers) {
      std::cout << run.method << "," << (run.seed ? std::to_string(*run.seed) : "-") << ","
                << apsign::format_double(f.epsilon) << "," << f.avg_point.budget_text() << ","
                << f.avg_certified.budget_text() << "," << f.fam_point.budget_text() << ","
                << f.fam_certified.budget_text() << "\n";
    }
  }
  return kExitOk;
}

void add_pair(apsign::SignoffConfig& cfg, const std::string& agnostic, const std::string& conditioned) {
  if (agnostic.empty() && conditioned.empty()) return;
  if (agnostic.empty() || conditioned.empty()) {
    apsign::fail(apsign::ErrorCode::ConfigError, "--agnostic and --conditioned go together");
  }
  cfg.gains = {apsign::GainPairSpec{agnostic, conditioned, apsign::Variant::fam, std::nullopt}};
}

int cmd_gcond(const GlobalFlags& g, const std::string& agnostic, const std::string& conditioned) {
  auto cfg = load_config(g);
  add_pair(cfg, agnostic, conditioned);
  if (cfg.gains.empty()) apsign::fail(apsign::ErrorCode::ConfigError, "no gain pair configured");
  cfg.audit.enabled = false;
  const auto report = apsign::run_signoff(cfg);
  std::cout << "agnostic,conditioned,variant,seed,epsilon,gain,lo,hi,p\n";
  for (const auto& gr : report.gains) {
    for (const auto& row : gr.seeds) {
      for (std::size_t i = 0; i < row.per_epsilon.size(); ++i) {
        const auto& r = row.per_epsilon[i];
        std::cout << gr.pair.agnostic << "," << gr.pair.conditioned << "," << apsign::to_string(gr.pair.variant)
                  << "," << (row.seed ? std::to_string(*row.seed) : "-") << ","
                  << apsign::format_double(cfg.epsilons[i]) << "," << apsign::format_double(r.gain);
        if (row.tests[i]) {
          std::cout << "," << apsign::format_double(row.tests[i]->interval.lo) << ","
                    << apsign::format_double(row.tests[i]->interval.hi) << ","
                    << apsign::format_double(row.tests[i]->p);
        } else {
          std::cout << ",NA,NA,NA";
        }
        std::cout << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_audit(const GlobalFlags& g, const std::string& agnostic, const std::string& conditioned) {
  auto cfg = load_config(g);
  add_pair(cfg, agnostic, conditioned);
  if (cfg.gains.empty()) apsign::fail(apsign::ErrorCode::ConfigError, "no gain pair configured");
  cfg.audit.enabled = true;
  const auto report = apsign::run_signoff(cfg);
  if (report.audits.empty()) {
    std::cout << "no permuted query streams found\n";
    return kExitOk;
  }
  std::cout << "conditioned,seed,anchor,permuted_mean,delta,band,naive_delta\n";
  for (const auto& a : report.audits) {
    for (const auto& row : a.seeds) {
      std::cout << a.pair.conditioned << "," << (row.seed ? std::to_string(*row.seed) : "-") << ",";
      if (row.decoupled) {
        std::cout << apsign::format_double(row.decoupled->anchor) << ","
                  << apsign::format_double(row.decoupled->permuted_mean) << ","
                  << apsign::format_double(row.decoupled->delta) << "," << apsign::to_string(row.decoupled->band);
      } else {
        std::cout << "NA,NA,NA,NA";
      }
      std::cout << "," << (row.naive ? apsign::format_double(row.naive->delta) : std::string("NA")) << "\n";
    }
    if (a.mean_delta) {
      std::cout << "# mean delta " << apsign::format_fixed(*a.mean_delta, 4) << " " << apsign::to_string(*a.band)
                << "\n";
    }
  }
  return kExitOk;
}

int cmd_theory_verify() {
  const auto rep = apsign::theory::verify_theory_fixtures();
  for (const auto& c : rep.checks) {
    std::printf("%-4s %-58s expected %.12g got %.12g (%s, tol %.0e)\n", c.pass() ? "ok" : "FAIL", c.name.c_str(),
                c.expected, c.actual, c.unit.c_str(), c.tolerance);
  }
  std::printf("max deviation %.3e over %zu checks\n", rep.max_deviation(), rep.checks.size());
  return rep.ok() ? kExitOk : kExitComputation;
}

int cmd_theory_solve(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) apsign::fail(apsign::ErrorCode::IoFailure, "cannot open '" + path + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::cout << apsign::theory::solve_theory_spec(text);
  return kExitOk;
}

int cmd_simulate(const GlobalFlags& g, const std::string& world_path, const std::string& format) {
  auto spec = apsign::sim::load_world_spec(world_path);
  const fs::path out = g.out.empty() ? fs::path("sim_out") : fs::path(g.out);
  const auto sim = apsign::sim::planted_world_generate(spec.world, spec.methods, spec.options);
  make_dir(out);
  const bool csv = format == "csv";
  const auto records_path = out / (csv ? "records.csv" : "records.jsonl");
  {
    std::ofstream f(records_path, std::ios::binary | std::ios::trunc);
    if (!f) apsign::fail(apsign::ErrorCode::IoFailure, "cannot write '" + records_path.string() + "'");
    apsign::write_records(f, sim.records, csv ? apsign::RecordFormat::csv : apsign::RecordFormat::jsonl);
  }
  {
    std::ofstream f(out / "oracle.csv", std::ios::binary | std::ios::trunc);
    if (!f) apsign::fail(apsign::ErrorCode::IoFailure, "cannot write oracle.csv");
    apsign::sim::write_oracle_csv(f, sim.oracle);
  }
  std::cout << sim.records.size() << " records written to " << records_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign-off toolkit for answer-preserving audio compression"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(apsign::kVersion));

  GlobalFlags g;
  app.add_option("--config", g.config, "Sign-off config (JSON)");
  app.add_option("--seed", g.seed, "Bootstrap seed");
  app.add_option("--n-boot", g.n_boot, "Bootstrap replicates");
  app.add_option("--level", g.level, "Interval level");
  app.add_option("--workers", g.workers, "Bootstrap worker threads (0 = all cores)");
  app.add_option("--out", g.out, "Output directory");

  auto* signoff = app.add_subcommand("signoff", "Run the full sign-off and write report.json plus CSVs");
  auto* curves = app.add_subcommand("curves", "Write excess curves and frontier CSVs");
  auto* frontier = app.add_subcommand("frontier", "Print point and certified frontiers");

  std::string agnostic;
  std::string conditioned;
  auto* gcond = app.add_subcommand("gcond", "Conditioned-gain table with bootstrap p-values");
  gcond->add_option("--agnostic", agnostic, "Query-agnostic method");
  gcond->add_option("--conditioned", conditioned, "Query-conditioned method");
  auto* audit = app.add_subcommand("audit", "Decoupled selector-query audit");
  audit->add_option("--agnostic", agnostic, "Query-agnostic method");
  audit->add_option("--conditioned", conditioned, "Query-conditioned method");

  auto* theory = app.add_subcommand("theory", "Theory oracles");
  theory->require_subcommand(1);
  auto* verify = theory->add_subcommand("verify", "Run the analytic fixture suite");
  std::string spec_path;
  auto* solve = theory->add_subcommand("solve", "Solve a JSON theory spec");
  solve->add_option("spec", spec_path, "Spec file")->required();

  std::string world_path;
  std::string format = "jsonl";
  auto* simulate = app.add_subcommand("simulate", "Generate planted-world records and oracle frontiers");
  simulate->add_option("--world", world_path, "World file (JSON)")->required();
  simulate->add_option("--format", format, "Record format")->check(CLI::IsMember({"jsonl", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*signoff) return cmd_signoff(g);
    if (*curves) return cmd_curves(g);
    if (*frontier) return cmd_frontier(g);
    if (*gcond) return cmd_gcond(g, agnostic, conditioned);
    if (*audit) return cmd_audit(g, agnostic, conditioned);
    if (*verify) return cmd_theory_verify();
    if (*solve) return cmd_theory_solve(spec_path);
    if (*simulate) return cmd_simulate(g, world_path, format);
  } catch (const apsign::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return apsign::is_validation_error(e.code()) ? kExitValidation : kExitComputation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputation;
  }
  return kExitOk;
}
