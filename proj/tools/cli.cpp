// Command-line front end: generate models and data, run BP and the exact
// smoother, run the loop-map analyses, compare marginal files.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "loopgbp/bp.hpp"
#include "loopgbp/exact.hpp"
#include "loopgbp/io.hpp"
#include "loopgbp/loop_map.hpp"
#include "loopgbp/model.hpp"
#include "loopgbp/rng.hpp"

namespace fs = std::filesystem;
using loopgbp::io::json;

namespace {

constexpr const char* kFooter = R"(Config schema (JSON):
  {
    "model":    {"file": "model.json"}  or
                {"generator": {"num_nodes": 6, "state_dim": 2, "obs_dim": 2,
                               "coupling_strength": 0.3, "seed": 1}},
    "evidence": {"file": "evidence.json"}  or  {"sample_seed": 2},
    "bp":       {"max_iterations": 1000, "tolerance": 1e-10,
                 "init_precision": 0.0, "damping": 0.0},        (optional)
    "analysis": {"trials": 200, "pairs": 50, "seed": 0},        (optional)
    "out":      "results"                                       (optional)
  }
Exactly one model source and exactly one evidence source. --seed overrides
both the generator seed and the evidence sample seed; --out overrides "out".

CSV columns (floats carry 17 significant digits):
  trace.csv          iteration,max_delta_j,max_delta_h
  hilbert_trace.csv  iteration,frobenius_delta,hilbert_to_fixed_point

Exit codes: 0 success (smooth: converged), 1 bad config/input or I/O error,
2 max-iterations reached, 3 numerical error (singular/degenerate matrix or
divergence).)";

struct GeneratorParams {
  int num_nodes = 0;
  int state_dim = 0;
  int obs_dim = 0;
  double coupling_strength = 0.0;
  std::uint64_t seed = 0;
};

struct SourceConfig {
  bool model_from_file = false;
  fs::path model_file;
  GeneratorParams gen;

  bool evidence_from_file = false;
  fs::path evidence_file;
  std::uint64_t sample_seed = 0;

  loopgbp::bp::BpConfig bp;
  int trials = 200;
  int pairs = 50;
  std::uint64_t analysis_seed = 0;

  fs::path out = ".";
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iter;
  std::optional<double> tol;
  std::optional<double> damping;
  std::optional<std::string> out;
};

const json& require(const json& j, const char* name, const char* where) {
  auto it = j.find(name);
  if (it == j.end())
    throw std::invalid_argument(std::string("config: ") + where +
                                " is missing field '" + name + "'");
  return *it;
}

SourceConfig load_config(const fs::path& path, const Overrides& ov) {
  json j = loopgbp::io::read_json_file(path);
  SourceConfig cfg;

  const json& model = require(j, "model", "top level");
  bool has_file = model.contains("file");
  bool has_gen = model.contains("generator");
  if (has_file == has_gen)
    throw std::invalid_argument(
        "config: model must specify exactly one of 'file' or 'generator'");
  if (has_file) {
    cfg.model_from_file = true;
    cfg.model_file = model["file"].get<std::string>();
  } else {
    const json& g = model["generator"];
    cfg.gen.num_nodes = require(g, "num_nodes", "model.generator").get<int>();
    cfg.gen.state_dim = require(g, "state_dim", "model.generator").get<int>();
    cfg.gen.obs_dim = require(g, "obs_dim", "model.generator").get<int>();
    cfg.gen.coupling_strength =
        require(g, "coupling_strength", "model.generator").get<double>();
    cfg.gen.seed = require(g, "seed", "model.generator").get<std::uint64_t>();
  }

  const json& ev = require(j, "evidence", "top level");
  bool ev_file = ev.contains("file");
  bool ev_seed = ev.contains("sample_seed");
  if (ev_file == ev_seed)
    throw std::invalid_argument(
        "config: evidence must specify exactly one of 'file' or 'sample_seed'");
  if (ev_file) {
    cfg.evidence_from_file = true;
    cfg.evidence_file = ev["file"].get<std::string>();
  } else {
    cfg.sample_seed = ev["sample_seed"].get<std::uint64_t>();
  }

  if (j.contains("bp")) {
    const json& b = j["bp"];
    if (b.contains("max_iterations")) cfg.bp.max_iterations = b["max_iterations"].get<int>();
    if (b.contains("tolerance")) cfg.bp.tolerance = b["tolerance"].get<double>();
    if (b.contains("init_precision")) cfg.bp.init_precision = b["init_precision"].get<double>();
    if (b.contains("damping")) cfg.bp.damping = b["damping"].get<double>();
  }
  if (j.contains("analysis")) {
    const json& a = j["analysis"];
    if (a.contains("trials")) cfg.trials = a["trials"].get<int>();
    if (a.contains("pairs")) cfg.pairs = a["pairs"].get<int>();
    if (a.contains("seed")) cfg.analysis_seed = a["seed"].get<std::uint64_t>();
  }
  if (j.contains("out")) cfg.out = j["out"].get<std::string>();

  if (ov.seed) {
    cfg.gen.seed = *ov.seed;
    cfg.sample_seed = *ov.seed;
  }
  if (ov.max_iter) cfg.bp.max_iterations = *ov.max_iter;
  if (ov.tol) cfg.bp.tolerance = *ov.tol;
  if (ov.damping) cfg.bp.damping = *ov.damping;
  if (ov.out) cfg.out = *ov.out;
  return cfg;
}

loopgbp::CyclicModel load_model(const SourceConfig& cfg) {
  if (cfg.model_from_file) {
    loopgbp::CyclicModel model =
        loopgbp::io::model_from_json(loopgbp::io::read_json_file(cfg.model_file));
    loopgbp::require_valid(model);
    return model;
  }
  return loopgbp::random_model(cfg.gen.num_nodes, cfg.gen.state_dim,
                               cfg.gen.obs_dim, cfg.gen.coupling_strength,
                               cfg.gen.seed);
}

void check_evidence(const loopgbp::CyclicModel& model, const loopgbp::Evidence& ev) {
  if (int(ev.observations.size()) != model.num_nodes)
    throw std::invalid_argument(
        "evidence: expected " + std::to_string(model.num_nodes) +
        " observations, got " + std::to_string(ev.observations.size()));
  for (size_t k = 0; k < ev.observations.size(); ++k)
    if (int(ev.observations[k].size()) != model.obs_dim)
      throw std::invalid_argument("evidence: observation " + std::to_string(k) +
                                  " has length " +
                                  std::to_string(ev.observations[k].size()) +
                                  ", expected " + std::to_string(model.obs_dim));
}

loopgbp::Evidence load_evidence(const SourceConfig& cfg,
                                const loopgbp::CyclicModel& model) {
  loopgbp::Evidence ev;
  if (cfg.evidence_from_file)
    ev = loopgbp::io::evidence_from_json(
        loopgbp::io::read_json_file(cfg.evidence_file));
  else
    ev = loopgbp::sample(model, cfg.sample_seed, 1).front().evidence;
  check_evidence(model, ev);
  return ev;
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + out.string() +
                             ": " + ec.message());
}

int cmd_generate(const SourceConfig& cfg) {
  if (cfg.model_from_file)
    throw std::invalid_argument("generate: config must use a model generator");
  if (cfg.evidence_from_file)
    throw std::invalid_argument("generate: config must use evidence.sample_seed");
  loopgbp::CyclicModel model = load_model(cfg);
  loopgbp::PathSample draw = loopgbp::sample(model, cfg.sample_seed, 1).front();
  ensure_out_dir(cfg.out);
  loopgbp::io::write_json_file(cfg.out / "model.json",
                               loopgbp::io::model_to_json(model));
  loopgbp::io::write_json_file(cfg.out / "evidence.json",
                               loopgbp::io::evidence_to_json(draw.evidence));
  loopgbp::io::write_json_file(cfg.out / "hidden_truth.json",
                               loopgbp::io::sample_to_json(draw));
  std::cout << "wrote model.json, evidence.json, hidden_truth.json to "
            << cfg.out.string() << "\n";
  return 0;
}

int cmd_smooth(const SourceConfig& cfg, std::optional<int> cut_edge) {
  loopgbp::CyclicModel model = load_model(cfg);
  loopgbp::Evidence ev = load_evidence(cfg, model);
  loopgbp::bp::RunResult res =
      cut_edge ? loopgbp::bp::run_on_cut_loop(model, ev, *cut_edge, cfg.bp)
               : loopgbp::bp::run(model, ev, cfg.bp);
  ensure_out_dir(cfg.out);
  loopgbp::io::write_trace_csv(cfg.out / "trace.csv", res.trace);

  const char* status_str = "diverged";
  int code = 3;
  if (res.status == loopgbp::bp::ConvergenceStatus::converged) {
    status_str = "converged";
    code = 0;
  } else if (res.status == loopgbp::bp::ConvergenceStatus::max_iterations) {
    status_str = "max_iterations";
    code = 2;
  }
  json status;
  status["status"] = status_str;
  status["iterations"] = res.iterations;
  status["max_iterations"] = cfg.bp.max_iterations;
  status["tolerance"] = cfg.bp.tolerance;
  status["damping"] = cfg.bp.damping;
  status["cut_edge"] = cut_edge ? json(*cut_edge) : json(nullptr);
  loopgbp::io::write_json_file(cfg.out / "status.json", status);
  if (!res.beliefs.empty())
    loopgbp::io::write_json_file(
        cfg.out / "beliefs.json",
        loopgbp::io::marginals_to_json(loopgbp::io::from_beliefs(res.beliefs)));
  std::cout << "status=" << status_str << " iterations=" << res.iterations
            << "\n";
  return code;
}

int cmd_exact(const SourceConfig& cfg, std::optional<int> cut_edge) {
  loopgbp::CyclicModel model = load_model(cfg);
  loopgbp::Evidence ev = load_evidence(cfg, model);
  loopgbp::oracle::ExactMarginals marginals =
      cut_edge ? loopgbp::oracle::exact_smooth_cut(model, ev, *cut_edge)
               : loopgbp::oracle::exact_smooth(model, ev);
  ensure_out_dir(cfg.out);
  loopgbp::io::write_json_file(
      cfg.out / "exact.json",
      loopgbp::io::marginals_to_json(loopgbp::io::from_exact(marginals)));
  std::cout << "wrote exact.json to " << cfg.out.string() << "\n";
  return 0;
}

int cmd_analyze(const SourceConfig& cfg) {
  namespace an = loopgbp::analysis;
  loopgbp::CyclicModel model = load_model(cfg);
  loopgbp::Evidence ev = load_evidence(cfg, model);
  an::ComposedLoopMap map =
      an::extract_maps(model, loopgbp::evidence_messages(model, ev));
  int n = model.state_dim;
  Eigen::MatrixXd j0 = Eigen::MatrixXd::Zero(n, n);

  an::ContractionReport fp = an::iterate_to_fixed_point(
      map, j0, cfg.bp.tolerance, cfg.bp.max_iterations);
  an::MonotonicityReport mono = an::check_monotone(
      map, cfg.trials, loopgbp::derive_seed(cfg.analysis_seed, 1));
  an::DerivativeCheckReport dpos = an::differential_positivity_check(
      map.stages.front(), fp.fixed_point, cfg.trials,
      loopgbp::derive_seed(cfg.analysis_seed, 2));
  an::TrajectoryPositivityReport traj = an::trajectory_positivity(
      map, j0, cfg.trials, loopgbp::derive_seed(cfg.analysis_seed, 3));
  an::ContractionReport pairs = an::contraction_diagnostics(
      map, cfg.pairs, loopgbp::derive_seed(cfg.analysis_seed, 4));

  json a;
  a["monotone_pass_rate"] =
      mono.trials ? double(mono.passes) / double(mono.trials) : 1.0;
  a["monotonicity"] = {{"trials", mono.trials},
                       {"passes", mono.passes},
                       {"worst_margin", mono.worst_margin}};
  a["differential_positivity"] = {
      {"trials", dpos.trials},
      {"derivative_passes", dpos.derivative_passes},
      {"max_derivative_error", dpos.max_derivative_error},
      {"max_derivative_ratio", dpos.max_derivative_ratio},
      {"cone_passes", dpos.cone_passes},
      {"min_direction_eigenvalue", dpos.min_direction_eigenvalue}};
  a["trajectory_positivity"] = {{"checks", traj.checks},
                                {"passes", traj.passes},
                                {"min_eigenvalue", traj.min_eigenvalue},
                                {"trajectory_length", traj.trajectory_length}};
  a["contraction"] = {{"pairs", int(pairs.pairs.size())},
                      {"degenerate", pairs.degenerate_count},
                      {"skipped", pairs.skipped_count},
                      {"max_ratio", pairs.max_ratio},
                      {"mean_ratio", pairs.mean_ratio}};
  a["fixed_point"] = {{"converged", fp.converged},
                      {"iterations", fp.iterations_to_converge},
                      {"residual", fp.residual},
                      {"matrix", loopgbp::io::matrix_to_json(fp.fixed_point)}};
  ensure_out_dir(cfg.out);
  loopgbp::io::write_json_file(cfg.out / "analysis.json", a);
  loopgbp::io::write_fixed_point_csv(cfg.out / "hilbert_trace.csv", fp);
  std::cout << "monotone_pass_rate="
            << loopgbp::io::format_double(a["monotone_pass_rate"].get<double>())
            << " fixed_point_residual="
            << loopgbp::io::format_double(fp.residual) << " max_ratio="
            << loopgbp::io::format_double(pairs.max_ratio) << "\n";
  return 0;
}

int cmd_compare(const fs::path& got_path, const fs::path& ref_path,
                const fs::path& out) {
  loopgbp::io::MarginalsDoc got =
      loopgbp::io::marginals_from_json(loopgbp::io::read_json_file(got_path));
  loopgbp::io::MarginalsDoc ref =
      loopgbp::io::marginals_from_json(loopgbp::io::read_json_file(ref_path));
  loopgbp::io::CompareReport rep = loopgbp::io::compare(got, ref);
  ensure_out_dir(out);
  loopgbp::io::write_json_file(out / "report.json",
                               loopgbp::io::compare_to_json(rep));
  std::cout << "max_mean_rel_err="
            << loopgbp::io::format_double(rep.max_mean_error)
            << " max_cov_rel_err="
            << loopgbp::io::format_double(rep.max_cov_error) << "\n";
  return 0;
}

struct SubFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int cut_edge = 0;
  int max_iter = 0;
  double tol = 0.0;
  double damping = 0.0;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_cut = nullptr;
  CLI::Option* o_max = nullptr;
  CLI::Option* o_tol = nullptr;
  CLI::Option* o_damp = nullptr;

  Overrides overrides() const {
    Overrides ov;
    if (o_seed && o_seed->count()) ov.seed = seed;
    if (o_max && o_max->count()) ov.max_iter = max_iter;
    if (o_tol && o_tol->count()) ov.tol = tol;
    if (o_damp && o_damp->count()) ov.damping = damping;
    if (o_out && o_out->count()) ov.out = out;
    return ov;
  }
  std::optional<int> cut() const {
    if (o_cut && o_cut->count()) return cut_edge;
    return std::nullopt;
  }
};

void add_common(CLI::App* sub, SubFlags& f, bool with_cut, bool with_bp) {
  sub->add_option("--config", f.config, "experiment config JSON")->required();
  f.o_out = sub->add_option("--out", f.out, "output directory (overrides config)");
  f.o_seed = sub->add_option(
      "--seed", f.seed, "overrides generator seed and evidence sample seed");
  if (with_cut)
    f.o_cut = sub->add_option("--cut-edge", f.cut_edge,
                              "remove edge (k, k+1 mod K) from the loop");
  if (with_bp) {
    f.o_max = sub->add_option("--max-iter", f.max_iter, "iteration cap");
    f.o_tol = sub->add_option("--tol", f.tol, "relative convergence tolerance");
    f.o_damp = sub->add_option("--damping", f.damping, "message damping in [0, 1)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian belief propagation on single-loop models"};
  app.footer(kFooter);
  app.require_subcommand(1);

  SubFlags f_gen, f_smooth, f_exact, f_analyze;
  CLI::App* gen = app.add_subcommand(
      "generate", "sample a random model and a draw from it");
  add_common(gen, f_gen, false, false);
  CLI::App* smooth = app.add_subcommand(
      "smooth", "run BP; writes beliefs.json, trace.csv, status.json");
  add_common(smooth, f_smooth, true, true);
  CLI::App* exact = app.add_subcommand(
      "exact", "run the dense oracle; writes exact.json");
  add_common(exact, f_exact, true, false);
  CLI::App* analyze = app.add_subcommand(
      "analyze", "loop-map diagnostics; writes analysis.json, hilbert_trace.csv");
  add_common(analyze, f_analyze, false, true);

  std::string got_path, ref_path, compare_out = ".";
  CLI::App* compare = app.add_subcommand(
      "compare", "per-node errors between two marginal files; writes report.json");
  compare->add_option("got", got_path, "marginals to evaluate")->required();
  compare->add_option("reference", ref_path, "reference marginals")->required();
  compare->add_option("--out", compare_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed())
      return cmd_generate(load_config(f_gen.config, f_gen.overrides()));
    if (smooth->parsed())
      return cmd_smooth(load_config(f_smooth.config, f_smooth.overrides()),
                        f_smooth.cut());
    if (exact->parsed())
      return cmd_exact(load_config(f_exact.config, f_exact.overrides()),
                       f_exact.cut());
    if (analyze->parsed())
      return cmd_analyze(load_config(f_analyze.config, f_analyze.overrides()));
    if (compare->parsed()) return cmd_compare(got_path, ref_path, compare_out);
  } catch (const loopgbp::SingularityError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const loopgbp::DegeneracyError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
