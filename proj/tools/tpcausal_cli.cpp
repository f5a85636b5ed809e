// Command-line front end: preprocess, fit, simulate, query, benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpcausal/causal_engine.hpp"
#include "tpcausal/data_io.hpp"
#include "tpcausal/errors.hpp"
#include "tpcausal/harness.hpp"
#include "tpcausal/outcome_model.hpp"
#include "tpcausal/random.hpp"
#include "tpcausal/treatment_model.hpp"

namespace fs = std::filesystem;
using namespace tpcausal;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

ExperimentConfig read_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  return j.get<ExperimentConfig>();
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream os(p, std::ios::binary);
  os << j.dump(2) << '\n';
}

template <class F>
void write_file(const fs::path& p, F&& f) {
  std::ofstream os(p, std::ios::binary);
  f(os);
}

std::uint64_t repetition_seed(std::uint64_t cli, std::uint64_t s) {
  return cli == 0 ? s : mix64(cli) ^ s;
}

std::vector<Trajectory> days_of(const std::vector<PatientRecord>& recs, const std::string& label) {
  std::vector<Trajectory> out;
  for (const auto& r : recs)
    if (r.policy == label)
      for (int d = 0; d < r.days; ++d) out.push_back(r.day(d));
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_preprocess(const std::string& in, const std::string& out) {
  auto recs = load_dataset(in);
  for (auto& r : recs) r = preprocess_record(r);
  save_dataset(recs, out);
  std::printf("preprocessed %zu records\n", recs.size());
  return 0;
}

int cmd_fit(const std::string& config_path, const std::string& data, const std::string& out,
            std::uint64_t seed) {
  ExperimentConfig c = read_config(config_path);
  auto recs = load_dataset(data);
  if (recs.empty()) throw ValidationError("<dataset>", "no records to fit");
  fs::create_directories(out);
  save_dataset(recs, fs::path(out) / "data");
  std::map<std::string, bool> labels;
  for (const auto& r : recs) labels[r.policy] = true;
  nlohmann::json treat = nlohmann::json::object();
  for (const auto& [label, _] : labels) {
    TreatmentConfig cfg = TreatmentConfig::variant(c.gp_pp_variant);
    cfg.num_inducing = c.num_inducing;
    cfg.day_length = c.day_length;
    TreatmentFitOptions opt;
    opt.max_iters = c.treatment_iters;
    opt.seed = seed;
    auto train = days_of(recs, label);
    treat[label] = treatment_model_to_json(train_treatment_model(cfg, train, label, opt));
    std::printf("fitted treatment model for policy %s on %zu days\n", label.c_str(), train.size());
  }
  std::vector<OutcomeData> od;
  for (const auto& r : recs) od.push_back({r.id, r.treatments, r.outcomes});
  OutcomeFitOptions oo;
  oo.max_iters = c.outcome_iters;
  OutcomeModel om = fit_outcome_model(initial_outcome_model(od), od, oo).model;
  write_json(fs::path(out) / "model.json",
             {{"treatment", treat}, {"outcome", om}, {"config", c}, {"seed", seed}});
  std::printf("fitted outcome model for %zu patients\n", od.size());
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out, std::uint64_t seed) {
  ExperimentConfig c = read_config(config_path);
  Simulator sim = build_simulator(c, seed);
  GeneratedData d = generate_datasets(sim, c, seed);
  save_dataset(d.observational, fs::path(out) / "observational");
  save_dataset(d.observational_next, fs::path(out) / "observational_next");
  save_dataset(d.interventional, fs::path(out) / "interventional");
  save_dataset(d.counterfactual, fs::path(out) / "counterfactual");
  nlohmann::json policies = nlohmann::json::object();
  for (const auto& p : sim.policies) policies[p.label()] = treatment_model_to_json(p);
  write_json(fs::path(out) / "simulator.json", {{"seed", seed}, {"config", c}, {"policies", policies}});
  std::printf("simulated %zu patients\n", d.observational.size());
  return 0;
}

int cmd_query(const std::string& model_dir, const std::string& mode, const std::string& policy,
              const std::string& patient, int samples, int horizon_days, const std::string& out,
              std::uint64_t seed) {
  std::ifstream in(fs::path(model_dir) / "model.json");
  if (!in) throw ParseError((fs::path(model_dir) / "model.json").string(), 0, "cannot open");
  nlohmann::json j = nlohmann::json::parse(in);
  auto recs = load_dataset(fs::path(model_dir) / "data");
  const PatientRecord* rec = nullptr;
  for (const auto& r : recs)
    if (r.id == patient) rec = &r;
  if (!rec) throw ValidationError(patient, "patient not in the fitted dataset");
  std::map<std::string, std::unique_ptr<TreatmentModel>> pols;
  for (auto it = j["treatment"].begin(); it != j["treatment"].end(); ++it)
    pols[it.key()] = std::make_unique<TreatmentModel>(treatment_model_from_json(it.value()));
  if (!pols.count(rec->policy)) throw ValidationError(patient, "no model for the observed policy");
  const std::string target = policy.empty() ? rec->policy : policy;
  if (!pols.count(target)) throw ValidationError(target, "unknown policy");
  OutcomeModel om = j["outcome"].get<OutcomeModel>();
  OutcomePosterior post(om, {rec->id, rec->treatments, rec->outcomes});
  PatientModel pm{pols[rec->policy].get(), &post};
  const double T = rec->day_length;
  const double end = rec->days * T;

  QueryResult r;
  if (mode == "cf") {
    r = policy_counterfactual_query(pm, rec->id, rec->history(), 0.0, end, *pols[target], samples, seed);
  } else if (mode == "obs" || mode == "int") {
    std::vector<double> q;
    const int n = j["config"].value("grid_intervals", 40);
    for (int d = rec->days; d < rec->days + horizon_days; ++d)
      for (int k = 0; k < n; ++k) q.push_back(d * T + k * T / n);
    const TreatmentPolicy& use = mode == "obs" ? *pols[rec->policy] : *pols[target];
    r = policy_intervention_query(pm, rec->id, rec->history(), end, end + horizon_days * T, q, use,
                                  samples, seed);
  } else {
    throw InvalidArgument("mode must be obs, int or cf");
  }
  if (out.empty()) {
    write_query_csv(std::cout, r);
    return 0;
  }
  fs::create_directories(out);
  write_file(fs::path(out) / "samples.csv", [&](std::ostream& os) { write_query_csv(os, r); });
  write_file(fs::path(out) / "plot.csv", [&](std::ostream& os) { write_plot_csv(os, r); });
  auto summary = query_summary_json(r);
  summary["mode"] = mode;
  summary["policy"] = target;
  summary["patient"] = patient;
  summary["seed"] = seed;
  write_json(fs::path(out) / "summary.json", summary);
  std::printf("%zu samples written to %s\n", r.samples.size(), out.c_str());
  return 0;
}

int cmd_benchmark(const std::string& config_path, const std::string& out, bool paper_scale,
                  std::uint64_t seed) {
  ExperimentConfig c = config_path.empty() && paper_scale ? ExperimentConfig::paper_scale()
                                                          : read_config(config_path);
  if (paper_scale) {
    c.n_patients = 50;
    if (c.seeds.size() < 10) c.seeds = ExperimentConfig::paper_scale().seeds;
  }
  for (auto& s : c.seeds) s = repetition_seed(seed, s);
  BenchmarkResult r = run_benchmark(c);
  fs::create_directories(out);
  write_file(fs::path(out) / "benchmark.csv", [&](std::ostream& os) { write_benchmark_csv(os, r); });
  write_file(fs::path(out) / "tll.csv", [&](std::ostream& os) { write_tll_csv(os, r); });
  auto j = benchmark_json(r);
  j["config"] = c;
  write_json(fs::path(out) / "benchmark.json", j);
  write_benchmark_csv(std::cout, r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment-outcome causal modelling toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed may follow the subcommand
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for all randomness")->capture_default_str();

  std::string in, out, config, data, model, mode, policy, patient;
  int samples = kDefaultRollouts, horizon_days = 1;
  bool paper_scale = false;

  auto* pre = app.add_subcommand("preprocess", "Deduplicate and shift meal times");
  pre->add_option("in", in, "Input dataset")->required();
  pre->add_option("out", out, "Output dataset directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit treatment and outcome models");
  fit->add_option("--config", config, "Experiment config (JSON)");
  fit->add_option("--data", data, "Dataset directory")->required();
  fit->add_option("--out", out, "Model directory")->required();

  auto* sim = app.add_subcommand("simulate", "Generate semi-synthetic datasets");
  sim->add_option("--config", config, "Experiment config (JSON)");
  sim->add_option("--out", out, "Output directory")->required();

  auto* query = app.add_subcommand("query", "Sample a query from a fitted model");
  query->add_option("--model", model, "Model directory")->required();
  query->add_option("--mode", mode, "obs | int | cf")->required()->check(CLI::IsMember({"obs", "int", "cf"}));
  query->add_option("--policy", policy, "Target policy label");
  query->add_option("--patient", patient, "Patient id")->required();
  query->add_option("--samples", samples, "Rollouts")->capture_default_str();
  query->add_option("--horizon-days", horizon_days, "Forward horizon in days")->capture_default_str();
  query->add_option("--out", out, "Output directory (default: CSV to stdout)");

  auto* bench = app.add_subcommand("benchmark", "Run the benchmark grid");
  bench->add_option("--config", config, "Experiment config (JSON)");
  bench->add_option("--out", out, "Output directory")->required();
  bench->add_flag("--paper-scale", paper_scale, "50 patients, 10 repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*pre) return cmd_preprocess(in, out);
    if (*fit) return cmd_fit(config, data, out, seed);
    if (*sim) return cmd_simulate(config, out, seed);
    if (*query) return cmd_query(model, mode, policy, patient, samples, horizon_days, out, seed);
    if (*bench) return cmd_benchmark(config, out, paper_scale, seed);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid JSON: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InconsistencyError& e) {
    std::cerr << "inconsistency: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
