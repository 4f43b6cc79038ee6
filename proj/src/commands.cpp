#include "popproj/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "popproj/chain_store.hpp"
#include "popproj/csv.hpp"
#include "popproj/diagnostics.hpp"
#include "popproj/forecast.hpp"
#include "popproj/inputs.hpp"
#include "popproj/log.hpp"
#include "popproj/pipeline.hpp"
#include "popproj/trajectory.hpp"

namespace popproj::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kIndicatorOrder{"tfr",   "e0_female", "e0_male", "total_population",
                                               "psr",   "median_age"};

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << content;
  if (!out) throw mcmc::StorageError(fmt::format("cannot write {}", path.string()));
}

json manifest_base(const cfg::RunConfig& config, const std::string& command) {
  return {{"command", command},
          {"model", config.model},
          {"config_hash", cfg::config_hash(config)},
          {"seed", config.simulation.seed}};
}

void write_manifest(const fs::path& out_dir, const cfg::RunConfig& config, json manifest,
                    const std::vector<std::string>& warnings) {
  manifest["warnings"] = warnings;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(out_dir / "config.json", cfg::serialize(config));
}

int finish(std::ostream& out, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) {
    logger().warn("{}", w);
    out << "warning: " << w << '\n';
  }
  return warnings.empty() ? kOk : kWarnings;
}

cfg::FileConfig only(const cfg::FileConfig& files, std::initializer_list<std::string> keep) {
  cfg::FileConfig out;
  auto has = [&](const std::string& k) {
    return std::find(keep.begin(), keep.end(), k) != keep.end();
  };
  if (has("tfr")) out.tfr = files.tfr;
  if (has("e0")) out.e0 = files.e0;
  return out;
}

json metadata_json(const mcmc::ChainMetadata& m) {
  return {{"model", m.model},     {"config_hash", m.config_hash}, {"seed", m.seed},
          {"chain_id", m.chain_id}, {"draws", m.draws},             {"complete", m.complete}};
}

// Reads chains and checks they were produced by `model` under the current
// model settings.
std::vector<mcmc::ChainStore> load_chains(const std::string& dir, const std::string& model,
                                          const cfg::RunConfig& config, json& provenance) {
  auto stores = mcmc::read_chains(dir);
  if (stores.empty()) throw InvalidInput(fmt::format("{}: no chain files found", dir));
  const auto expected = cfg::model_hash(config, model);
  for (const auto& s : stores) {
    if (s.metadata.model != model) {
      throw ChainMismatch(fmt::format("{}: chain {} holds model '{}', expected '{}'", dir,
                                      s.metadata.chain_id, s.metadata.model, model));
    }
    if (s.metadata.config_hash != expected) {
      throw ChainMismatch(fmt::format(
          "{}: chain {} was estimated with model hash {}, the current config gives {}", dir,
          s.metadata.chain_id, s.metadata.config_hash, expected));
    }
    if (!s.metadata.complete) {
      throw ChainMismatch(fmt::format("{}: chain {} is incomplete", dir, s.metadata.chain_id));
    }
    auto entry = metadata_json(s.metadata);
    entry["dir"] = dir;
    provenance.push_back(entry);
  }
  return stores;
}

std::vector<double> pointwise_median(const std::vector<std::vector<double>>& paths) {
  std::vector<double> out;
  std::vector<double> column(paths.size());
  for (std::size_t t = 0; t < paths.front().size(); ++t) {
    for (std::size_t i = 0; i < paths.size(); ++i) column[i] = paths[i][t];
    out.push_back(traj::empirical_quantile(column, 0.5));
  }
  return out;
}

template <typename Series>
const Series& find_series(const std::vector<Series>& all, const std::string& id,
                          const char* what) {
  const auto it = std::find_if(all.begin(), all.end(),
                               [&](const Series& s) { return s.country_id == id; });
  if (it == all.end()) throw InvalidInput(fmt::format("{}: no {} series", id, what));
  return *it;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_estimate(const cfg::RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  const bool tfr_model = config.model.rfind("tfr", 0) == 0;
  cfg::require_files(config, {tfr_model ? "tfr" : "e0"});
  const auto inputs = io::parse_inputs(only(config.files, {tfr_model ? "tfr" : "e0"}));
  std::vector<std::string> warnings = inputs.warnings;
  fs::create_directories(out_dir);
  json manifest = manifest_base(config, "estimate");
  manifest["model_hash"] = cfg::model_hash(config, config.model);

  if (pipeline::is_mcmc_model(config.model)) {
    auto target = pipeline::make_target(config, config.model, inputs.tfr, inputs.e0);
    const auto stores = pipeline::run_chains(*target, config, &out_dir);
    const auto report = mcmc::diagnostics(stores, config.mcmc.rhat_threshold);
    write_text(out_dir / "diagnostics.txt", report.to_text());
    out << report.to_text();
    if (report.any_flagged) {
      warnings.push_back(fmt::format("some scalars have R-hat above {}", report.threshold));
    }
    if (report.single_chain) warnings.push_back("single chain: R-hat from split halves only");
    json chains = json::array();
    for (const auto& s : stores) chains.push_back(metadata_json(s.metadata));
    manifest["chains"] = chains;
  } else if (config.model == "tfr-phase3-fixed") {
    const auto series = pipeline::classified(inputs.tfr, config.tfr.rule);
    const auto mle = tfr::phase3_mle(series, config.tfr.phase3_mu);
    const json report = {{"model", config.model},
                         {"mu", mle.mu},
                         {"rho", mle.rho},
                         {"sigma", mle.sigma},
                         {"se_rho", mle.se_rho},
                         {"se_sigma", mle.se_sigma},
                         {"rho_ci95", {mle.rho - 1.96 * mle.se_rho, mle.rho + 1.96 * mle.se_rho}},
                         {"sigma_ci95",
                          {mle.sigma - 1.96 * mle.se_sigma, mle.sigma + 1.96 * mle.se_sigma}},
                         {"transitions", mle.transitions},
                         {"loglik", mle.loglik},
                         {"rho_identified", mle.rho_identified},
                         {"rho_at_boundary", mle.rho_at_boundary}};
    write_text(out_dir / "mle_report.json", report.dump(2) + "\n");
    out << fmt::format("rho {:.6f} (se {:.6f}), sigma {:.6f} (se {:.6f}), {} transitions\n",
                       mle.rho, mle.se_rho, mle.sigma, mle.se_sigma, mle.transitions);
    if (!mle.rho_identified) warnings.push_back("rho is not identified by the data");
    if (mle.rho_at_boundary) warnings.push_back("rho estimate sits on the [0, 1) boundary");
  } else {
    const auto fit = e0::fit_gap_mle(inputs.e0, config.e0.gap);
    const json report = {{"model", config.model},
                         {"beta", fit.params.beta},
                         {"gamma1", fit.params.gamma1},
                         {"gamma_estimated", fit.gamma_estimated},
                         {"scale2", fit.params.scale2},
                         {"dof", fit.params.dof},
                         {"regime_level", fit.params.regime_level},
                         {"transitions_below", fit.transitions_below},
                         {"transitions_above", fit.transitions_above},
                         {"converged", fit.converged},
                         {"iterations", fit.iterations},
                         {"gradient_norm", fit.gradient_norm},
                         {"loglik", fit.loglik},
                         {"initial_level_substituted", fit.initial_level_substituted}};
    write_text(out_dir / "gap_report.json", report.dump(2) + "\n");
    out << fmt::format("gap beta [{:.6f}, {:.6f}, {:.6f}, {:.6f}, {:.6f}], gamma1 {:.6f}\n",
                       fit.params.beta[0], fit.params.beta[1], fit.params.beta[2],
                       fit.params.beta[3], fit.params.beta[4], fit.params.gamma1);
    if (!fit.converged) warnings.push_back("gap MLE did not reach the gradient tolerance");
  }
  write_manifest(out_dir, config, manifest, warnings);
  return finish(out, warnings);
}

// ---------------------------------------------------------------------------

int cmd_project(const cfg::RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  cfg::require_files(config, {"tfr", "e0", "population", "fertility_pattern", "life_table",
                              "e0_chains"});
  std::vector<std::string> optional_files;
  for (const auto& [name, value] :
       {std::pair{"migration", &config.files.migration},
        std::pair{"ultimate_fertility_pattern", &config.files.ultimate_fertility_pattern},
        std::pair{"phase2_chains", &config.files.phase2_chains},
        std::pair{"phase3_chains", &config.files.phase3_chains}}) {
    if (!value->empty()) optional_files.emplace_back(name);
  }
  cfg::require_files(config, optional_files);

  const auto inputs = io::parse_inputs(config.files);
  std::vector<std::string> warnings = inputs.warnings;
  json manifest = manifest_base(config, "project");
  json chain_provenance = json::array();

  forecast::TfrPosterior tfr_post;
  const auto tfr_series = pipeline::classified(inputs.tfr, config.tfr.rule);
  if (!config.files.phase2_chains.empty()) {
    tfr_post.phase2 = load_chains(config.files.phase2_chains, "tfr-phase2", config,
                                  chain_provenance);
  }
  if (!config.files.phase3_chains.empty()) {
    tfr_post.phase3 = load_chains(config.files.phase3_chains, "tfr-phase3-hier", config,
                                  chain_provenance);
    manifest["phase3_source"] = "tfr-phase3-hier chains";
  } else {
    tfr_post.phase3_mle = tfr::phase3_mle(tfr_series, config.tfr.phase3_mu);
    manifest["phase3_source"] = {{"model", "tfr-phase3-fixed"},
                                 {"rho", tfr_post.phase3_mle->rho},
                                 {"sigma", tfr_post.phase3_mle->sigma}};
  }
  forecast::E0Posterior e0_post;
  e0_post.chains = load_chains(config.files.e0_chains, "e0", config, chain_provenance);
  e0_post.gap = pipeline::gap_params(config, inputs.e0);
  manifest["chains"] = chain_provenance;
  manifest["gap_beta"] = e0_post.gap.beta;
  manifest["gap_gamma1"] = e0_post.gap.gamma1;

  const auto& sim = config.simulation;
  const bool median = sim.mode == "median";
  manifest["mode"] = sim.mode;
  manifest["n_trajectories"] = median ? 1 : sim.n_trajectories;
  manifest["horizon"] = sim.horizon;
  json countries = json::array();

  for (const auto& [id, pop] : inputs.population) {
    const auto& ts = find_series(tfr_series, id, "TFR");
    const auto& es = find_series(inputs.e0, id, "e0");
    for (int last : {ts.period_start_years.back(), es.period_start_years.back()}) {
      if (last + 5 != pop.base_year) {
        throw InvalidInput(fmt::format(
            "{}: observed series end with the period starting {}, but the base population is "
            "for {}; the last observed period must end at the base year",
            id, last, pop.base_year));
      }
    }
    const auto stream = std::stoull(cfg::fnv1a_hex(id), nullptr, 16);
    Rng tfr_rng = make_rng(sim.seed, stream, 10);
    Rng e0_rng = make_rng(sim.seed, stream, 11);
    const auto tfr_paths = forecast::sample_tfr_paths(ts, tfr_post, sim.n_trajectories,
                                                      sim.horizon, tfr_rng,
                                                      pipeline::tfr_simulation(config,
                                                                               pop.base_year));
    const auto e0_paths = forecast::sample_e0_paths(es, e0_post, sim.n_trajectories,
                                                    sim.horizon, e0_rng,
                                                    pipeline::e0_simulation(config));

    traj::ProjectionInputs in{pop.pyramid,
                              pop.base_year,
                              tfr_paths.values,
                              e0_paths.female,
                              e0_paths.male,
                              {},
                              inputs.patterns.at(id),
                              std::nullopt,
                              sim.pattern_convergence_periods,
                              *inputs.standard_female,
                              *inputs.standard_male,
                              sim.sex_ratio_at_birth};
    if (median) {
      in.tfr = {pointwise_median(tfr_paths.values)};
      in.e0_female = {pointwise_median(e0_paths.female)};
      in.e0_male = {pointwise_median(e0_paths.male)};
    }
    if (auto u = inputs.ultimate_patterns.find(id); u != inputs.ultimate_patterns.end()) {
      in.ultimate_pattern = u->second;
    }
    if (auto m = inputs.migration.find(id); m != inputs.migration.end()) {
      if (m->second.periods.size() < static_cast<std::size_t>(sim.horizon)) {
        throw InvalidInput(fmt::format("{}: migration covers {} periods, the horizon is {}", id,
                                       m->second.periods.size(), sim.horizon));
      }
      in.migration.assign(m->second.periods.begin(),
                          m->second.periods.begin() + sim.horizon);
    }
    const auto result = traj::run_probabilistic_projection(in);
    if (result.clamped_cells > 0) {
      warnings.push_back(fmt::format("{}: {} negative cohort cells clamped to zero", id,
                                     result.clamped_cells));
    }

    std::vector<traj::TrajectorySet> sets;
    std::vector<traj::QuantileTable> quantiles;
    for (const auto& name : kIndicatorOrder) {
      const auto& set = result.indicators.at(name);
      sets.push_back(set);
      quantiles.push_back(traj::quantile_summary(set));
    }
    std::ostringstream traj_csv, quant_csv, prov_csv;
    traj::write_trajectories(traj_csv, sets);
    traj::write_quantiles(quant_csv, quantiles);
    prov_csv << "trajectory_id,phase2_draw,phase3_draw,e0_draw\n";
    if (median) {
      prov_csv << "1,median,median,median\n";
    } else {
      for (std::size_t i = 0; i < tfr_paths.values.size(); ++i) {
        const auto& p = tfr_paths.provenance[i];
        prov_csv << i + 1 << ',' << p.phase2 << ',' << p.phase3 << ',' << e0_paths.provenance[i]
                 << '\n';
      }
    }
    const fs::path dir = out_dir / id;
    write_text(dir / "trajectories.csv", traj_csv.str());
    write_text(dir / "quantiles.csv", quant_csv.str());
    write_text(dir / "provenance.csv", prov_csv.str());
    countries.push_back({{"country_id", id},
                         {"base_year", pop.base_year},
                         {"phase", static_cast<int>(ts.phases.back())},
                         {"clamped_cells", result.clamped_cells}});

    const auto& q = quantiles[3];
    out << fmt::format("{}: total population {} median {:.6g}, 80% [{:.6g}, {:.6g}]\n", id,
                       q.period_labels.back(), q.values.back()[2], q.values.back()[1],
                       q.values.back()[3]);
  }
  manifest["countries"] = countries;
  write_manifest(out_dir, config, manifest, warnings);
  return finish(out, warnings);
}

// ---------------------------------------------------------------------------

int cmd_validate(const cfg::RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  pipeline::CalibrationReport report;
  if (config.validate.mode == "self-consistency") {
    std::vector<tfr::TfrSeries> data;
    if (!config.files.tfr.empty()) {
      cfg::require_files(config, {"tfr"});
      data = io::read_tfr(config.files.tfr);
    }
    report = pipeline::validate_self_consistency(config, data);
  } else {
    const bool tfr_model = config.model.rfind("tfr", 0) == 0;
    cfg::require_files(config, {tfr_model ? "tfr" : "e0"});
    const auto inputs = io::parse_inputs(only(config.files, {tfr_model ? "tfr" : "e0"}));
    report = pipeline::validate_holdout(config, inputs);
    report.warnings.insert(report.warnings.begin(), inputs.warnings.begin(),
                           inputs.warnings.end());
  }
  std::vector<std::string> warnings = report.warnings;
  const double c80 = report.overall.rate80();
  const double c95 = report.overall.rate95();
  if (c80 < 0.70 || c80 > 0.90) {
    warnings.push_back(fmt::format("80% interval coverage {:.3f} outside [0.70, 0.90]", c80));
  }
  if (c95 < 0.88 || c95 > 0.99) {
    warnings.push_back(fmt::format("95% interval coverage {:.3f} outside [0.88, 0.99]", c95));
  }
  write_text(out_dir / "calibration.txt", report.to_text());
  write_text(out_dir / "calibration.csv", report.to_csv());
  out << report.to_text();
  json manifest = manifest_base(config, "validate");
  manifest["mode"] = report.mode;
  manifest["coverage80"] = c80;
  manifest["coverage95"] = c95;
  manifest["observations"] = report.overall.total;
  write_manifest(out_dir, config, manifest, warnings);
  for (std::size_t i = report.warnings.size(); i < warnings.size(); ++i) {
    out << "warning: " << warnings[i] << '\n';
  }
  return warnings.empty() ? kOk : kWarnings;
}

// ---------------------------------------------------------------------------

int cmd_diagnose(const cfg::RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  if (config.files.chains.empty()) {
    throw cfg::ConfigError("files.chains", "required for diagnose (or pass --chains)");
  }
  cfg::require_files(config, {"chains"});
  const auto stores = mcmc::read_chains(config.files.chains);
  if (stores.empty()) {
    throw InvalidInput(fmt::format("{}: no chain files found", config.files.chains));
  }
  std::vector<std::string> warnings;
  for (const auto& s : stores) {
    if (s.metadata.model != stores[0].metadata.model) {
      throw ChainMismatch(fmt::format("chains hold different models ('{}' and '{}')",
                                      stores[0].metadata.model, s.metadata.model));
    }
    if (!s.metadata.complete) {
      warnings.push_back(fmt::format("chain {} is incomplete", s.metadata.chain_id));
    }
  }
  const auto report = mcmc::diagnostics(stores, config.mcmc.rhat_threshold);
  write_text(out_dir / "diagnostics.txt", report.to_text());
  out << report.to_text();
  if (report.any_flagged) {
    warnings.push_back(fmt::format("some scalars have R-hat above {}", report.threshold));
  }
  if (report.single_chain) warnings.push_back("single chain: R-hat from split halves only");
  json manifest = manifest_base(config, "diagnose");
  json chains = json::array();
  for (const auto& s : stores) chains.push_back(metadata_json(s.metadata));
  manifest["chains"] = chains;
  write_manifest(out_dir, config, manifest, warnings);
  return finish(out, warnings);
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probabilistic population projection"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "popproj-out";
  std::string chains_dir;
  std::uint64_t seed = 0;

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const cfg::RunConfig&, const fs::path&, std::ostream&);
  };
  const std::vector<Sub> subs{
      {"estimate", "Fit the configured model (MCMC chains or MLE report)", cmd_estimate},
      {"project", "Project populations from stored chains", cmd_project},
      {"validate", "Out-of-sample calibration of projection intervals", cmd_validate},
      {"diagnose", "Convergence diagnostics for stored chains", cmd_diagnose},
  };
  std::vector<CLI::App*> apps;
  std::vector<CLI::Option*> seed_options;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "JSON run configuration");
    seed_options.push_back(sub->add_option("--seed", seed, "Random seed (overrides the config)"));
    sub->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    if (std::string(s.name) == "diagnose") {
      sub->add_option("--chains", chains_dir, "Directory of chain_<id>.csv files");
    }
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kError;
  }

  try {
    cfg::RunConfig config;
    if (!config_path.empty()) {
      config = cfg::load(config_path);
      cfg::resolve_paths(config, fs::absolute(config_path).parent_path());
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!apps[i]->parsed()) continue;
      if (seed_options[i]->count() > 0) config.simulation.seed = seed;
      if (!chains_dir.empty()) config.files.chains = chains_dir;
      return subs[i].fn(config, out_dir, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kError;
}

}  // namespace popproj::cli
