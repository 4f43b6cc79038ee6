#include "popproj/pipeline.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <fmt/format.h>

#include "popproj/log.hpp"
#include "popproj/models.hpp"
#include "popproj/trajectory.hpp"

namespace popproj::pipeline {

namespace {

constexpr int kMinFitPeriods = 4;

tfr::TfrSeries truncate(const tfr::TfrSeries& s, std::size_t keep) {
  tfr::TfrSeries out;
  out.country_id = s.country_id;
  out.values.assign(s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(keep));
  out.period_start_years.assign(s.period_start_years.begin(),
                                s.period_start_years.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

e0::E0Series truncate(const e0::E0Series& s, std::size_t keep) {
  e0::E0Series out;
  out.country_id = s.country_id;
  const auto k = static_cast<std::ptrdiff_t>(keep);
  out.female.assign(s.female.begin(), s.female.begin() + k);
  out.male.assign(s.male.begin(), s.male.begin() + k);
  out.period_start_years.assign(s.period_start_years.begin(), s.period_start_years.begin() + k);
  return out;
}

std::size_t count_before(const std::vector<int>& years, int holdout) {
  return static_cast<std::size_t>(
      std::count_if(years.begin(), years.end(), [&](int y) { return y < holdout; }));
}

std::uint64_t country_stream(const std::string& id) {
  return std::stoull(cfg::fnv1a_hex(id), nullptr, 16);
}

// Split of one series into fit and held-out parts, with the bookkeeping
// shared by every model.
struct Split {
  std::size_t fit = 0;
  std::size_t held = 0;
};

template <typename Series>
std::vector<Split> split_all(const std::vector<Series>& data, int holdout_year,
                             CalibrationReport& report) {
  std::vector<Split> splits;
  bool any_fit = false;
  bool any_held = false;
  for (const auto& s : data) {
    Split sp;
    sp.fit = count_before(s.period_start_years, holdout_year);
    sp.held = s.period_start_years.size() - sp.fit;
    if (sp.fit < static_cast<std::size_t>(kMinFitPeriods)) {
      if (sp.held > 0) {
        report.warnings.push_back(fmt::format(
            "{}: only {} observed periods before {}, skipped", s.country_id, sp.fit, holdout_year));
      }
      sp.held = 0;
      sp.fit = 0;
    }
    any_fit = any_fit || sp.fit > 0;
    any_held = any_held || sp.held > 0;
    splits.push_back(sp);
  }
  if (!any_fit) {
    throw InvalidInput(fmt::format(
        "no country has at least {} observed periods before the holdout year {}",
        kMinFitPeriods, holdout_year));
  }
  if (!any_held) {
    throw InvalidInput(fmt::format(
        "holdout year {} is after the last observation; nothing to validate against",
        holdout_year));
  }
  return splits;
}

CalibrationReport validate_tfr_holdout(const cfg::RunConfig& config,
                                       const std::vector<tfr::TfrSeries>& data) {
  CalibrationReport report;
  report.model = config.model;
  report.mode = "holdout";
  const int holdout = config.validate.holdout_year;
  const auto splits = split_all(data, holdout, report);

  std::vector<tfr::TfrSeries> fit_data;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (splits[i].fit > 0) fit_data.push_back(truncate(data[i], splits[i].fit));
  }
  fit_data = classified(std::move(fit_data), config.tfr.rule);

  forecast::TfrPosterior posterior;
  std::optional<tfr::Phase3Mle> mle;
  try {
    mle = tfr::phase3_mle(fit_data, config.tfr.phase3_mu);
  } catch (const InvalidInput&) {
    // too few Phase III transitions; paths then stay in Phase II
  }
  const bool wants_phase3 = config.model != "tfr-phase2";
  if (config.model == "tfr-phase3-hier") {
    auto target = make_target(config, config.model, fit_data, {});
    posterior.phase3 = run_chains(*target, config);
  } else if (config.model == "tfr-phase3-fixed") {
    if (!mle) throw InvalidInput("not enough Phase III transitions before the holdout year");
    posterior.phase3_mle = mle;
  } else {
    auto target = make_target(config, config.model, fit_data, {});
    posterior.phase2 = run_chains(*target, config);
    posterior.phase3_mle = mle;
  }

  std::size_t f = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (splits[i].fit == 0) continue;
    const auto& series = fit_data[f++];
    if (splits[i].held == 0) continue;
    const bool in_phase3 = series.phases.back() == tfr::Phase::kIII;
    if (in_phase3 != wants_phase3) continue;
    auto sim = tfr_simulation(config, holdout);
    if (!posterior.phase3_mle && posterior.phase3.empty()) sim.allow_phase3_switch = false;
    Rng rng = make_rng(config.simulation.seed, country_stream(series.country_id), 1);
    const auto paths = forecast::sample_tfr_paths(series, posterior,
                                                  config.simulation.n_trajectories,
                                                  static_cast<int>(splits[i].held), rng, sim);
    const std::vector<double> truth(data[i].values.begin() + static_cast<std::ptrdiff_t>(splits[i].fit),
                                    data[i].values.end());
    const auto cov = interval_coverage(paths.values, truth);
    report.per_country[series.country_id].add(cov);
    report.overall.add(cov);
  }
  if (report.overall.total == 0) {
    throw InvalidInput(fmt::format("no country is in {} at the holdout year {}",
                                   wants_phase3 ? "Phase III" : "Phase II", holdout));
  }
  return report;
}

CalibrationReport validate_e0_holdout(const cfg::RunConfig& config,
                                      const std::vector<e0::E0Series>& data) {
  CalibrationReport report;
  report.model = config.model;
  report.mode = "holdout";
  const int holdout = config.validate.holdout_year;
  const auto splits = split_all(data, holdout, report);
  std::vector<e0::E0Series> fit_data;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (splits[i].fit > 0) fit_data.push_back(truncate(data[i], splits[i].fit));
  }
  forecast::E0Posterior posterior;
  posterior.gap = gap_params(config, fit_data);
  auto target = make_target(config, "e0", {}, fit_data);
  posterior.chains = run_chains(*target, config);
  const auto sim = e0_simulation(config);
  std::size_t f = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (splits[i].fit == 0) continue;
    const auto& series = fit_data[f++];
    if (splits[i].held == 0) continue;
    Rng rng = make_rng(config.simulation.seed, country_stream(series.country_id), 2);
    const auto paths = forecast::sample_e0_paths(series, posterior,
                                                 config.simulation.n_trajectories,
                                                 static_cast<int>(splits[i].held), rng, sim);
    const std::vector<double> truth(
        data[i].female.begin() + static_cast<std::ptrdiff_t>(splits[i].fit), data[i].female.end());
    const auto cov = interval_coverage(paths.female, truth);
    report.per_country[series.country_id].add(cov);
    report.overall.add(cov);
  }
  return report;
}

}  // namespace

bool is_mcmc_model(const std::string& model) {
  return model == "tfr-phase2" || model == "tfr-phase3-hier" || model == "e0";
}

std::unique_ptr<mcmc::TargetDensity> make_target(const cfg::RunConfig& config,
                                                 const std::string& model,
                                                 const std::vector<tfr::TfrSeries>& tfr,
                                                 const std::vector<e0::E0Series>& e0) {
  if (model == "tfr-phase2") {
    return std::make_unique<Phase2Target>(classified(tfr, config.tfr.rule), config.tfr.phase2);
  }
  if (model == "tfr-phase3-hier") {
    return std::make_unique<Phase3HierTarget>(classified(tfr, config.tfr.rule),
                                              config.tfr.phase3_bounds);
  }
  if (model == "e0") return std::make_unique<E0Target>(e0, config.e0.model);
  throw InvalidInput(fmt::format("model '{}' is not estimated by MCMC", model));
}

mcmc::SamplerSettings sampler_settings(const cfg::RunConfig& config, int chain_id) {
  mcmc::SamplerSettings s;
  s.iterations = config.mcmc.iterations;
  s.burn_in = config.mcmc.burn_in;
  s.thin = config.mcmc.thin;
  s.seed = config.simulation.seed;
  s.chain_id = chain_id;
  s.adapt_rate = config.mcmc.adapt_rate;
  s.target_acceptance = config.mcmc.target_acceptance;
  s.revalidate_every = config.mcmc.revalidate_every;
  return s;
}

std::vector<mcmc::ChainStore> run_chains(const mcmc::TargetDensity& target,
                                         const cfg::RunConfig& config,
                                         const std::filesystem::path* dir) {
  std::vector<mcmc::ChainStore> stores;
  const auto hash = cfg::model_hash(config, target.name());
  std::vector<std::string> columns;
  for (const auto& block : target.initial_blocks()) {
    for (std::size_t i = 0; i < block.values.size(); ++i) columns.push_back(block.column(i));
  }
  for (int id = 1; id <= config.mcmc.chains; ++id) {
    const auto settings = sampler_settings(config, id);
    mcmc::ChainMetadata meta;
    meta.model = target.name();
    meta.config_hash = hash;
    meta.seed = settings.seed;
    meta.chain_id = id;
    meta.iterations = settings.iterations;
    meta.burn_in = settings.burn_in;
    meta.thin = settings.thin;
    std::unique_ptr<mcmc::ChainWriter> writer;
    if (dir) writer = std::make_unique<mcmc::ChainWriter>(*dir, meta, columns);
    logger().info("{}: chain {} of {}", target.name(), id, config.mcmc.chains);
    auto run = mcmc::run_chain(target, settings, meta, writer.get());
    stores.push_back(std::move(run.store));
  }
  return stores;
}

std::vector<tfr::TfrSeries> classified(std::vector<tfr::TfrSeries> series,
                                       const tfr::PhaseRule& rule) {
  for (auto& s : series) s = tfr::classify_phases(std::move(s), rule);
  return series;
}

tfr::TfrSimulationConfig tfr_simulation(const cfg::RunConfig& config, int first_period_start) {
  tfr::TfrSimulationConfig sim;
  sim.phase2 = config.tfr.phase2;
  sim.rule = config.tfr.rule;
  sim.tfr_floor = config.simulation.tfr_floor;
  sim.first_period_start_year = first_period_start;
  sim.allow_phase3_switch = config.simulation.allow_phase3_switch;
  return sim;
}

e0::E0SimulationConfig e0_simulation(const cfg::RunConfig& config) {
  e0::E0SimulationConfig sim;
  sim.model = config.e0.model;
  return sim;
}

e0::GapParams gap_params(const cfg::RunConfig& config, const std::vector<e0::E0Series>& series) {
  if (config.e0.gap_beta) {
    auto gap = config.e0.gap;
    gap.beta = *config.e0.gap_beta;
    return gap;
  }
  try {
    return e0::fit_gap_mle(series, config.e0.gap).params;
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("{}; set e0.gap.beta in the config to supply coefficients",
                                   e.what()));
  }
}

// ---------------------------------------------------------------------------

double Coverage::rate80() const {
  return total ? static_cast<double>(inside80) / static_cast<double>(total) : 0.0;
}

double Coverage::rate95() const {
  return total ? static_cast<double>(inside95) / static_cast<double>(total) : 0.0;
}

void Coverage::add(const Coverage& other) {
  inside80 += other.inside80;
  inside95 += other.inside95;
  total += other.total;
}

Coverage interval_coverage(const std::vector<std::vector<double>>& paths,
                           const std::vector<double>& truth) {
  Coverage cov;
  std::vector<double> column(paths.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t i = 0; i < paths.size(); ++i) column[i] = paths[i].at(t);
    const double q025 = traj::empirical_quantile(column, 0.025);
    const double q10 = traj::empirical_quantile(column, 0.1);
    const double q90 = traj::empirical_quantile(column, 0.9);
    const double q975 = traj::empirical_quantile(column, 0.975);
    cov.inside80 += truth[t] >= q10 && truth[t] <= q90 ? 1 : 0;
    cov.inside95 += truth[t] >= q025 && truth[t] <= q975 ? 1 : 0;
    ++cov.total;
  }
  return cov;
}

std::string CalibrationReport::to_text() const {
  std::string out = fmt::format("model {}, {} validation, {} replication(s)\n", model, mode,
                                replications);
  out += fmt::format("overall: 80% coverage {:.3f}, 95% coverage {:.3f} over {} observations\n",
                     overall.rate80(), overall.rate95(), overall.total);
  out += "per country:\n";
  for (const auto& [id, c] : per_country) {
    out += fmt::format("  {:<12} 80% {:.3f}  95% {:.3f}  (n={})\n", id, c.rate80(), c.rate95(),
                       c.total);
  }
  for (const auto& w : warnings) out += fmt::format("warning: {}\n", w);
  return out;
}

std::string CalibrationReport::to_csv() const {
  std::string out = "country,observations,coverage80,coverage95\n";
  for (const auto& [id, c] : per_country) {
    out += fmt::format("{},{},{},{}\n", id, c.total, c.rate80(), c.rate95());
  }
  out += fmt::format("all,{},{},{}\n", overall.total, overall.rate80(), overall.rate95());
  return out;
}

CalibrationReport validate_holdout(const cfg::RunConfig& config, const io::InputTables& inputs) {
  if (config.validate.holdout_year == 0) {
    throw cfg::ConfigError("validate.holdout_year", "required for holdout validation");
  }
  if (config.model == "e0") {
    if (inputs.e0.empty()) throw InvalidInput("e0 validation needs an e0 input file");
    return validate_e0_holdout(config, inputs.e0);
  }
  if (config.model == "gap") {
    throw cfg::ConfigError("model", "holdout validation covers the TFR models and e0");
  }
  if (inputs.tfr.empty()) throw InvalidInput("TFR validation needs a TFR input file");
  return validate_tfr_holdout(config, inputs.tfr);
}

CalibrationReport validate_self_consistency(const cfg::RunConfig& config,
                                            const std::vector<tfr::TfrSeries>& data) {
  if (config.model != "tfr-phase3-fixed" && config.model != "tfr-phase3-hier") {
    throw cfg::ConfigError("model",
                           "self-consistency validation covers tfr-phase3-fixed and "
                           "tfr-phase3-hier");
  }
  const auto& v = config.validate;
  const double mu = config.tfr.phase3_mu;
  double rho = v.generator_rho;
  double sigma = v.generator_sigma;
  CalibrationReport report;
  report.model = config.model;
  report.mode = "self-consistency";
  report.replications = static_cast<std::size_t>(v.replications);
  if (!data.empty()) {
    const auto fitted = tfr::phase3_mle(classified(data, config.tfr.rule), mu);
    rho = fitted.rho;
    sigma = fitted.sigma;
  }
  logger().info("self-consistency generator: mu {}, rho {}, sigma {}", mu, rho, sigma);

  const std::size_t periods = static_cast<std::size_t>(v.fit_periods + v.holdout_periods);
  const int holdout_start = v.start_year + 5 * v.fit_periods;
  for (int r = 0; r < v.replications; ++r) {
    Rng rng = make_rng(config.simulation.seed, static_cast<std::uint64_t>(r), 3);
    std::uniform_real_distribution<double> start(v.initial_low, v.initial_high);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<tfr::TfrSeries> full;
    for (int c = 0; c < v.countries; ++c) {
      tfr::TfrSeries s;
      s.country_id = fmt::format("sim{:02d}", c + 1);
      double f = start(rng);
      for (std::size_t t = 0; t < periods; ++t) {
        s.values.push_back(f);
        s.period_start_years.push_back(v.start_year + 5 * static_cast<int>(t));
        s.phases.push_back(tfr::Phase::kIII);
        f = std::max(mu + rho * (f - mu) + sigma * normal(rng), 1e-3);
      }
      full.push_back(std::move(s));
    }
    std::vector<tfr::TfrSeries> fit;
    for (const auto& s : full) {
      auto t = truncate(s, static_cast<std::size_t>(v.fit_periods));
      t.phases.assign(t.values.size(), tfr::Phase::kIII);
      fit.push_back(std::move(t));
    }
    forecast::TfrPosterior posterior;
    if (config.model == "tfr-phase3-fixed") {
      posterior.phase3_mle = tfr::phase3_mle(fit, mu);
    } else {
      cfg::RunConfig replicate = config;
      replicate.simulation.seed = config.simulation.seed + static_cast<std::uint64_t>(r);
      Phase3HierTarget target(fit, config.tfr.phase3_bounds);
      posterior.phase3 = run_chains(target, replicate);
    }
    auto sim = tfr_simulation(config, holdout_start);
    for (std::size_t c = 0; c < fit.size(); ++c) {
      const auto paths = forecast::sample_tfr_paths(fit[c], posterior,
                                                    config.simulation.n_trajectories,
                                                    v.holdout_periods, rng, sim);
      const std::vector<double> truth(
          full[c].values.begin() + v.fit_periods, full[c].values.end());
      const auto cov = interval_coverage(paths.values, truth);
      report.per_country[fit[c].country_id].add(cov);
      report.overall.add(cov);
    }
  }
  return report;
}

}  // namespace popproj::pipeline
