#include "popproj/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace popproj::cfg {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>);

ConfigError::ConfigError(std::string path, const std::string& message)
    : InvalidInput(fmt::format("config field '{}': {}", path, message)), path_(std::move(path)) {}

bool TfrConfig::operator==(const TfrConfig& o) const {
  const auto& a = phase2;
  const auto& b = o.phase2;
  return rule.phase2_min_decline == o.rule.phase2_min_decline &&
         rule.phase3_ceiling == o.rule.phase3_ceiling && a.convention == b.convention &&
         a.error.sigma_max == b.error.sigma_max && a.error.f_peak == b.error.f_peak &&
         a.error.sigma_floor == b.error.sigma_floor && a.error.f_low == b.error.f_low &&
         a.error.f_high == b.error.f_high && a.error.early_factor == b.error.early_factor &&
         a.error.early_cutoff_year == b.error.early_cutoff_year &&
         a.bounds.lower == b.bounds.lower && a.bounds.upper == b.bounds.upper &&
         a.bounds.spread_upper == b.bounds.spread_upper &&
         a.bounds.max_total_width == b.bounds.max_total_width && phase3_mu == o.phase3_mu &&
         phase3_bounds.mu_mean_upper == o.phase3_bounds.mu_mean_upper &&
         phase3_bounds.mu_sd_upper == o.phase3_bounds.mu_sd_upper &&
         phase3_bounds.rho_sd_upper == o.phase3_bounds.rho_sd_upper &&
         phase3_bounds.sigma_eps_upper == o.phase3_bounds.sigma_eps_upper;
}

bool E0ModelConfig::operator==(const E0ModelConfig& o) const {
  const auto& a = model;
  const auto& b = o.model;
  return a.shape.a1 == b.shape.a1 && a.shape.a2 == b.shape.a2 && a.error.hi == b.error.hi &&
         a.error.lo == b.error.lo && a.error.mid == b.error.mid &&
         a.error.scale == b.error.scale && a.bounds.lower == b.bounds.lower &&
         a.bounds.upper == b.bounds.upper && a.bounds.spread_upper == b.bounds.spread_upper &&
         gap.beta == o.gap.beta && gap.gamma1 == o.gap.gamma1 && gap.scale2 == o.gap.scale2 &&
         gap.dof == o.gap.dof && gap.regime_level == o.gap.regime_level &&
         gap.cap == o.gap.cap && gap_beta == o.gap_beta;
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Reads the fields of one JSON object and rejects any it did not read.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename F>
  void object(const std::string& key, F&& read) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    Fields sub(j_.at(key), join(path_, key));
    read(sub);
    sub.finish();
  }

  void get(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) fail(key, "expected a finite number");
    }
  }
  void get(const std::string& key, int& out) {
    long v = out;
    get(key, v);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      fail(key, "integer out of range");
    }
    out = static_cast<int>(v);
  }
  void get(const std::string& key, long& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<long>();
    }
  }
  void get(const std::string& key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  template <std::size_t N>
  void get(const std::string& key, std::array<double, N>& out) {
    if (const json* v = take(key)) read_array(key, *v, out);
  }
  template <std::size_t N>
  void get(const std::string& key, std::optional<std::array<double, N>>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      std::array<double, N> a{};
      read_array(key, *v, a);
      out = a;
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(join(path_, key), message);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(join(path_, item.key()), "unknown field");
    }
  }

 private:
  const json* take(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  template <std::size_t N>
  void read_array(const std::string& key, const json& v, std::array<double, N>& out) const {
    if (!v.is_array() || v.size() != N) fail(key, fmt::format("expected an array of {} numbers", N));
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) fail(fmt::format("{}[{}]", key, i), "expected a number");
      out[i] = v[i].get<double>();
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string convention_name(tfr::MidpointConvention c) {
  return c == tfr::MidpointConvention::kCumulative ? "cumulative" : "as-printed";
}

json tfr_json(const TfrConfig& t) {
  const auto& e = t.phase2.error;
  const auto& b = t.phase2.bounds;
  return {
      {"phase_rule",
       {{"phase2_min_decline", t.rule.phase2_min_decline},
        {"phase3_ceiling", t.rule.phase3_ceiling}}},
      {"midpoint_convention", convention_name(t.phase2.convention)},
      {"phase2_error",
       {{"sigma_max", e.sigma_max},
        {"f_peak", e.f_peak},
        {"sigma_floor", e.sigma_floor},
        {"f_low", e.f_low},
        {"f_high", e.f_high},
        {"early_factor", e.early_factor},
        {"early_cutoff_year", e.early_cutoff_year}}},
      {"phase2_bounds",
       {{"lower", b.lower},
        {"upper", b.upper},
        {"spread_upper", b.spread_upper},
        {"max_total_width", b.max_total_width}}},
      {"phase3_mu", t.phase3_mu},
      {"phase3_bounds",
       {{"mu_mean_upper", t.phase3_bounds.mu_mean_upper},
        {"mu_sd_upper", t.phase3_bounds.mu_sd_upper},
        {"rho_sd_upper", t.phase3_bounds.rho_sd_upper},
        {"sigma_eps_upper", t.phase3_bounds.sigma_eps_upper}}},
  };
}

json e0_json(const E0ModelConfig& e) {
  const auto& m = e.model;
  json gap = {{"beta", e.gap_beta ? json(*e.gap_beta) : json(nullptr)},
              {"gamma1", e.gap.gamma1},
              {"scale2", e.gap.scale2},
              {"dof", e.gap.dof},
              {"regime_level", e.gap.regime_level},
              {"cap", e.gap.cap}};
  return {
      {"a1", m.shape.a1},
      {"a2", m.shape.a2},
      {"omega",
       {{"hi", m.error.hi}, {"lo", m.error.lo}, {"mid", m.error.mid}, {"scale", m.error.scale}}},
      {"bounds",
       {{"lower", m.bounds.lower},
        {"upper", m.bounds.upper},
        {"spread_upper", m.bounds.spread_upper}}},
      {"gap", gap},
  };
}

json mcmc_json(const McmcConfig& m) {
  return {{"chains", m.chains},
          {"iterations", m.iterations},
          {"burn_in", m.burn_in},
          {"thin", m.thin},
          {"adapt_rate", m.adapt_rate},
          {"target_acceptance", m.target_acceptance},
          {"revalidate_every", m.revalidate_every},
          {"rhat_threshold", m.rhat_threshold}};
}

json to_json(const RunConfig& c) {
  const auto& s = c.simulation;
  const auto& f = c.files;
  const auto& v = c.validate;
  return {
      {"model", c.model},
      {"mcmc", mcmc_json(c.mcmc)},
      {"simulation",
       {{"n_trajectories", s.n_trajectories},
        {"horizon", s.horizon},
        {"seed", s.seed},
        {"mode", s.mode},
        {"tfr_floor", s.tfr_floor},
        {"allow_phase3_switch", s.allow_phase3_switch},
        {"sex_ratio_at_birth", s.sex_ratio_at_birth},
        {"pattern_convergence_periods", s.pattern_convergence_periods}}},
      {"files",
       {{"tfr", f.tfr},
        {"e0", f.e0},
        {"population", f.population},
        {"migration", f.migration},
        {"fertility_pattern", f.fertility_pattern},
        {"ultimate_fertility_pattern", f.ultimate_fertility_pattern},
        {"life_table", f.life_table},
        {"phase2_chains", f.phase2_chains},
        {"phase3_chains", f.phase3_chains},
        {"e0_chains", f.e0_chains},
        {"chains", f.chains}}},
      {"tfr", tfr_json(c.tfr)},
      {"e0", e0_json(c.e0)},
      {"validate",
       {{"mode", v.mode},
        {"holdout_year", v.holdout_year},
        {"replications", v.replications},
        {"countries", v.countries},
        {"fit_periods", v.fit_periods},
        {"holdout_periods", v.holdout_periods},
        {"start_year", v.start_year},
        {"generator_rho", v.generator_rho},
        {"generator_sigma", v.generator_sigma},
        {"initial_low", v.initial_low},
        {"initial_high", v.initial_high}}},
  };
}

void read_tfr(Fields& t, TfrConfig& c) {
  t.object("phase_rule", [&](Fields& r) {
    r.get("phase2_min_decline", c.rule.phase2_min_decline);
    r.get("phase3_ceiling", c.rule.phase3_ceiling);
  });
  std::string convention = convention_name(c.phase2.convention);
  t.get("midpoint_convention", convention);
  if (convention == "as-printed") {
    c.phase2.convention = tfr::MidpointConvention::kAsPrinted;
  } else if (convention == "cumulative") {
    c.phase2.convention = tfr::MidpointConvention::kCumulative;
  } else {
    t.fail("midpoint_convention", "expected \"as-printed\" or \"cumulative\"");
  }
  t.object("phase2_error", [&](Fields& e) {
    auto& m = c.phase2.error;
    e.get("sigma_max", m.sigma_max);
    e.get("f_peak", m.f_peak);
    e.get("sigma_floor", m.sigma_floor);
    e.get("f_low", m.f_low);
    e.get("f_high", m.f_high);
    e.get("early_factor", m.early_factor);
    e.get("early_cutoff_year", m.early_cutoff_year);
  });
  t.object("phase2_bounds", [&](Fields& b) {
    b.get("lower", c.phase2.bounds.lower);
    b.get("upper", c.phase2.bounds.upper);
    b.get("spread_upper", c.phase2.bounds.spread_upper);
    b.get("max_total_width", c.phase2.bounds.max_total_width);
  });
  t.get("phase3_mu", c.phase3_mu);
  t.object("phase3_bounds", [&](Fields& b) {
    b.get("mu_mean_upper", c.phase3_bounds.mu_mean_upper);
    b.get("mu_sd_upper", c.phase3_bounds.mu_sd_upper);
    b.get("rho_sd_upper", c.phase3_bounds.rho_sd_upper);
    b.get("sigma_eps_upper", c.phase3_bounds.sigma_eps_upper);
  });
}

void read_e0(Fields& e, E0ModelConfig& c) {
  e.get("a1", c.model.shape.a1);
  e.get("a2", c.model.shape.a2);
  e.object("omega", [&](Fields& w) {
    w.get("hi", c.model.error.hi);
    w.get("lo", c.model.error.lo);
    w.get("mid", c.model.error.mid);
    w.get("scale", c.model.error.scale);
  });
  e.object("bounds", [&](Fields& b) {
    b.get("lower", c.model.bounds.lower);
    b.get("upper", c.model.bounds.upper);
    b.get("spread_upper", c.model.bounds.spread_upper);
  });
  e.object("gap", [&](Fields& g) {
    g.get("beta", c.gap_beta);
    g.get("gamma1", c.gap.gamma1);
    g.get("scale2", c.gap.scale2);
    g.get("dof", c.gap.dof);
    g.get("regime_level", c.gap.regime_level);
    g.get("cap", c.gap.cap);
  });
}

template <typename T>
void require(bool ok, const std::string& path, const T& value, const std::string& rule) {
  if (!ok) throw ConfigError(path, fmt::format("{} is invalid, {}", value, rule));
}

}  // namespace

std::string serialize(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", fmt::format("not valid JSON ({})", e.what()));
  }
  RunConfig c;
  Fields root(j, "");
  root.get("model", c.model);
  root.object("mcmc", [&](Fields& m) {
    m.get("chains", c.mcmc.chains);
    m.get("iterations", c.mcmc.iterations);
    m.get("burn_in", c.mcmc.burn_in);
    m.get("thin", c.mcmc.thin);
    m.get("adapt_rate", c.mcmc.adapt_rate);
    m.get("target_acceptance", c.mcmc.target_acceptance);
    m.get("revalidate_every", c.mcmc.revalidate_every);
    m.get("rhat_threshold", c.mcmc.rhat_threshold);
  });
  root.object("simulation", [&](Fields& s) {
    auto& v = c.simulation;
    s.get("n_trajectories", v.n_trajectories);
    s.get("horizon", v.horizon);
    s.get("seed", v.seed);
    s.get("mode", v.mode);
    s.get("tfr_floor", v.tfr_floor);
    s.get("allow_phase3_switch", v.allow_phase3_switch);
    s.get("sex_ratio_at_birth", v.sex_ratio_at_birth);
    s.get("pattern_convergence_periods", v.pattern_convergence_periods);
  });
  root.object("files", [&](Fields& f) {
    auto& v = c.files;
    f.get("tfr", v.tfr);
    f.get("e0", v.e0);
    f.get("population", v.population);
    f.get("migration", v.migration);
    f.get("fertility_pattern", v.fertility_pattern);
    f.get("ultimate_fertility_pattern", v.ultimate_fertility_pattern);
    f.get("life_table", v.life_table);
    f.get("phase2_chains", v.phase2_chains);
    f.get("phase3_chains", v.phase3_chains);
    f.get("e0_chains", v.e0_chains);
    f.get("chains", v.chains);
  });
  root.object("tfr", [&](Fields& t) { read_tfr(t, c.tfr); });
  root.object("e0", [&](Fields& e) { read_e0(e, c.e0); });
  root.object("validate", [&](Fields& v) {
    auto& x = c.validate;
    v.get("mode", x.mode);
    v.get("holdout_year", x.holdout_year);
    v.get("replications", x.replications);
    v.get("countries", x.countries);
    v.get("fit_periods", x.fit_periods);
    v.get("holdout_periods", x.holdout_periods);
    v.get("start_year", x.start_year);
    v.get("generator_rho", x.generator_rho);
    v.get("generator_sigma", x.generator_sigma);
    v.get("initial_low", x.initial_low);
    v.get("initial_high", x.initial_high);
  });
  root.finish();
  check_ranges(c);
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", fmt::format("cannot open {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

void check_ranges(const RunConfig& c) {
  if (std::find(kModels.begin(), kModels.end(), c.model) == kModels.end()) {
    throw ConfigError("model", fmt::format("unknown model '{}'", c.model));
  }
  const auto& m = c.mcmc;
  require(m.chains >= 1, "mcmc.chains", m.chains, "need at least 1");
  require(m.burn_in >= 0, "mcmc.burn_in", m.burn_in, "need >= 0");
  require(m.iterations > m.burn_in, "mcmc.iterations", m.iterations, "must exceed burn_in");
  require(m.thin >= 1, "mcmc.thin", m.thin, "need >= 1");
  require(m.adapt_rate > 0.0, "mcmc.adapt_rate", m.adapt_rate, "must be positive");
  require(m.target_acceptance > 0.0 && m.target_acceptance < 1.0, "mcmc.target_acceptance",
          m.target_acceptance, "must lie in (0, 1)");
  require(m.revalidate_every >= 1, "mcmc.revalidate_every", m.revalidate_every, "need >= 1");
  require(m.rhat_threshold > 1.0, "mcmc.rhat_threshold", m.rhat_threshold, "must exceed 1");

  const auto& s = c.simulation;
  require(s.n_trajectories >= 1, "simulation.n_trajectories", s.n_trajectories, "need >= 1");
  require(s.horizon >= 1 && s.horizon <= 200, "simulation.horizon", s.horizon,
          "must lie in [1, 200]");
  require(s.mode == "sample" || s.mode == "median", "simulation.mode", s.mode,
          "expected \"sample\" or \"median\"");
  require(s.tfr_floor >= 0.0 && s.tfr_floor < tfr::kReplacementTfr, "simulation.tfr_floor",
          s.tfr_floor, "must lie in [0, 2.1)");
  require(s.sex_ratio_at_birth > 0.0, "simulation.sex_ratio_at_birth", s.sex_ratio_at_birth,
          "must be positive");
  require(s.pattern_convergence_periods >= 0, "simulation.pattern_convergence_periods",
          s.pattern_convergence_periods, "need >= 0");

  const auto& t = c.tfr;
  require(t.rule.phase2_min_decline >= 0.0, "tfr.phase_rule.phase2_min_decline",
          t.rule.phase2_min_decline, "need >= 0");
  require(t.rule.phase3_ceiling > 0.0, "tfr.phase_rule.phase3_ceiling", t.rule.phase3_ceiling,
          "must be positive");
  try {
    t.phase2.error.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("tfr.phase2_error", e.what());
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& b = t.phase2.bounds;
    require(b.lower[i] >= 0.0 && b.lower[i] < b.upper[i],
            fmt::format("tfr.phase2_bounds.lower[{}]", i), b.lower[i],
            "need 0 <= lower < upper");
    require(b.spread_upper[i] > 0.0, fmt::format("tfr.phase2_bounds.spread_upper[{}]", i),
            b.spread_upper[i], "must be positive");
  }
  require(t.phase2.bounds.max_total_width > 0.0, "tfr.phase2_bounds.max_total_width",
          t.phase2.bounds.max_total_width, "must be positive");
  require(t.phase3_mu > 0.0, "tfr.phase3_mu", t.phase3_mu, "must be positive");
  const auto& p3 = t.phase3_bounds;
  require(p3.mu_mean_upper > 0.0, "tfr.phase3_bounds.mu_mean_upper", p3.mu_mean_upper,
          "must be positive");
  require(p3.mu_sd_upper > 0.0, "tfr.phase3_bounds.mu_sd_upper", p3.mu_sd_upper,
          "must be positive");
  require(p3.rho_sd_upper > 0.0, "tfr.phase3_bounds.rho_sd_upper", p3.rho_sd_upper,
          "must be positive");
  require(p3.sigma_eps_upper > 0.0, "tfr.phase3_bounds.sigma_eps_upper", p3.sigma_eps_upper,
          "must be positive");

  const auto& e = c.e0;
  require(e.model.shape.a1 > 0.0, "e0.a1", e.model.shape.a1, "must be positive");
  require(e.model.shape.a2 > 0.0 && e.model.shape.a2 < 1.0, "e0.a2", e.model.shape.a2,
          "must lie in (0, 1)");
  try {
    e.model.error.validate();
  } catch (const InvalidInput& x) {
    throw ConfigError("e0.omega", x.what());
  }
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    const auto& b = e.model.bounds;
    require(b.lower[i] >= 0.0 && b.lower[i] < b.upper[i], fmt::format("e0.bounds.lower[{}]", i),
            b.lower[i], "need 0 <= lower < upper");
    require(b.spread_upper[i] > 0.0, fmt::format("e0.bounds.spread_upper[{}]", i),
            b.spread_upper[i], "must be positive");
  }
  require(e.model.bounds.upper[5] <= e0::kMaxLateGain, "e0.bounds.upper[5]",
          e.model.bounds.upper[5], "z may not exceed 1.15");
  try {
    e.gap.validate();
  } catch (const InvalidInput& x) {
    throw ConfigError("e0.gap", x.what());
  }

  const auto& v = c.validate;
  require(v.mode == "holdout" || v.mode == "self-consistency", "validate.mode", v.mode,
          "expected \"holdout\" or \"self-consistency\"");
  require(v.holdout_year % 5 == 0, "validate.holdout_year", v.holdout_year,
          "must lie on the 5-year grid");
  require(v.replications >= 1, "validate.replications", v.replications, "need >= 1");
  require(v.countries >= 1, "validate.countries", v.countries, "need >= 1");
  require(v.fit_periods >= 4, "validate.fit_periods", v.fit_periods,
          "need at least 4 observed periods");
  require(v.holdout_periods >= 1, "validate.holdout_periods", v.holdout_periods, "need >= 1");
  require(v.start_year % 5 == 0, "validate.start_year", v.start_year,
          "must lie on the 5-year grid");
  require(v.generator_rho >= 0.0 && v.generator_rho < 1.0, "validate.generator_rho",
          v.generator_rho, "must lie in [0, 1)");
  require(v.generator_sigma > 0.0, "validate.generator_sigma", v.generator_sigma,
          "must be positive");
  require(v.initial_low > 0.0 && v.initial_low <= v.initial_high, "validate.initial_low",
          v.initial_low, "need 0 < initial_low <= initial_high");
}

namespace {

std::vector<std::pair<std::string, std::string*>> file_fields(FileConfig& f) {
  return {{"tfr", &f.tfr},
          {"e0", &f.e0},
          {"population", &f.population},
          {"migration", &f.migration},
          {"fertility_pattern", &f.fertility_pattern},
          {"ultimate_fertility_pattern", &f.ultimate_fertility_pattern},
          {"life_table", &f.life_table},
          {"phase2_chains", &f.phase2_chains},
          {"phase3_chains", &f.phase3_chains},
          {"e0_chains", &f.e0_chains},
          {"chains", &f.chains}};
}

}  // namespace

void resolve_paths(RunConfig& config, const std::filesystem::path& base) {
  for (auto& [name, value] : file_fields(config.files)) {
    if (!value->empty() && std::filesystem::path(*value).is_relative()) {
      *value = (base / *value).lexically_normal().string();
    }
  }
}

void require_files(const RunConfig& config, const std::vector<std::string>& fields) {
  FileConfig files = config.files;
  for (auto& [name, value] : file_fields(files)) {
    if (std::find(fields.begin(), fields.end(), name) == fields.end()) continue;
    if (value->empty()) throw ConfigError("files." + name, "required for this command");
    if (!std::filesystem::exists(*value)) {
      throw ConfigError("files." + name, fmt::format("{} does not exist", *value));
    }
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(serialize(config)); }

std::string model_hash(const RunConfig& config, const std::string& model) {
  json j = {{"model", model}, {"mcmc", mcmc_json(config.mcmc)}};
  if (model.rfind("tfr", 0) == 0) {
    j["tfr"] = tfr_json(config.tfr);
  } else {
    j["e0"] = e0_json(config.e0);
  }
  j["mcmc"].erase("rhat_threshold");
  return fnv1a_hex(j.dump());
}

}  // namespace popproj::cfg
