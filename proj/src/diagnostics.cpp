#include "popproj/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "popproj/demography.hpp"
#include "popproj/distributions.hpp"

namespace popproj::mcmc {

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// autocovariance at one lag, divisor n
double autocovariance(const std::vector<double>& x, double m, std::size_t lag) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - m) * (x[t + lag] - m);
  return s / static_cast<double>(n);
}

void check_chains(std::span<const std::vector<double>> chains) {
  if (chains.empty() || chains[0].size() < 2) {
    throw InvalidInput("diagnostics need at least one chain with two or more draws");
  }
  for (const auto& c : chains) {
    if (c.size() != chains[0].size()) throw InvalidInput("chains differ in length");
  }
}

}  // namespace

double potential_scale_reduction(std::span<const std::vector<double>> chains) {
  check_chains(chains);
  const auto m = static_cast<double>(chains.size());
  const auto n = static_cast<double>(chains[0].size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = mean(c);
    means.push_back(mu);
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    within += ss / n;
  }
  within /= m;
  double between_over_n = 0.0;
  if (chains.size() > 1) {
    const double grand = mean(means);
    for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
    between_over_n /= (m - 1.0);
  }
  if (within <= 0.0) return between_over_n > 0.0 ? kInf : 1.0;
  return std::sqrt((within + between_over_n) / within);
}

double effective_sample_size(std::span<const std::vector<double>> chains) {
  check_chains(chains);
  const std::size_t m = chains.size();
  const std::size_t n = chains[0].size();
  const double total = static_cast<double>(m * n);

  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    within += autocovariance(c, means.back(), 0) * static_cast<double>(n) /
              static_cast<double>(n - 1);
  }
  within /= static_cast<double>(m);
  double var_plus = within * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) {
    const double grand = mean(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    var_plus += b / static_cast<double>(m - 1);
  }
  if (!(var_plus > 0.0)) return total;

  auto rho = [&](std::size_t lag) {
    double acov_mean = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov_mean += autocovariance(chains[c], means[c], lag);
    acov_mean /= static_cast<double>(m);
    return 1.0 - (within - acov_mean) / var_plus;
  };

  // Geyer: sum pairs while positive, enforcing monotone decrease
  double tau = -1.0;
  double previous_pair = kInf;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double pair = rho(lag) + rho(lag + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    previous_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

DiagnosticsReport diagnostics(std::span<const ChainStore> chains, double threshold) {
  if (chains.empty()) throw InvalidInput("diagnostics need at least one chain");
  DiagnosticsReport report;
  report.threshold = threshold;
  report.chains = chains.size();
  report.single_chain = chains.size() == 1;
  const auto& columns = chains[0].columns;
  const std::size_t n = chains[0].draws.size();
  for (const auto& c : chains) {
    if (c.columns != columns) throw InvalidInput("chains come from different models");
    if (c.draws.size() != n) throw InvalidInput("chains differ in length");
    if (c.metadata.model != chains[0].metadata.model) {
      throw InvalidInput("chains come from different models");
    }
  }
  report.draws_per_chain = n;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    std::vector<std::vector<double>> series;
    if (report.single_chain) {
      const std::size_t half = n / 2;
      std::vector<double> a, b;
      for (std::size_t r = 0; r < half; ++r) a.push_back(chains[0].draws[r][j]);
      for (std::size_t r = n - half; r < n; ++r) b.push_back(chains[0].draws[r][j]);
      series = {std::move(a), std::move(b)};
    } else {
      for (const auto& c : chains) {
        std::vector<double> s;
        s.reserve(n);
        for (const auto& row : c.draws) s.push_back(row[j]);
        series.push_back(std::move(s));
      }
    }
    ScalarDiagnostic d;
    d.name = columns[j];
    d.rhat = potential_scale_reduction(series);
    d.ess = effective_sample_size(series);
    d.flagged = !(d.rhat <= threshold);
    report.any_flagged = report.any_flagged || d.flagged;
    report.scalars.push_back(std::move(d));
  }
  return report;
}

std::string DiagnosticsReport::to_text() const {
  std::string out = fmt::format("chains: {}  draws/chain: {}  threshold: {}\n", chains,
                                draws_per_chain, threshold);
  if (single_chain) out += "single chain: R-hat computed from split halves (weaker check)\n";
  out += fmt::format("{:<40} {:>10} {:>10}  flag\n", "parameter", "rhat", "ess");
  for (const auto& s : scalars) {
    out += fmt::format("{:<40} {:>10.4f} {:>10.1f}  {}\n", s.name, s.rhat, s.ess,
                       s.flagged ? "R-HAT" : "");
  }
  out += any_flagged ? "status: WARN (potential scale reduction above threshold)\n"
                     : "status: OK\n";
  return out;
}

}  // namespace popproj::mcmc
