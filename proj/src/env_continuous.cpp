#include "kmax/env_continuous.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <sstream>

namespace kmax {

namespace {

constexpr double kInvCdfTol = 1e-12;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double std_normal_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

// Monotone bisection inverse of an increasing CDF on [0,1].
std::function<double(double)> bisection_inverse(std::function<double(double)> cdf) {
  return [cdf = std::move(cdf)](double u) {
    if (u < 0.0 || u > 1.0) throw std::invalid_argument("inverse_cdf: u outside [0,1]");
    double lo = 0.0, hi = 1.0;
    while (hi - lo > kInvCdfTol) {
      double mid = 0.5 * (lo + hi);
      if (cdf(mid) < u)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
}

void require_bounded_density(double inf_density, double sup_density, const char* kind) {
  if (!(inf_density > 0.0) || !std::isfinite(sup_density)) {
    std::ostringstream msg;
    msg << kind << ": density must stay within (0, inf) on [0,1] to satisfy the "
        << "bi-Lipschitz envelope (got inf=" << inf_density << ", sup=" << sup_density << ")";
    throw std::invalid_argument(msg.str());
  }
}

double lipschitz_from_density(double inf_density, double sup_density) {
  return std::max({1.0, sup_density, 1.0 / inf_density});
}

}  // namespace

ArmValidation validate_arm(const ContinuousArm& arm, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("validate_arm: need >= 2 grid points");
  ArmValidation report;
  auto flag = [&](const std::string& issue) {
    report.ok = false;
    report.issues.push_back(issue);
  };

  if (std::abs(arm.cdf(0.0)) > 1e-9) flag("cdf(0) != 0");
  if (std::abs(arm.cdf(1.0) - 1.0) > 1e-9) flag("cdf(1) != 1");
  if (!(arm.lipschitz_upper >= 1.0)) flag("lipschitz_upper must be >= 1");

  const double l = arm.lipschitz_upper;
  double prev_x = 0.0, prev_f = arm.cdf(0.0);
  bool envelope_broken = false, monotone_broken = false;
  for (int i = 1; i < grid_points; ++i) {
    double x = static_cast<double>(i) / (grid_points - 1);
    double f = arm.cdf(x);
    double df = f - prev_f, dx = x - prev_x;
    if (df < -1e-12) monotone_broken = true;
    double upper_ratio = df / (l * dx);
    double lower_ratio = (dx / l) / std::max(df, 1e-300);
    report.worst_upper_ratio = std::max(report.worst_upper_ratio, upper_ratio);
    report.worst_lower_ratio = std::max(report.worst_lower_ratio, lower_ratio);
    // 1e-9 slack absorbs quadrature-free evaluation noise in user CDFs.
    if (upper_ratio > 1.0 + 1e-9 || lower_ratio > 1.0 + 1e-9) envelope_broken = true;
    prev_x = x;
    prev_f = f;
  }
  if (monotone_broken) flag("cdf not nondecreasing on the check grid");
  if (envelope_broken) flag("bi-Lipschitz envelope violated on the check grid");

  for (int i = 0; i < 21; ++i) {
    double x = static_cast<double>(i) / 20;
    if (std::abs(arm.inverse_cdf(arm.cdf(x)) - x) > 1e-9) {
      flag("inverse_cdf(cdf(x)) deviates by more than 1e-9");
      break;
    }
  }
  return report;
}

std::vector<double> sample_outcomes(const ContinuousEnv& env, const ActionSet& s, Rng& rng) {
  require_valid_action(s, static_cast<int>(env.arms.size()));
  if (static_cast<int>(s.size()) != env.k)
    throw std::invalid_argument("sample_outcomes: |s| must equal K");
  std::vector<double> out;
  out.reserve(s.size());
  for (int i : s) out.push_back(env.arms[i].inverse_cdf(rng.uniform01()));
  return out;
}

ValueIndexFeedback value_index_feedback(const std::vector<double>& outcomes, const ActionSet& s) {
  if (s.empty()) throw std::invalid_argument("value_index_feedback: empty action set");
  if (outcomes.size() != s.size())
    throw std::invalid_argument("value_index_feedback: one outcome per selected arm required");
  std::size_t best = 0;
  for (std::size_t i = 1; i < outcomes.size(); ++i)
    if (outcomes[i] > outcomes[best]) best = i;  // ties keep the lowest arm index
  return ValueIndexFeedback{outcomes[best], s[best], -1};
}

double expected_max_exact(const std::vector<ContinuousArm>& arms, const ActionSet& s,
                          int quad_points) {
  require_valid_action(s, static_cast<int>(arms.size()));
  if (quad_points < 2) throw std::invalid_argument("expected_max_exact: quad_points < 2");
  int n = quad_points | 1;  // composite Simpson needs an odd node count
  if (n < 3) n = 3;
  const double h = 1.0 / (n - 1);
  auto integrand = [&](double x) {
    double prod = 1.0;
    for (int i : s) prod *= arms[i].cdf(x);
    return 1.0 - prod;
  };
  double acc = integrand(0.0) + integrand(1.0);
  for (int i = 1; i < n - 1; ++i) acc += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

McEstimate expected_max_mc(const ContinuousEnv& env, const ActionSet& s, std::int64_t n_samples,
                           Rng& rng) {
  require_valid_action(s, static_cast<int>(env.arms.size()));
  if (n_samples < 1) throw std::invalid_argument("expected_max_mc: n_samples < 1");
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t it = 0; it < n_samples; ++it) {
    double best = 0.0;
    for (int i : s) best = std::max(best, env.arms[i].inverse_cdf(rng.uniform01()));
    sum += best;
    sum_sq += best * best;
  }
  double mean = sum / static_cast<double>(n_samples);
  if (n_samples == 1) return {mean, std::numeric_limits<double>::infinity()};
  double var = std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n_samples - 1));
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

ContinuousArm truncated_gaussian_arm(double mu, double sigma, int label) {
  if (!(sigma > 0.0)) throw std::invalid_argument("truncated_gaussian: sigma must be positive");
  const double phi_lo = std_normal_cdf((0.0 - mu) / sigma);
  const double phi_hi = std_normal_cdf((1.0 - mu) / sigma);
  const double z = phi_hi - phi_lo;
  if (!(z > 0.0))
    throw std::invalid_argument("truncated_gaussian: no probability mass on [0,1]");

  auto density = [=](double x) { return std_normal_pdf((x - mu) / sigma) / (sigma * z); };
  // The density is unimodal: extremes sit at the clamped mode and at the
  // endpoint farther from the mean.
  double sup = density(std::clamp(mu, 0.0, 1.0));
  double inf = std::min(density(0.0), density(1.0));
  require_bounded_density(inf, sup, "truncated_gaussian");

  ContinuousArm arm;
  arm.cdf = [=](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return (std_normal_cdf((x - mu) / sigma) - phi_lo) / z;
  };
  arm.inverse_cdf = bisection_inverse(arm.cdf);
  arm.lipschitz_upper = lipschitz_from_density(inf, sup);
  arm.label = label;
  return arm;
}

ContinuousArm uniform_mixture_arm(const std::vector<double>& weights,
                                  const std::vector<std::pair<double, double>>& intervals,
                                  int label) {
  if (weights.empty() || weights.size() != intervals.size())
    throw std::invalid_argument("uniform_mixture: need matching nonempty weights/intervals");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto [a, b] = intervals[i];
    if (weights[i] < 0.0) throw std::invalid_argument("uniform_mixture: negative weight");
    if (!(a >= 0.0 && a < b && b <= 1.0))
      throw std::invalid_argument("uniform_mixture: intervals must satisfy 0 <= a < b <= 1");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("uniform_mixture: weights must sum to 1");

  std::vector<double> w(weights);
  for (double& wi : w) wi /= total;

  // Piecewise-constant density; sweep the breakpoints for its extremes.
  std::vector<double> cuts{0.0, 1.0};
  for (auto [a, b] : intervals) {
    cuts.push_back(a);
    cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double inf = std::numeric_limits<double>::infinity(), sup = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    double x = 0.5 * (cuts[c] + cuts[c + 1]);
    double density = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto [a, b] = intervals[i];
      if (x >= a && x < b) density += w[i] / (b - a);
    }
    inf = std::min(inf, density);
    sup = std::max(sup, density);
  }
  require_bounded_density(inf, sup, "uniform_mixture");

  ContinuousArm arm;
  arm.cdf = [w, intervals](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double f = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto [a, b] = intervals[i];
      f += w[i] * std::clamp((x - a) / (b - a), 0.0, 1.0);
    }
    return std::min(f, 1.0);
  };
  arm.inverse_cdf = bisection_inverse(arm.cdf);
  arm.lipschitz_upper = lipschitz_from_density(inf, sup);
  arm.label = label;
  return arm;
}

ContinuousArm beta_arm(double a, double b, int label) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("beta: shape parameters must be positive");

  // Density extremes from the shape: x^(a-1)(1-x)^(b-1)/B(a,b) vanishes or
  // diverges at an endpoint unless the corresponding shape equals 1.
  const double inv_beta = 1.0 / std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  auto density = [=](double x) {
    return inv_beta * std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0);
  };
  double at0 = a < 1.0   ? std::numeric_limits<double>::infinity()
               : a > 1.0 ? 0.0
                         : density(0.0);
  double at1 = b < 1.0   ? std::numeric_limits<double>::infinity()
               : b > 1.0 ? 0.0
                         : density(1.0);
  double inf = std::min(at0, at1), sup = std::max(at0, at1);
  if (a + b != 2.0) {  // interior stationary point
    double x_star = (a - 1.0) / (a + b - 2.0);
    if (x_star > 0.0 && x_star < 1.0) {
      double f = density(x_star);
      inf = std::min(inf, f);
      sup = std::max(sup, f);
    }
  }
  require_bounded_density(inf, sup, "beta");

  ContinuousArm arm;
  arm.cdf = [=](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::ibeta(a, b, x);
  };
  arm.inverse_cdf = bisection_inverse(arm.cdf);
  arm.lipschitz_upper = lipschitz_from_density(inf, sup);
  arm.label = label;
  return arm;
}

}  // namespace kmax
