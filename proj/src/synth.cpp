#include "sfm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sfm/metrics.hpp"
#include "sfm/rng.hpp"

namespace sfm {

namespace {

double censored_fraction(std::span<const double> event_times, std::span<const double> base,
                         double scale) {
  std::size_t censored = 0;
  for (std::size_t i = 0; i < event_times.size(); ++i)
    if (event_times[i] > scale * base[i]) ++censored;
  return static_cast<double>(censored) / static_cast<double>(event_times.size());
}

}  // namespace

void OracleSpec::validate() const {
  if (weights.empty()) throw std::invalid_argument("oracle: at least one covariate weight is required");
  for (double w : weights)
    if (!std::isfinite(w)) throw std::invalid_argument("oracle: weights must be finite");
  if (family == Family::weibull && !(shape > 0.0)) throw std::invalid_argument("oracle: Weibull shape must be positive");
  if (censoring != CensoringScheme::none && !(censoring_fraction > 0.0 && censoring_fraction < 1.0)) {
    throw std::invalid_argument("oracle: censoring fraction must lie in (0, 1)");
  }
}

double OracleSpec::rate(std::span<const double> x) const {
  if (x.size() != weights.size()) throw std::invalid_argument("oracle: covariate width mismatch");
  double z = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) z += weights[k] * x[k];
  return std::exp(z);
}

double inverse_survival_time(const OracleSpec& spec, double rate, double u) {
  const double base = -std::log(u) / rate;
  return spec.family == Family::exponential ? base : std::pow(base, 1.0 / spec.shape);
}

SyntheticData generate(std::size_t n, const OracleSpec& spec) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("generate: n must be at least 1");
  const std::size_t d = spec.weights.size();
  Rng rng(spec.seed);

  SyntheticData out;
  out.spec = spec;
  SurvDataset& ds = out.data;
  ds.X = Matrix(n, d);
  for (double& v : ds.X.values()) v = rng.normal();
  for (std::size_t k = 0; k < d; ++k) {
    ds.schema.columns.push_back({"x" + std::to_string(k + 1), ColumnKind::continuous});
    ds.feature_names.push_back("x" + std::to_string(k + 1));
  }
  out.event_times.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.event_times[i] = inverse_survival_time(spec, spec.rate(ds.X.row_span(i)), rng.uniform());
  }

  std::vector<double> base(n, std::numeric_limits<double>::infinity());
  double scale = 1.0;
  if (spec.censoring != CensoringScheme::none) {
    for (double& b : base) {
      const double u = rng.uniform();
      b = spec.censoring == CensoringScheme::uniform_administrative ? u : -std::log(u);
    }
    // The censored fraction falls monotonically as the scale grows; bisect
    // on log-scale between bounds that bracket the target.
    double lo = 1e-12, hi = 1.0;
    while (censored_fraction(out.event_times, base, hi) > spec.censoring_fraction && hi < 1e300) hi *= 2.0;
    while (censored_fraction(out.event_times, base, lo) < spec.censoring_fraction && lo > 1e-300) lo *= 0.5;
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = std::sqrt(lo * hi);
      if (censored_fraction(out.event_times, base, mid) > spec.censoring_fraction) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double f_lo = censored_fraction(out.event_times, base, lo);
    const double f_hi = censored_fraction(out.event_times, base, hi);
    scale = std::abs(f_lo - spec.censoring_fraction) < std::abs(f_hi - spec.censoring_fraction) ? lo : hi;
    const double achieved = censored_fraction(out.event_times, base, scale);
    if (std::abs(achieved - spec.censoring_fraction) > 0.05) {
      throw std::runtime_error("generate: censoring fraction " + std::to_string(spec.censoring_fraction) +
                               " unattainable; achieved " + std::to_string(achieved));
    }
    out.spec.censoring_scale = scale;
  }

  out.censor_times.resize(n);
  ds.t.resize(n);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.censor_times[i] = scale * base[i];
    const bool event = out.event_times[i] <= out.censor_times[i];
    ds.y[i] = event ? 1 : 0;
    ds.t[i] = event ? out.event_times[i] : out.censor_times[i];
  }
  return out;
}

double oracle_survival(const OracleSpec& spec, std::span<const double> x, double t) {
  if (t < 0.0) throw std::invalid_argument("oracle_survival: negative time");
  const double r = spec.rate(x);
  return spec.family == Family::exponential ? std::exp(-r * t) : std::exp(-r * std::pow(t, spec.shape));
}

double oracle_cindex(const OracleSpec& spec, const SurvDataset& ds) {
  if (ds.size() < 2) throw std::invalid_argument("oracle_cindex: need at least two subjects");
  std::vector<double> expected_order(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) expected_order[i] = -std::log(spec.rate(ds.X.row_span(i)));
  return c_index(expected_order, ds.t, ds.y);
}

std::string to_string(Family f) { return f == Family::exponential ? "exponential" : "weibull"; }

std::string to_string(CensoringScheme c) {
  switch (c) {
    case CensoringScheme::none: return "none";
    case CensoringScheme::uniform_administrative: return "uniform-administrative";
    case CensoringScheme::exponential_independent: return "exponential-independent";
  }
  return "none";
}

Family parse_family(const std::string& s) {
  if (s == "exponential") return Family::exponential;
  if (s == "weibull") return Family::weibull;
  throw std::invalid_argument("unknown family '" + s + "'");
}

CensoringScheme parse_censoring(const std::string& s) {
  if (s == "none") return CensoringScheme::none;
  if (s == "uniform-administrative" || s == "uniform") return CensoringScheme::uniform_administrative;
  if (s == "exponential-independent" || s == "exponential") return CensoringScheme::exponential_independent;
  throw std::invalid_argument("unknown censoring scheme '" + s + "'");
}

}  // namespace sfm
