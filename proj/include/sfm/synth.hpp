#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfm/dataset.hpp"

namespace sfm {

enum class Family { exponential, weibull };
enum class CensoringScheme { none, uniform_administrative, exponential_independent };

/// Ground-truth generator: rate lambda(x) = exp(w . x) with an exponential
/// or Weibull event-time law and an independent censoring mechanism.
struct OracleSpec {
  Family family = Family::exponential;
  std::vector<double> weights;
  double shape = 1.0;  // Weibull k
  CensoringScheme censoring = CensoringScheme::uniform_administrative;
  double censoring_fraction = 0.3;
  std::uint64_t seed = 0;
  /// Scale of the censoring distribution (c_max or mean), filled in by
  /// generate() after tuning; 0 before.
  double censoring_scale = 0.0;

  void validate() const;
  double rate(std::span<const double> x) const;
};

struct SyntheticData {
  SurvDataset data;
  OracleSpec spec;
  /// Latent event and censoring times (censoring is +inf when disabled).
  std::vector<double> event_times;
  std::vector<double> censor_times;
};

/// Draws covariates i.i.d. N(0, 1), event times by inverse CDF and
/// censoring times scaled so the realized censored fraction lands within
/// 0.05 of the target. Ties between event and censoring count as events.
SyntheticData generate(std::size_t n, const OracleSpec& spec);

/// Event time with survival exp(-rate * t^k) at uniform draw u.
double inverse_survival_time(const OracleSpec& spec, double rate, double u);

/// True S(t | x).
double oracle_survival(const OracleSpec& spec, std::span<const double> x, double t);

/// C-index of the true risk ordering (higher rate = earlier) against the
/// observed times of `ds`, whose covariates must be on the oracle's scale.
double oracle_cindex(const OracleSpec& spec, const SurvDataset& ds);

std::string to_string(Family f);
std::string to_string(CensoringScheme c);
Family parse_family(const std::string& s);
CensoringScheme parse_censoring(const std::string& s);

}  // namespace sfm
