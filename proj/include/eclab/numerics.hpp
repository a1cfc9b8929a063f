#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace eclab {

// log(sum(exp(x_i))), max-subtracted for stability
inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline void log_softmax_into(std::span<const double> logits, std::span<double> out) {
  const double lse = log_sum_exp(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

inline void softmax_into(std::span<const double> logits, std::span<double> out) {
  log_softmax_into(logits, out);
  for (double& v : out) v = std::exp(v);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  softmax_into(logits, p);
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> lp(logits.size());
  log_softmax_into(logits, lp);
  return lp;
}

// Shannon entropy (nats) of softmax(logits)
inline double entropy_from_logits(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (double x : logits) {
    const double lp = x - lse;
    h -= std::exp(lp) * lp;
  }
  return h;
}

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// population standard deviation (1/N normalization)
inline double population_std(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

// sample standard deviation (1/(N-1)); N>=2
inline double sample_std(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace eclab
