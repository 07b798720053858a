#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pdppo/env/environment.hpp"
#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"
#include "pdppo/random.hpp"

namespace pdppo::agents {

/// Factorised categorical policy: one softmax head per action component,
/// log-probabilities and entropies add across heads.

struct ActionSample {
  env::Action action;
  double logp = 0.0;
  double entropy = 0.0;
};

template <typename Probs>
double log_prob(const Probs& probs, const env::Action& action, const std::vector<int>& arities) {
  double lp = 0.0;
  Eigen::Index offset = 0;
  for (std::size_t g = 0; g < arities.size(); ++g) {
    lp += std::log(probs(offset + action[g]));
    offset += arities[g];
  }
  return lp;
}

/// Shannon entropy in nats, summed over heads. 0 log 0 = 0.
template <typename Probs>
double entropy(const Probs& probs, const std::vector<int>& arities) {
  double h = 0.0;
  Eigen::Index offset = 0;
  for (int n : arities) {
    for (int k = 0; k < n; ++k) {
      const double p = probs(offset + k);
      if (p > 0.0) h -= p * std::log(p);
    }
    offset += n;
  }
  return h;
}

/// Per-head argmax; ties go to the lowest index.
template <typename Probs>
env::Action greedy_action(const Probs& probs, const std::vector<int>& arities) {
  env::Action a(arities.size(), 0);
  Eigen::Index offset = 0;
  for (std::size_t g = 0; g < arities.size(); ++g) {
    int best = 0;
    for (int k = 1; k < arities[g]; ++k) {
      if (probs(offset + k) > probs(offset + best)) best = k;
    }
    a[g] = best;
    offset += arities[g];
  }
  return a;
}

template <typename Probs>
ActionSample sample_from(const Probs& probs, const std::vector<int>& arities, Rng& rng) {
  if (!probs.allFinite()) throw NumericError("policy produced non-finite probabilities");
  ActionSample out;
  out.action.resize(arities.size());
  Eigen::Index offset = 0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t g = 0; g < arities.size(); ++g) {
    const double u = u01(rng);
    double acc = 0.0;
    int pick = arities[g] - 1;
    for (int k = 0; k < arities[g]; ++k) {
      acc += probs(offset + k);
      if (u < acc) {
        pick = k;
        break;
      }
    }
    // Guard against landing on a zero-probability tail through rounding.
    while (probs(offset + pick) <= 0.0 && pick > 0) --pick;
    out.action[g] = pick;
    offset += arities[g];
  }
  out.logp = log_prob(probs, out.action, arities);
  out.entropy = entropy(probs, arities);
  return out;
}

inline ActionSample sample_action(const nn::MlpNet& actor, const env::ObsVec& obs,
                                  const std::vector<int>& arities, Rng& rng) {
  if (actor.head() != nn::Head::softmax) throw ConfigError("actor must have a softmax head");
  const nn::Vector probs = actor.forward(obs);
  return sample_from(probs, arities, rng);
}

}  // namespace pdppo::agents
