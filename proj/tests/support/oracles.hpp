#pragma once

// Deliberately naive reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "imboost/model.hpp"

namespace imboost::testing {

struct NaiveHeads {
  std::vector<double> mean;
  std::vector<double> log_var;
};

/// Scalar-loop forward pass reading the weights by slice name. `kink_margin`,
/// when given, is lowered to the smallest |pre-activation| of a hidden unit.
inline NaiveHeads naive_forward(const ParamStore& p, const std::string& net,
                                const std::vector<double>& input, double* kink_margin = nullptr) {
  const double slope = p.spec().leaky_slope;
  auto dense = [&](const std::string& layer, const std::vector<double>& in) {
    const auto w = p.tensor(net + "." + layer + ".weight");
    const auto b = p.tensor(net + "." + layer + ".bias");
    std::vector<double> out(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = b(r, 0);
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * in[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = s;
    }
    return out;
  };
  const auto& hidden = net == "encoder" ? p.spec().encoder_hidden : p.spec().decoder_hidden;
  std::vector<double> h = input;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    h = dense("hidden" + std::to_string(l), h);
    for (double& v : h) {
      if (kink_margin) *kink_margin = std::min(*kink_margin, std::abs(v));
      v = v > 0 ? v : slope * v;
    }
  }
  NaiveHeads out{dense("mean", h), dense("log_var", h)};
  for (double& v : out.log_var) v = std::clamp(v, kLogVarMin, kLogVarMax);
  return out;
}

/// Pairwise Mann-Whitney AUC: (2 * wins + ties) / (2 * pos * neg).
inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::uint64_t twice = 0, pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg)++;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos * neg));
}

/// Precision-recall sweep recounting every threshold from scratch.
inline double brute_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  std::size_t pos = 0;
  for (int v : y) pos += v == 1;
  double ap = 0.0;
  std::size_t prev_tp = 0;
  for (double t : thresholds) {
    std::size_t tp = 0, flagged = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        ++flagged;
        tp += y[i] == 1;
      }
    if (tp > prev_tp)
      ap += (static_cast<double>(tp - prev_tp) / static_cast<double>(pos)) *
            (static_cast<double>(tp) / static_cast<double>(flagged));
    prev_tp = tp;
  }
  return ap;
}

/// Central differences of f around `x`.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          Eigen::VectorXd x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a(i) - b(i)) / std::max({std::abs(a(i)), std::abs(b(i)), floor}));
  return worst;
}

}  // namespace imboost::testing
