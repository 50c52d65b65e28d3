#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "ipad/data_model.hpp"

namespace ipad {

enum class StatisticKind { lcd, mda_diff };

std::string_view to_string(StatisticKind k) noexcept;
StatisticKind statistic_from_string(std::string_view s);

/// Knockoff statistics, one per original variable. Large positive values are
/// evidence that the original beats its knockoff.
struct WStats {
  Vector w;
  StatisticKind kind = StatisticKind::lcd;
};

/// Indices are 0-based in the C++ API; reports print them 1-based.
struct SelectionResult {
  double threshold = std::numeric_limits<double>::infinity();
  std::vector<int> selected;  // ascending
  double q = 0.2;
  bool plus = false;
  StatisticKind kind = StatisticKind::lcd;
};

/// w_j = |beta_j| - |beta_{p+j}| for an augmented coefficient vector of length 2p.
WStats lcd(const Vector& beta_aug);

/// w_j = |imp_j| - |imp_{p+j}| for augmented importances of length 2p.
WStats mda_diff(const Vector& importance);

/// Smallest t in {|w_j| : w_j != 0} with
///   (plus + #{j : w_j <= -t}) / max(#{j : w_j >= t}, 1) <= q,
/// or +infinity when no candidate qualifies. plus = false is the knockoff
/// threshold, plus = true the knockoff+ threshold.
double knockoff_threshold(const WStats& w, double q, bool plus);

/// {j : w_j >= t}. Never selects w_j = 0 since t > 0.
SelectionResult select(const WStats& w, double t, double q, bool plus);

/// Threshold and selection in one step.
SelectionResult knockoff_select(const WStats& w, double q, bool plus);

/// |S_hat minus S0| / max(|S_hat|, 1).
double fdp(const std::vector<int>& selected, const std::vector<int>& true_support);

/// |S_hat intersect S0| / |S0|; throws on an empty true support.
double tdp(const std::vector<int>& selected, const std::vector<int>& true_support);

/// threshold (null when infinite), 1-based "selected", q, plus, statistic_kind;
/// optional column names.
std::string selection_to_json(const SelectionResult& s, const std::vector<std::string>& names = {});

}  // namespace ipad
