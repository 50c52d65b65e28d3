#include "ipad/knockoff_inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace ipad {

std::string_view to_string(StatisticKind k) noexcept {
  return k == StatisticKind::lcd ? "lcd" : "mda_diff";
}

StatisticKind statistic_from_string(std::string_view s) {
  if (s == "lcd") return StatisticKind::lcd;
  if (s == "mda_diff" || s == "mda") return StatisticKind::mda_diff;
  throw ValidationError("unknown knockoff statistic '" + std::string(s) + "'");
}

namespace {

WStats paired_difference(const Vector& v, StatisticKind kind) {
  if (v.size() == 0 || v.size() % 2 != 0)
    throw ValidationError("knockoff statistic needs a non-empty even-length vector, got " +
                          std::to_string(v.size()));
  if (!v.allFinite()) throw NumericalError("knockoff statistic input is not finite");
  const Eigen::Index p = v.size() / 2;
  return WStats{v.head(p).cwiseAbs() - v.tail(p).cwiseAbs(), kind};
}

void check_q(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("target level q must lie in (0, 1)");
}

}  // namespace

WStats lcd(const Vector& beta_aug) { return paired_difference(beta_aug, StatisticKind::lcd); }

WStats mda_diff(const Vector& importance) { return paired_difference(importance, StatisticKind::mda_diff); }

double knockoff_threshold(const WStats& w, double q, bool plus) {
  check_q(q);
  if (!w.w.allFinite()) throw NumericalError("knockoff_threshold: statistics are not finite");

  std::vector<double> sorted(w.w.data(), w.w.data() + w.w.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> candidates;
  for (double v : sorted)
    if (v != 0.0) candidates.push_back(std::abs(v));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const double offset = plus ? 1.0 : 0.0;
  for (double t : candidates) {
    // #{w <= -t} and #{w >= t} on the sorted statistics.
    const auto neg = std::upper_bound(sorted.begin(), sorted.end(), -t) - sorted.begin();
    const auto pos = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t);
    const double ratio = (offset + static_cast<double>(neg)) / static_cast<double>(std::max<std::ptrdiff_t>(pos, 1));
    if (ratio <= q) return t;
  }
  return std::numeric_limits<double>::infinity();
}

SelectionResult select(const WStats& w, double t, double q, bool plus) {
  SelectionResult s;
  s.threshold = t;
  s.q = q;
  s.plus = plus;
  s.kind = w.kind;
  if (std::isfinite(t))
    for (Eigen::Index j = 0; j < w.w.size(); ++j)
      if (w.w(j) >= t) s.selected.push_back(static_cast<int>(j));
  return s;
}

SelectionResult knockoff_select(const WStats& w, double q, bool plus) {
  return select(w, knockoff_threshold(w, q, plus), q, plus);
}

double fdp(const std::vector<int>& selected, const std::vector<int>& true_support) {
  const std::set<int> truth(true_support.begin(), true_support.end());
  std::size_t false_hits = 0;
  for (int j : selected) false_hits += truth.count(j) ? 0 : 1;
  return static_cast<double>(false_hits) / static_cast<double>(std::max<std::size_t>(selected.size(), 1));
}

double tdp(const std::vector<int>& selected, const std::vector<int>& true_support) {
  if (true_support.empty()) throw ValidationError("tdp: true support is empty");
  const std::set<int> picked(selected.begin(), selected.end());
  std::size_t hits = 0;
  for (int j : true_support) hits += picked.count(j);
  return static_cast<double>(hits) / static_cast<double>(true_support.size());
}

std::string selection_to_json(const SelectionResult& s, const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  if (std::isfinite(s.threshold)) j["threshold"] = s.threshold;
  else j["threshold"] = nullptr;
  auto idx = nlohmann::ordered_json::array();
  for (int k : s.selected) idx.push_back(k + 1);
  j["selected"] = std::move(idx);
  if (!names.empty()) {
    auto nm = nlohmann::ordered_json::array();
    for (int k : s.selected) nm.push_back(names.at(static_cast<std::size_t>(k)));
    j["selected_names"] = std::move(nm);
  }
  j["q"] = s.q;
  j["plus"] = s.plus;
  j["statistic_kind"] = std::string(to_string(s.kind));
  return j.dump(2);
}

}  // namespace ipad
