#include "metadkit/nonparam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <set>

namespace metadkit {

namespace {

std::vector<double> nlp_of(const TrialSet& trials) {
  std::vector<double> out;
  out.reserve(trials.size());
  for (const auto& r : trials) out.push_back(r.nlp);
  return out;
}

std::unique_ptr<bool[]> correct_of(const TrialSet& trials) {
  std::unique_ptr<bool[]> out(new bool[trials.size()]);
  for (std::size_t i = 0; i < trials.size(); ++i) out[i] = trials[i].correct;
  return out;
}

void check_lengths(std::span<const double> nlp, std::span<const bool> correct) {
  if (nlp.size() != correct.size()) {
    throw Error(ErrorKind::LengthMismatch, "nlp and correctness differ in length");
  }
}

}  // namespace

double auroc2(std::span<const double> nlp, std::span<const bool> correct) {
  check_lengths(nlp, correct);
  const std::size_t n = nlp.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return nlp[a] < nlp[b]; });

  // Twice the rank sum of the correct class; tied groups share rank
  // (first + last) / 2, so doubling keeps everything integral.
  std::int64_t twice_rank_sum = 0;
  std::int64_t n_correct = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t stop = start + 1;
    while (stop < n && nlp[order[stop]] == nlp[order[start]]) ++stop;
    const auto twice_rank = static_cast<std::int64_t>(start + 1 + stop);
    for (std::size_t k = start; k < stop; ++k) {
      if (correct[order[k]]) {
        twice_rank_sum += twice_rank;
        ++n_correct;
      }
    }
    start = stop;
  }
  const std::int64_t n_incorrect = static_cast<std::int64_t>(n) - n_correct;
  if (n_correct == 0 || n_incorrect == 0) {
    throw Error(ErrorKind::OneClassOnly, "AUROC2 needs correct and incorrect trials");
  }
  const std::int64_t twice_u = twice_rank_sum - n_correct * (n_correct + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(n_correct) * static_cast<double>(n_incorrect));
}

double auroc2(const TrialSet& trials) {
  const auto nlp = nlp_of(trials);
  const auto correct = correct_of(trials);
  return auroc2(nlp, std::span<const bool>(correct.get(), trials.size()));
}

double nlp_gap(std::span<const double> nlp, std::span<const bool> correct) {
  check_lengths(nlp, correct);
  double sum_c = 0.0, sum_i = 0.0;
  std::size_t n_c = 0, n_i = 0;
  for (std::size_t i = 0; i < nlp.size(); ++i) {
    if (correct[i]) {
      sum_c += nlp[i];
      ++n_c;
    } else {
      sum_i += nlp[i];
      ++n_i;
    }
  }
  if (n_c == 0 || n_i == 0) {
    throw Error(ErrorKind::OneClassOnly, "NLP gap needs correct and incorrect trials");
  }
  return sum_c / static_cast<double>(n_c) - sum_i / static_cast<double>(n_i);
}

double nlp_gap(const TrialSet& trials) {
  const auto nlp = nlp_of(trials);
  const auto correct = correct_of(trials);
  return nlp_gap(nlp, std::span<const bool>(correct.get(), trials.size()));
}

double accuracy(std::span<const bool> correct) {
  if (correct.empty()) throw Error(ErrorKind::EmptySet, "accuracy of an empty set");
  const auto hits = std::count(correct.begin(), correct.end(), true);
  return static_cast<double>(hits) / static_cast<double>(correct.size());
}

double accuracy(const TrialSet& trials) {
  const auto correct = correct_of(trials);
  return accuracy(std::span<const bool>(correct.get(), trials.size()));
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t stop = start + 1;
    while (stop < n && values[order[stop]] == values[order[start]]) ++stop;
    const double rank = 0.5 * static_cast<double>(start + 1 + stop);
    for (std::size_t k = start; k < stop; ++k) ranks[order[k]] = rank;
    start = stop;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::LengthMismatch, "Spearman rho needs equal lengths >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorKind::ZeroVariance, "Spearman rho undefined for a constant vector");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::string_view to_string(ProfileMetric metric) {
  return metric == ProfileMetric::MRatio ? "m_ratio" : "auroc2";
}

RankedProfiles rank_profile(std::vector<DomainProfile> profiles, ProfileMetric metric) {
  RankedProfiles out;
  if (profiles.empty()) return out;
  for (const auto& p : profiles) {
    if (p.condition != profiles.front().condition || p.format != profiles.front().format) {
      throw Error(ErrorKind::MixedProfileSet,
                  "profiles span more than one (condition, format)");
    }
  }
  auto value = [metric](const DomainProfile& p) {
    return metric == ProfileMetric::MRatio ? p.m_ratio : p.auroc2;
  };
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = value(profiles[a]), vb = value(profiles[b]);
    if (va != vb) return va > vb;
    return profiles[a].domain < profiles[b].domain;
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& p = profiles[order[r]];
    (metric == ProfileMetric::MRatio ? p.rank_m_ratio : p.rank_auroc2) =
        static_cast<int>(r + 1);
    if (r > 0 && value(profiles[order[r - 1]]) == value(p)) {
      out.ties.push_back({"RankTie", std::string(to_string(metric)) + " tie between " +
                                         profiles[order[r - 1]].domain + " and " +
                                         p.domain + " broken by domain name"});
    }
  }
  out.profiles = std::move(profiles);
  return out;
}

FormatComparison compare_formats(const std::vector<DomainProfile>& profiles_a,
                                 const std::vector<DomainProfile>& profiles_b) {
  std::map<std::string, const DomainProfile*> by_domain_b;
  for (const auto& p : profiles_b) by_domain_b[p.domain] = &p;
  std::set<std::string> domains_a;
  for (const auto& p : profiles_a) domains_a.insert(p.domain);
  std::set<std::string> domains_b;
  for (const auto& p : profiles_b) domains_b.insert(p.domain);
  if (domains_a != domains_b || domains_a.size() != profiles_a.size() ||
      domains_b.size() != profiles_b.size()) {
    throw Error(ErrorKind::DomainMismatch,
                "format comparison needs one profile per domain on both sides");
  }

  FormatComparison out;
  if (!profiles_a.empty()) out.format_a = profiles_a.front().format;
  if (!profiles_b.empty()) out.format_b = profiles_b.front().format;

  std::vector<double> mr_a, mr_b, au_a, au_b;
  for (const auto& a : profiles_a) {
    const auto& b = *by_domain_b.at(a.domain);
    out.moves.push_back({a.domain, a.rank_m_ratio, b.rank_m_ratio, a.rank_auroc2,
                         b.rank_auroc2, a.m_ratio, b.m_ratio, a.auroc2, b.auroc2,
                         a.d_prime, b.d_prime});
    mr_a.push_back(a.m_ratio);
    mr_b.push_back(b.m_ratio);
    au_a.push_back(a.auroc2);
    au_b.push_back(b.auroc2);
  }
  auto rho = [&](const std::vector<double>& x, const std::vector<double>& y,
                 const char* name) -> std::optional<double> {
    try {
      return spearman_rho(x, y);
    } catch (const Error& e) {
      out.notes.push_back(std::string(name) + " Spearman rho undefined: " + e.what());
      return std::nullopt;
    }
  };
  out.rho_m_ratio = rho(mr_a, mr_b, "M-ratio");
  out.rho_auroc2 = rho(au_a, au_b, "AUROC2");
  return out;
}

}  // namespace metadkit
