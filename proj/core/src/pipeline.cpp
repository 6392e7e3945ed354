#include "metadkit/pipeline.hpp"

#include <map>
#include <memory>
#include <utility>

namespace metadkit {

std::string_view to_string(BinningScope scope) {
  return scope == BinningScope::PerCell ? "per_cell" : "global";
}

SdtSummary fit_binned(std::span<const int> bins, std::span<const bool> correct,
                      const AnalysisOptions& options) {
  SdtSummary out;
  out.counts = pad_counts(build_counts(bins, correct, options.scale), options.pad_value);
  out.type1 = type1_fit(out.counts);
  out.fit = meta_d_fit(out.counts, out.type1, options.fit);
  return out;
}

SdtSummary fit_sample(std::span<const double> nlp, std::span<const bool> correct,
                      const AnalysisOptions& options) {
  const auto bins = quantile_bins(nlp, options.scale);
  return fit_binned(bins, correct, options);
}

namespace {

struct Group {
  std::string condition;
  std::string format;
  std::vector<std::string> domains;
  std::map<std::string, std::vector<std::size_t>> members;  // domain -> indices
  std::vector<std::size_t> all;
};

}  // namespace

std::vector<DomainProfile> diagnose(const TrialSet& trials, const AnalysisOptions& options,
                                    std::vector<Warning>* warnings) {
  std::vector<Group> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> group_index;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& r = trials[i];
    auto key = std::make_pair(r.condition, r.format);
    auto [it, inserted] = group_index.emplace(key, groups.size());
    if (inserted) groups.push_back({r.condition, r.format, {}, {}, {}});
    Group& g = groups[it->second];
    if (!g.members.count(r.domain)) g.domains.push_back(r.domain);
    g.members[r.domain].push_back(i);
    g.all.push_back(i);
  }

  const std::size_t min_cell = 2 * static_cast<std::size_t>(options.scale.n_bins());
  std::vector<DomainProfile> out;
  for (const auto& g : groups) {
    std::vector<int> global_bins;
    std::map<std::size_t, int> bin_of;
    if (options.binning_scope == BinningScope::Global) {
      std::vector<double> nlp;
      for (auto i : g.all) nlp.push_back(trials[i].nlp);
      global_bins = quantile_bins(nlp, options.scale);
      for (std::size_t k = 0; k < g.all.size(); ++k) bin_of[g.all[k]] = global_bins[k];
    }

    std::vector<DomainProfile> cell_profiles;
    for (const auto& domain : g.domains) {
      const auto& idx = g.members.at(domain);
      if (idx.size() < min_cell) {
        throw Error(ErrorKind::TooFewTrials,
                    "cell (" + g.condition + ", " + g.format + ", " + domain + ") has " +
                        std::to_string(idx.size()) + " trials; at least " +
                        std::to_string(min_cell) + " required");
      }
      std::vector<double> nlp;
      std::unique_ptr<bool[]> correct(new bool[idx.size()]);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        nlp.push_back(trials[idx[k]].nlp);
        correct[k] = trials[idx[k]].correct;
      }
      std::span<const bool> flags(correct.get(), idx.size());

      DomainProfile p;
      p.domain = domain;
      p.condition = g.condition;
      p.format = g.format;
      p.n = idx.size();
      p.accuracy = accuracy(flags);
      p.nlp_gap = nlp_gap(nlp, flags);
      p.auroc2 = auroc2(nlp, flags);

      SdtSummary sdt;
      if (options.binning_scope == BinningScope::Global) {
        std::vector<int> bins;
        for (auto i : idx) bins.push_back(bin_of.at(i));
        sdt = fit_binned(bins, flags, options);
      } else {
        sdt = fit_sample(nlp, flags, options);
      }
      p.d_prime = sdt.fit.d_prime;
      p.criterion_c = sdt.fit.criterion_c;
      p.meta_d = sdt.fit.meta_d;
      p.m_ratio = sdt.fit.m_ratio;
      p.converged = sdt.fit.converged;
      p.low_dprime_warning = sdt.fit.low_dprime_warning;
      p.warnings = sdt.fit.warnings;
      cell_profiles.push_back(std::move(p));
    }

    auto by_m = rank_profile(std::move(cell_profiles), ProfileMetric::MRatio);
    auto by_a = rank_profile(std::move(by_m.profiles), ProfileMetric::Auroc2);
    if (warnings) {
      for (auto& w : by_m.ties) warnings->push_back(w);
      for (auto& w : by_a.ties) warnings->push_back(w);
    }
    for (auto& p : by_a.profiles) {
      if (warnings) {
        for (const auto& w : p.warnings) {
          warnings->push_back({w.code, "(" + p.condition + ", " + p.format + ", " +
                                           p.domain + "): " + w.message});
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<DomainProfile> select_profiles(const std::vector<DomainProfile>& profiles,
                                           const std::string& condition,
                                           const std::string& format) {
  std::vector<DomainProfile> out;
  for (const auto& p : profiles) {
    if (p.condition == condition && p.format == format) out.push_back(p);
  }
  return out;
}

}  // namespace metadkit
