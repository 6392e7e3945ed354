#include "metadkit/binning.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <numeric>
#include <ostream>

namespace metadkit {

RatingScale::RatingScale(int n_ratings) : n_ratings_(n_ratings) {
  if (n_ratings < 2) {
    throw Error(ErrorKind::InvalidConfig,
                "n_ratings must be >= 2, got " + std::to_string(n_ratings));
  }
}

ResponseRating to_response_rating(int bin, const RatingScale& scale) {
  const int n = scale.n_ratings();
  if (bin < 1 || bin > scale.n_bins()) {
    throw Error(ErrorKind::OutOfDomain, "bin " + std::to_string(bin) + " outside 1.." +
                                            std::to_string(scale.n_bins()));
  }
  if (bin <= n) return {Response::R1, n - bin + 1};
  return {Response::R2, bin - n};
}

int to_bin(ResponseRating rr, const RatingScale& scale) {
  const int n = scale.n_ratings();
  if (rr.rating < 1 || rr.rating > n) {
    throw Error(ErrorKind::OutOfDomain, "rating " + std::to_string(rr.rating) +
                                            " outside 1.." + std::to_string(n));
  }
  return rr.response == Response::R1 ? n - rr.rating + 1 : n + rr.rating;
}

std::vector<int> quantile_bins(std::span<const double> nlp, const RatingScale& scale) {
  const std::size_t n = nlp.size();
  const auto n_bins = static_cast<std::size_t>(scale.n_bins());
  if (n < n_bins) {
    throw Error(ErrorKind::TooFewTrials, std::to_string(n) + " trials for " +
                                             std::to_string(n_bins) + " bins");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return nlp[a] < nlp[b]; });
  std::vector<int> bins(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    bins[order[pos]] = static_cast<int>(pos * n_bins / n) + 1;
  }
  return bins;
}

std::vector<BinnedTrial> quantile_bin(const TrialSet& trials, const RatingScale& scale) {
  std::vector<double> nlp;
  nlp.reserve(trials.size());
  for (const auto& r : trials) nlp.push_back(r.nlp);
  const auto bins = quantile_bins(nlp, scale);
  std::vector<BinnedTrial> out;
  out.reserve(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    auto rr = to_response_rating(bins[i], scale);
    out.push_back({i, bins[i], rr.response, rr.rating});
  }
  return out;
}

double CountTable::total_correct() const {
  return std::accumulate(counts_correct.begin(), counts_correct.end(), 0.0);
}
double CountTable::total_incorrect() const {
  return std::accumulate(counts_incorrect.begin(), counts_incorrect.end(), 0.0);
}
double CountTable::raw_total_correct() const {
  return total_correct() - (padded ? pad_value * n_bins() : 0.0);
}
double CountTable::raw_total_incorrect() const {
  return total_incorrect() - (padded ? pad_value * n_bins() : 0.0);
}

CountTable empty_counts(const RatingScale& scale) {
  CountTable table;
  table.n_ratings = scale.n_ratings();
  table.counts_incorrect.assign(static_cast<std::size_t>(scale.n_bins()), 0.0);
  table.counts_correct.assign(static_cast<std::size_t>(scale.n_bins()), 0.0);
  return table;
}

CountTable build_counts(std::span<const int> bins, std::span<const bool> correct,
                        const RatingScale& scale) {
  if (bins.size() != correct.size()) {
    throw Error(ErrorKind::LengthMismatch, "bins and correctness differ in length");
  }
  CountTable table = empty_counts(scale);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] < 1 || bins[i] > scale.n_bins()) {
      throw Error(ErrorKind::OutOfDomain, "bin " + std::to_string(bins[i]) + " invalid");
    }
    auto& row = correct[i] ? table.counts_correct : table.counts_incorrect;
    row[static_cast<std::size_t>(bins[i] - 1)] += 1.0;
  }
  return table;
}

CountTable build_counts(const std::vector<BinnedTrial>& binned, const TrialSet& trials,
                        const RatingScale& scale) {
  std::vector<int> bins;
  bins.reserve(binned.size());
  for (const auto& b : binned) bins.push_back(b.bin);
  std::unique_ptr<bool[]> correct(new bool[binned.size()]);
  for (std::size_t i = 0; i < binned.size(); ++i) {
    correct[i] = trials[binned[i].index].correct;
  }
  return build_counts(bins, std::span<const bool>(correct.get(), binned.size()), scale);
}

CountTable pad_counts(const CountTable& table, double pad_value) {
  if (table.padded) throw Error(ErrorKind::AlreadyPadded, "count table is already padded");
  CountTable out = table;
  for (auto& c : out.counts_incorrect) c += pad_value;
  for (auto& c : out.counts_correct) c += pad_value;
  out.padded = true;
  out.pad_value = pad_value;
  return out;
}

void write_counts_csv(const CountTable& table, std::ostream& out) {
  out << "class";
  for (int b = 1; b <= table.n_bins(); ++b) out << ",bin" << b;
  out << '\n';
  auto row = [&](const char* name, const std::vector<double>& counts) {
    out << name;
    char buf[32];
    for (double c : counts) {
      std::snprintf(buf, sizeof buf, "%.17g", c);
      out << ',' << buf;
    }
    out << '\n';
  };
  row("incorrect", table.counts_incorrect);
  row("correct", table.counts_correct);
}

}  // namespace metadkit
