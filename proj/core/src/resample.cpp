#include "metadkit/resample.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "metadkit/nonparam.hpp"
#include "metadkit/rng.hpp"

namespace metadkit {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Accuracy: return "accuracy";
    case Metric::NlpGap: return "nlp_gap";
    case Metric::Auroc2: return "auroc2";
    case Metric::DPrime: return "d_prime";
    case Metric::MetaD: return "meta_d";
    case Metric::MRatio: return "m_ratio";
  }
  return "unknown";
}

std::optional<Metric> metric_from_string(std::string_view name) {
  for (Metric m : {Metric::Accuracy, Metric::NlpGap, Metric::Auroc2, Metric::DPrime,
                   Metric::MetaD, Metric::MRatio}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view to_string(Pairing pairing) {
  return pairing == Pairing::Paired ? "paired" : "independent";
}

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::Supported: return "supported";
    case Decision::NotSupported: return "not_supported";
    case Decision::Equivalent: return "equivalent";
    case Decision::NotEquivalent: return "not_equivalent";
  }
  return "unknown";
}

double evaluate_metric(Metric metric, std::span<const double> nlp,
                       std::span<const bool> correct, const AnalysisOptions& options,
                       bool* converged) {
  if (converged) *converged = true;
  switch (metric) {
    case Metric::Accuracy: return accuracy(correct);
    case Metric::NlpGap: return nlp_gap(nlp, correct);
    case Metric::Auroc2: return auroc2(nlp, correct);
    case Metric::DPrime: {
      const auto bins = quantile_bins(nlp, options.scale);
      auto counts = pad_counts(build_counts(bins, correct, options.scale), options.pad_value);
      if (counts.raw_total_correct() <= 0.0 || counts.raw_total_incorrect() <= 0.0) {
        throw Error(ErrorKind::OneClassOnly, "resample has a single correctness class");
      }
      return type1_fit(counts).d_prime;
    }
    case Metric::MetaD:
    case Metric::MRatio: {
      const auto bins = quantile_bins(nlp, options.scale);
      auto counts = pad_counts(build_counts(bins, correct, options.scale), options.pad_value);
      if (counts.raw_total_correct() <= 0.0 || counts.raw_total_incorrect() <= 0.0) {
        throw Error(ErrorKind::OneClassOnly, "resample has a single correctness class");
      }
      const auto type1 = type1_fit(counts);
      const auto fit = meta_d_fit(counts, type1, options.fit);
      if (converged) *converged = fit.converged;
      return metric == Metric::MetaD ? fit.meta_d : m_ratio(fit);
    }
  }
  throw Error(ErrorKind::InvalidConfig, "unknown metric");
}

double percentile(std::span<const double> sorted, double probability) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * probability;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

// Trials grouped by question id, ids in first-appearance order.
struct QuestionIndex {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::vector<std::size_t>> rows;

  explicit QuestionIndex(const TrialSet& trials) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
      auto [it, inserted] = rows.try_emplace(trials[i].question_id);
      if (inserted) ids.push_back(trials[i].question_id);
      it->second.push_back(i);
    }
  }
};

class Sample {
 public:
  void clear() {
    nlp_.clear();
    size_ = 0;
  }
  void add(const TrialRecord& r) {
    if (size_ == capacity_) grow();
    nlp_.push_back(r.nlp);
    correct_[size_++] = r.correct;
  }
  std::span<const double> nlp() const { return nlp_; }
  std::span<const bool> correct() const { return {correct_.get(), size_}; }

 private:
  void grow() {
    const std::size_t cap = capacity_ ? 2 * capacity_ : 256;
    std::unique_ptr<bool[]> next(new bool[cap]);
    std::copy(correct_.get(), correct_.get() + size_, next.get());
    correct_ = std::move(next);
    capacity_ = cap;
  }
  std::vector<double> nlp_;
  std::unique_ptr<bool[]> correct_;
  std::size_t size_ = 0;
  std::size_t capacity_ = 0;
};

Sample whole(const TrialSet& trials) {
  Sample s;
  for (const auto& r : trials) s.add(r);
  return s;
}

void draw(std::uint64_t seed, const std::string& label, std::size_t ordinal,
          std::size_t n, std::vector<std::size_t>& out) {
  StreamRng rng(seed, label, ordinal);
  out.resize(n);
  for (auto& k : out) k = static_cast<std::size_t>(rng.below(n));
}

enum Status : char { kOk = 0, kDegenerate = 1, kNonConverged = 2 };

// Evaluates `one(r, value)` for every resample ordinal on up to `workers`
// threads. Each ordinal writes only its own slot.
template <typename Fn>
void run_resamples(std::size_t n_resamples, unsigned workers, Fn one,
                   std::vector<double>& values, std::vector<char>& status) {
  values.assign(n_resamples, std::numeric_limits<double>::quiet_NaN());
  status.assign(n_resamples, kOk);
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(
                                                                   std::max<std::size_t>(1, n_resamples))));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&](unsigned worker) {
    try {
      for (std::size_t r = worker; r < n_resamples; r += w) {
        bool converged = true;
        try {
          values[r] = one(r, converged);
          status[r] = converged ? kOk : kNonConverged;
        } catch (const Error&) {
          status[r] = kDegenerate;
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (w == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned k = 0; k < w; ++k) threads.emplace_back(body, k);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct Summary {
  double ci_low;
  double ci_high;
  std::size_t degenerate;
  std::size_t nonconverged;
};

Summary summarize(const std::vector<double>& values, const std::vector<char>& status,
                  double ci_level) {
  std::vector<double> kept;
  Summary s{0.0, 0.0, 0, 0};
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (status[r] == kDegenerate) {
      ++s.degenerate;
      continue;
    }
    if (status[r] == kNonConverged) ++s.nonconverged;
    kept.push_back(values[r]);
  }
  std::sort(kept.begin(), kept.end());
  const double alpha = 1.0 - ci_level;
  s.ci_low = percentile(kept, alpha / 2.0);
  s.ci_high = percentile(kept, 1.0 - alpha / 2.0);
  return s;
}

bool too_many(std::size_t degenerate, std::size_t n_resamples) {
  return static_cast<double>(degenerate) >
         kDegenerateAlarmFraction * static_cast<double>(n_resamples);
}

std::string single_domain(const TrialSet& trials) {
  const auto domains = trials.domains();
  if (domains.size() > 1) {
    throw Error(ErrorKind::DomainMismatch, "bootstrap expects trials from one domain");
  }
  return domains.empty() ? std::string() : domains.front();
}

}  // namespace

BootstrapResult bootstrap_metric(const TrialSet& trials, Metric metric,
                                 const BootstrapOptions& options) {
  if (options.n_resamples < 1) throw Error(ErrorKind::InvalidConfig, "n_resamples must be >= 1");
  const std::string domain = single_domain(trials);
  const std::string label = options.stream_label.empty() ? domain : options.stream_label;
  const QuestionIndex index(trials);

  BootstrapResult result;
  result.ci_level = options.ci_level;
  result.n_resamples = options.n_resamples;
  {
    const Sample full = whole(trials);
    result.point = evaluate_metric(metric, full.nlp(), full.correct(), options.analysis);
  }

  std::vector<double> values;
  std::vector<char> status;
  run_resamples(
      options.n_resamples, options.workers,
      [&](std::size_t r, bool& converged) {
        thread_local std::vector<std::size_t> picks;
        thread_local Sample sample;
        draw(options.seed, label, r, index.ids.size(), picks);
        sample.clear();
        for (auto k : picks) {
          for (auto row : index.rows.at(index.ids[k])) sample.add(trials[row]);
        }
        return evaluate_metric(metric, sample.nlp(), sample.correct(), options.analysis,
                               &converged);
      },
      values, status);

  const auto s = summarize(values, status, options.ci_level);
  result.ci_low = s.ci_low;
  result.ci_high = s.ci_high;
  result.degenerate_count = s.degenerate;
  result.nonconverged_count = s.nonconverged;
  result.too_many_degenerate = too_many(s.degenerate, options.n_resamples);
  return result;
}

Decision ci_lower_rule(const ContrastResult& contrast) {
  return contrast.ci_low > 0.0 ? Decision::Supported : Decision::NotSupported;
}

Decision tost(const ContrastResult& contrast, double delta) {
  if (std::abs(contrast.ci_level - 0.90) > 1e-9) {
    throw Error(ErrorKind::WrongCiLevel, "TOST requires a 90% confidence interval");
  }
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidConfig, "TOST margin must be > 0");
  return (-delta < contrast.ci_low && contrast.ci_high < delta) ? Decision::Equivalent
                                                                : Decision::NotEquivalent;
}

ContrastResult bootstrap_contrast(const TrialSet& trials_a, const TrialSet& trials_b,
                                  Metric metric, const BootstrapOptions& options) {
  if (options.n_resamples < 1) throw Error(ErrorKind::InvalidConfig, "n_resamples must be >= 1");
  ContrastResult out;
  out.metric = metric;
  out.domain = single_domain(trials_a);
  if (!trials_a.empty()) out.condition_a = trials_a[0].condition;
  if (!trials_b.empty()) out.condition_b = trials_b[0].condition;
  out.ci_level = options.ci_level;
  out.n_resamples = options.n_resamples;
  out.seed = options.seed;
  out.pairing = options.pairing;

  const bool paired = options.pairing == Pairing::Paired;
  if (paired) {
    const auto report = validate_paired(trials_a, trials_b);
    if (!report.paired) {
      throw Error(ErrorKind::UnpairedSets,
                  "contrast sets do not share the same question ids");
    }
  }

  {
    const Sample full_a = whole(trials_a);
    const Sample full_b = whole(trials_b);
    out.delta_hat =
        evaluate_metric(metric, full_a.nlp(), full_a.correct(), options.analysis) -
        evaluate_metric(metric, full_b.nlp(), full_b.correct(), options.analysis);
  }

  const std::string label = options.stream_label.empty()
                                ? out.domain + "/" + out.condition_a + "-" + out.condition_b
                                : options.stream_label;
  const QuestionIndex index_a(trials_a);
  const QuestionIndex index_b(trials_b);

  std::vector<double> values;
  std::vector<char> status;
  run_resamples(
      options.n_resamples, options.workers,
      [&](std::size_t r, bool& converged) {
        thread_local std::vector<std::size_t> picks_a, picks_b;
        thread_local Sample sample_a, sample_b;
        sample_a.clear();
        sample_b.clear();
        if (paired) {
          draw(options.seed, label, r, index_a.ids.size(), picks_a);
          for (auto k : picks_a) {
            const auto& id = index_a.ids[k];
            for (auto row : index_a.rows.at(id)) sample_a.add(trials_a[row]);
            for (auto row : index_b.rows.at(id)) sample_b.add(trials_b[row]);
          }
        } else {
          draw(options.seed, label + "#a", r, index_a.ids.size(), picks_a);
          draw(options.seed, label + "#b", r, index_b.ids.size(), picks_b);
          for (auto k : picks_a) {
            for (auto row : index_a.rows.at(index_a.ids[k])) sample_a.add(trials_a[row]);
          }
          for (auto k : picks_b) {
            for (auto row : index_b.rows.at(index_b.ids[k])) sample_b.add(trials_b[row]);
          }
        }
        bool conv_a = true, conv_b = true;
        const double a = evaluate_metric(metric, sample_a.nlp(), sample_a.correct(),
                                         options.analysis, &conv_a);
        const double b = evaluate_metric(metric, sample_b.nlp(), sample_b.correct(),
                                         options.analysis, &conv_b);
        converged = conv_a && conv_b;
        return a - b;
      },
      values, status);

  const auto s = summarize(values, status, options.ci_level);
  out.ci_low = s.ci_low;
  out.ci_high = s.ci_high;
  out.degenerate_resample_count = s.degenerate;
  out.nonconverged_count = s.nonconverged;
  out.too_many_degenerate = too_many(s.degenerate, options.n_resamples);
  out.point_outside_ci = out.delta_hat < out.ci_low || out.delta_hat > out.ci_high;
  out.decision = ci_lower_rule(out);
  return out;
}

std::vector<HypothesisSpec> confirmatory_hypotheses(double tost_delta, double ci_level,
                                                    double tost_ci_level) {
  return {
      {"H1", "2", "1", {"Science"}, Metric::MetaD, Rule::CiLowerGtZero, 0.0, ci_level, {}},
      {"H2", "2", "1", {"History", "Arts", "Geography"}, Metric::MetaD, Rule::Tost,
       tost_delta, tost_ci_level, {}},
      {"H3", "2", "3", {"Science"}, Metric::MetaD, Rule::CiLowerGtZero, 0.0, ci_level, {}},
      {"H4", "2", "4", {"Science"}, Metric::MetaD, Rule::CiLowerGtZero, 0.0, ci_level, {}},
  };
}

std::vector<ContrastResult> run_hypothesis_suite(const TrialSet& trials,
                                                 const std::vector<HypothesisSpec>& specs,
                                                 const SuiteOptions& options) {
  std::vector<ContrastResult> results;
  for (const auto& spec : specs) {
    if (spec.rule == Rule::Tost && !(spec.delta > 0.0)) {
      throw Error(ErrorKind::InvalidConfig, spec.id + ": TOST margin must be > 0");
    }
    for (const auto& domain : spec.domains) {
      auto subset = [&](const std::string& condition) {
        TrialSet s = filter(trials, Selector{domain, condition, spec.format});
        if (s.empty()) {
          throw Error(ErrorKind::MissingCondition, spec.id + ": no trials for condition " +
                                                       condition + " in " + domain);
        }
        if (s.formats().size() > 1) {
          throw Error(ErrorKind::InvalidConfig,
                      spec.id + ": condition " + condition + " in " + domain +
                          " spans several formats; select one");
        }
        return s;
      };
      const TrialSet a = subset(spec.condition_a);
      const TrialSet b = subset(spec.condition_b);

      BootstrapOptions boot;
      boot.n_resamples = options.n_resamples;
      boot.seed = options.seed;
      boot.ci_level = spec.ci_level;
      boot.workers = options.workers;
      boot.pairing = options.pairing;
      boot.analysis = options.analysis;
      boot.stream_label = spec.id + "/" + domain;

      ContrastResult r = bootstrap_contrast(a, b, spec.metric, boot);
      r.hypothesis_id = spec.id;
      r.decision = spec.rule == Rule::Tost ? tost(r, spec.delta) : ci_lower_rule(r);
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace metadkit
