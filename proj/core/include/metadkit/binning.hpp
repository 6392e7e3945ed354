#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "metadkit/trials.hpp"

namespace metadkit {

// Confidence scale with n_ratings levels per response side, 2 * n_ratings
// quantile bins in total.
class RatingScale {
 public:
  explicit RatingScale(int n_ratings = 4);

  int n_ratings() const noexcept { return n_ratings_; }
  int n_bins() const noexcept { return 2 * n_ratings_; }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;

 private:
  int n_ratings_;
};

// R1 covers the lower half of the bins, R2 the upper half.
enum class Response { R1, R2 };

struct ResponseRating {
  Response response;
  int rating;  // 1..n_ratings, distance from the median boundary
};

// Bin 1 (lowest confidence) is R1 rating n_ratings; bin n_bins is R2 rating
// n_ratings; the two bins adjacent to the median boundary carry rating 1.
ResponseRating to_response_rating(int bin, const RatingScale& scale);
int to_bin(ResponseRating rr, const RatingScale& scale);

struct BinnedTrial {
  std::size_t index;  // position in the source TrialSet
  int bin;            // 1..n_bins
  Response response;
  int rating;
};

// Rank-based bin assignment: rank is the 1-based position of each value in a
// stable ascending sort (ties keep input order), and
// bin = floor((rank - 1) * n_bins / n) + 1.
std::vector<int> quantile_bins(std::span<const double> nlp, const RatingScale& scale);

std::vector<BinnedTrial> quantile_bin(const TrialSet& trials, const RatingScale& scale);

// Rows are indexed by bin (0-based here, bin b lives at [b - 1]).
struct CountTable {
  int n_ratings = 4;
  std::vector<double> counts_incorrect;
  std::vector<double> counts_correct;
  bool padded = false;
  double pad_value = 0.0;

  int n_bins() const noexcept { return 2 * n_ratings; }
  double total_correct() const;
  double total_incorrect() const;
  // Totals with any padding removed.
  double raw_total_correct() const;
  double raw_total_incorrect() const;
};

CountTable empty_counts(const RatingScale& scale);

CountTable build_counts(std::span<const int> bins, std::span<const bool> correct,
                        const RatingScale& scale);
CountTable build_counts(const std::vector<BinnedTrial>& binned, const TrialSet& trials,
                        const RatingScale& scale);

// Log-linear (Hautus) correction: adds pad_value to every cell of both rows.
// Throws AlreadyPadded on a padded table.
CountTable pad_counts(const CountTable& table, double pad_value = 0.5);

// Debug form: header plus one row per stimulus class.
void write_counts_csv(const CountTable& table, std::ostream& out);

}  // namespace metadkit
