#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "metadkit/binning.hpp"
#include "metadkit/sdt.hpp"

namespace testing_support {

// Contiguous bool storage; std::vector<bool> cannot back a std::span.
class Flags {
 public:
  explicit Flags(const std::vector<bool>& v) : n_(v.size()), data_(new bool[v.size() + 1]) {
    for (std::size_t i = 0; i < n_; ++i) data_[i] = v[i];
  }
  std::span<const bool> span() const { return {data_.get(), n_}; }
  operator std::span<const bool>() const { return span(); }

 private:
  std::size_t n_;
  std::unique_ptr<bool[]> data_;
};

inline metadkit::CountTable table_of(std::vector<double> incorrect, std::vector<double> correct) {
  metadkit::CountTable t;
  t.n_ratings = static_cast<int>(correct.size() / 2);
  t.counts_incorrect = std::move(incorrect);
  t.counts_correct = std::move(correct);
  return t;
}

// Symmetric criteria spaced `step` apart around meta_c.
inline metadkit::MetaModel spaced_model(double meta_d, double meta_c, int n_ratings,
                                        double step = 0.5) {
  metadkit::MetaModel m;
  m.meta_d = meta_d;
  m.meta_c = meta_c;
  for (int k = 1; k < n_ratings; ++k) {
    m.criteria_r1.push_back(meta_c - step * k);
    m.criteria_r2.push_back(meta_c + step * k);
  }
  return m;
}

inline metadkit::CountTable scaled(metadkit::CountTable t, double k) {
  for (auto& v : t.counts_correct) v *= k;
  for (auto& v : t.counts_incorrect) v *= k;
  return t;
}

}  // namespace testing_support
