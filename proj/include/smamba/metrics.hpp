#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace smamba {

// Rows = true class, columns = predicted class, both 0-based.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
  void merge(const ConfusionMatrix& other);
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t k) const;
  std::uint64_t col_sum(std::size_t k) const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct Metrics {
  ConfusionMatrix confusion;
  std::vector<double> ca;  // 0 for classes absent from the evaluated set
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<std::size_t> absent_classes;  // 0-based, excluded from AA
};

Metrics compute_metrics(const ConfusionMatrix& cm);

}  // namespace smamba
