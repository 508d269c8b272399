#include "smamba/metrics.hpp"

#include "smamba/error.hpp"

namespace smamba {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (counts_.size() != classes_ * classes_) {
    throw DimensionError("confusion matrix: " + std::to_string(counts_.size()) + " counts for " +
                         std::to_string(classes_) + " classes");
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= classes_ || predicted >= classes_) {
    throw IndexError("confusion matrix: class index out of range");
  }
  counts_[truth * classes_ + predicted] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw DimensionError("confusion matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t k) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(k, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t k) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, k);
  return s;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw ContractError("metrics: empty evaluation set");
  Metrics m{cm, std::vector<double>(cm.classes(), 0.0), 0.0, 0.0, 0.0, {}};
  const double n = static_cast<double>(total);

  // Kappa from exact integer tallies: (N*trace - sum row*col) / (N^2 - sum row*col).
  std::uint64_t trace = 0;
  unsigned __int128 chance = 0;
  double ca_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    trace += cm.at(k, k);
    const std::uint64_t row = cm.row_sum(k);
    chance += static_cast<unsigned __int128>(row) * cm.col_sum(k);
    if (row == 0) {
      m.absent_classes.push_back(k);
      continue;
    }
    m.ca[k] = static_cast<double>(cm.at(k, k)) / static_cast<double>(row);
    ca_sum += m.ca[k];
    ++present;
  }
  m.oa = static_cast<double>(trace) / n;
  m.aa = ca_sum / static_cast<double>(present);
  const auto n2 = static_cast<unsigned __int128>(total) * total;
  const auto agree = static_cast<unsigned __int128>(total) * trace;
  if (chance >= n2) {
    // Only one class is populated on both axes: agreement is perfect or absent.
    m.kappa = trace == total ? 1.0 : 0.0;
  } else {
    const double num = agree >= chance ? static_cast<double>(agree - chance)
                                       : -static_cast<double>(chance - agree);
    m.kappa = num / static_cast<double>(n2 - chance);
  }
  return m;
}

}  // namespace smamba
