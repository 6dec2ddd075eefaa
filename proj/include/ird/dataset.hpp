#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ird/errors.hpp"

namespace ird {

/// Paired count responses and real covariates.
///
/// Responses are stored row-major, `response_dim()` counts per case (1 for
/// scalar-count models). Covariates are one real per case. Only the responses
/// carry a probability model; covariates are treated as known constants.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<std::int64_t> counts, std::size_t response_dim, std::vector<double> covariates)
      : counts_(std::move(counts)), dim_(response_dim), covariates_(std::move(covariates)) {
    if (dim_ == 0) throw DimensionError("response dimension must be positive");
    if (counts_.size() != dim_ * covariates_.size())
      throw DimensionError("responses and covariates have different case counts");
    if (covariates_.empty()) throw DimensionError("dataset needs at least one case");
    if (std::any_of(counts_.begin(), counts_.end(), [](std::int64_t c) { return c < 0; }))
      throw DimensionError("counts must be non-negative");
  }

  static Dataset scalar(std::vector<std::int64_t> y, std::vector<double> x) {
    return Dataset(std::move(y), 1, std::move(x));
  }

  std::size_t size() const noexcept { return covariates_.size(); }
  std::size_t response_dim() const noexcept { return dim_; }

  std::span<const std::int64_t> response(std::size_t i) const {
    return std::span<const std::int64_t>(counts_).subspan(i * dim_, dim_);
  }
  std::int64_t response_total(std::size_t i) const {
    const auto r = response(i);
    return std::accumulate(r.begin(), r.end(), std::int64_t{0});
  }
  double covariate(std::size_t i) const { return covariates_.at(i); }
  std::span<const double> covariates() const noexcept { return covariates_; }
  std::span<const std::int64_t> counts() const noexcept { return counts_; }

  /// Scalar responses as reals (the forward check treats Y like covariates).
  std::vector<double> responses_as_real() const {
    if (dim_ != 1) throw DimensionError("responses_as_real needs scalar responses");
    return {counts_.begin(), counts_.end()};
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<std::int64_t> counts_;
  std::size_t dim_ = 1;
  std::vector<double> covariates_;
};

/// CSV with header `case,y[,y2,...],x`. Reals are written with 17
/// significant digits, which round-trips every double.
inline void write_csv(const Dataset& data, std::ostream& out) {
  out << "case,y";
  for (std::size_t k = 2; k <= data.response_dim(); ++k) out << ",y" << k;
  out << ",x\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << i;
    for (auto c : data.response(i)) out << ',' << c;
    out << ',' << data.covariate(i) << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    fields.push_back(field);
  }
  return fields;
}

}  // namespace detail

inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset CSV is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header.front() != "case" || header[1] != "y" || header.back() != "x")
    throw ConfigError("dataset CSV header must be case,y[,y2,...],x");
  const std::size_t dim = header.size() - 2;
  std::vector<std::int64_t> counts;
  std::vector<double> xs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw ConfigError("dataset CSV row " + std::to_string(row) + " has the wrong field count");
    try {
      for (std::size_t k = 1; k <= dim; ++k) {
        std::size_t used = 0;
        counts.push_back(std::stoll(f[k], &used));
        if (used != f[k].size()) throw ConfigError("non-integer count");
      }
      xs.push_back(std::stod(f.back()));
    } catch (const std::logic_error&) {
      throw ConfigError("dataset CSV row " + std::to_string(row) + " does not parse");
    }
  }
  return Dataset(std::move(counts), dim, std::move(xs));
}

}  // namespace ird
