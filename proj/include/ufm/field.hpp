/*
   Copyright 2026 The ufmkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "ufm/grid.hpp"

namespace ufm {

using Slice = std::vector<double>;

/// Mass density f(t, x, xi) at every time node of a grid.
class DistributionField {
 public:
  DistributionField() = default;
  explicit DistributionField(std::shared_ptr<const PhaseSpaceGrid> grid, double fill = 0.0)
      : grid_(std::move(grid)),
        values_(static_cast<std::size_t>(grid_->nt()) * grid_->slice_size(), fill) {}

  const PhaseSpaceGrid& grid() const { return *grid_; }
  const std::shared_ptr<const PhaseSpaceGrid>& grid_ptr() const { return grid_; }
  int nt() const { return grid_->nt(); }

  std::span<double> slice(int k) {
    return {values_.data() + static_cast<std::size_t>(k) * grid_->slice_size(),
            grid_->slice_size()};
  }
  std::span<const double> slice(int k) const {
    return {values_.data() + static_cast<std::size_t>(k) * grid_->slice_size(),
            grid_->slice_size()};
  }
  std::span<double> row(int k, std::size_t j) {
    return slice(k).subspan(j * grid_->nx_total(), grid_->nx_total());
  }
  std::span<const double> row(int k, std::size_t j) const {
    return slice(k).subspan(j * grid_->nx_total(), grid_->nx_total());
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double l1_norm(int k) const { return grid_->l1_norm(slice(k)); }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Field with the same grid whose values are this - other.
  DistributionField minus(const DistributionField& other) const {
    DistributionField out(grid_);
    for (std::size_t n = 0; n < values_.size(); ++n)
      out.values_[n] = values_[n] - other.values_[n];
    return out;
  }

 private:
  std::shared_ptr<const PhaseSpaceGrid> grid_;
  std::vector<double> values_;
};

}  // namespace ufm
