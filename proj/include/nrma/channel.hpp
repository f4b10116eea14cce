#pragma once

// Uplink channel realisations and receiver noise. All schemes evaluated for
// the same (seed, drop) read the same tensor and noise stream.

#include <cmath>
#include <vector>

#include "nrma/core.hpp"
#include "nrma/rng.hpp"

namespace nrma {

/// Complex samples over `units` spreading units of `elements` resource elements each.
/// Linear RE index = unit * elements + element.
class ResourceGrid {
 public:
  ResourceGrid() = default;
  ResourceGrid(int units, int elements) : units_(units), elements_(elements), data_(static_cast<std::size_t>(units) * elements) {}

  int units() const { return units_; }
  int elements() const { return elements_; }
  std::size_t size() const { return data_.size(); }

  cplx& at(int unit, int element) { return data_[static_cast<std::size_t>(unit) * elements_ + element]; }
  cplx at(int unit, int element) const { return data_[static_cast<std::size_t>(unit) * elements_ + element]; }
  cplx& operator[](std::size_t i) { return data_[i]; }
  cplx operator[](std::size_t i) const { return data_[i]; }
  std::vector<cplx>& samples() { return data_; }
  const std::vector<cplx>& samples() const { return data_; }

 private:
  int units_ = 0;
  int elements_ = 0;
  std::vector<cplx> data_;
};

/// Gains h(unit, element, user), constant over one spreading unit's RE for a user.
class ChannelTensor {
 public:
  ChannelTensor() = default;
  ChannelTensor(int units, int elements, int users, cplx fill = {1.0, 0.0})
      : units_(units), elements_(elements), users_(users),
        data_(static_cast<std::size_t>(units) * elements * users, fill) {}

  int units() const { return units_; }
  int elements() const { return elements_; }
  int users() const { return users_; }

  cplx& operator()(int unit, int element, int user) { return data_[index(unit, element, user)]; }
  cplx operator()(int unit, int element, int user) const { return data_[index(unit, element, user)]; }

  /// Multiplies every gain of `user` by `scale` (per-user received amplitude).
  void scale_user(int user, double scale) {
    for (int t = 0; t < units_; ++t)
      for (int n = 0; n < elements_; ++n) data_[index(t, n, user)] *= scale;
  }

 private:
  std::size_t index(int t, int n, int k) const {
    return (static_cast<std::size_t>(t) * elements_ + n) * users_ + k;
  }
  int units_ = 0, elements_ = 0, users_ = 0;
  std::vector<cplx> data_;
};

/// AWGN: all gains 1. RAYLEIGH_BLOCK: i.i.d. CN(0,1) per user and RE, redrawn
/// every spreading unit.
inline ChannelTensor draw_channel(ChannelModel model, int users, int elements, int units, RngStream& stream) {
  ChannelTensor h(units, elements, users);
  if (model == ChannelModel::AWGN) return h;
  for (int t = 0; t < units; ++t)
    for (int n = 0; n < elements; ++n)
      for (int k = 0; k < users; ++k) h(t, n, k) = stream.complex_gaussian(1.0);
  return h;
}

/// Adds CN(0, sigma^2) noise with sigma^2 = 10^(-snr/10); returns sigma^2.
inline double add_noise(ResourceGrid& grid, double snr_db, RngStream& stream) {
  const double var = noise_variance(snr_db);
  for (auto& y : grid.samples()) y += stream.complex_gaussian(var);
  return var;
}

}  // namespace nrma
