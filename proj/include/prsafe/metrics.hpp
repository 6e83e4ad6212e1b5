#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "prsafe/loop.hpp"

namespace prsafe {

/// Half-open tick range [begin, end) of one avoidance activation.
struct Episode {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const Episode&, const Episode&) = default;
};

using EpisodeSet = std::vector<Episode>;

/// Episodes bracketed by avoidance-enter / avoidance-exit events. An episode
/// still open at the end of the log is closed there.
inline EpisodeSet segment_episodes(std::span<const LogRecord> log) {
  EpisodeSet out;
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::size_t open = none;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if ((log[i].events & event::avoidance_exit) && open != none) {
      out.push_back({open, i});
      open = none;
    }
    if ((log[i].events & event::avoidance_enter) && open == none) open = i;
  }
  if (open != none) out.push_back({open, log.size()});
  return out;
}

// The three metrics below take per-sample actuator vectors so they work for
// any number of actuators; the log-based overloads pick the vectors.

template <int N>
using Samples = std::span<const Eigen::Matrix<double, N, 1>>;

/// Mean over actuators of the flat mean, across all episode samples, of
/// |a - b|. nullopt when there are no episode samples.
template <int N>
std::optional<double> mean_absolute_error(Samples<N> a, Samples<N> b, const EpisodeSet& episodes) {
  Eigen::Matrix<double, N, 1> sum = Eigen::Matrix<double, N, 1>::Zero();
  std::size_t count = 0;
  for (const auto& ep : episodes) {
    for (std::size_t j = ep.begin; j < ep.end; ++j) {
      sum += (a[j] - b[j]).cwiseAbs();
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum.mean() / static_cast<double>(count);
}

/// As mean_absolute_error with each sample divided by |a|, in percent.
/// Samples with |a| < 1e-9 are skipped per actuator; `skipped` counts them.
template <int N>
std::optional<double> mean_absolute_percentage_error(Samples<N> a, Samples<N> b, const EpisodeSet& episodes,
                                                     std::size_t* skipped = nullptr) {
  Eigen::Matrix<double, N, 1> sum = Eigen::Matrix<double, N, 1>::Zero();
  Eigen::Matrix<double, N, 1> count = Eigen::Matrix<double, N, 1>::Zero();
  std::size_t dropped = 0;
  for (const auto& ep : episodes) {
    for (std::size_t j = ep.begin; j < ep.end; ++j) {
      for (Eigen::Index i = 0; i < N; ++i) {
        if (std::abs(a[j][i]) < 1e-9) {
          ++dropped;
          continue;
        }
        sum[i] += std::abs((a[j][i] - b[j][i]) / a[j][i]);
        count[i] += 1.0;
      }
    }
  }
  if (skipped) *skipped = dropped;
  if ((count.array() == 0.0).any()) return std::nullopt;
  return 100.0 * sum.cwiseQuotient(count).mean();
}

/// Mean over actuators of the mean |u(j) - u(j-1)| over consecutive samples
/// inside each episode. nullopt when no episode has two samples.
template <int N>
std::optional<double> absolute_variation_rate(Samples<N> u, const EpisodeSet& episodes) {
  Eigen::Matrix<double, N, 1> sum = Eigen::Matrix<double, N, 1>::Zero();
  std::size_t count = 0;
  for (const auto& ep : episodes) {
    for (std::size_t j = ep.begin + 1; j < ep.end; ++j) {
      sum += (u[j] - u[j - 1]).cwiseAbs();
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum.mean() / static_cast<double>(count);
}

struct MetricsReport {
  std::size_t episodes = 0;
  std::size_t episode_samples = 0;
  std::optional<double> mae_mm;
  std::optional<double> mape_percent;
  std::optional<double> avr;
  std::size_t mape_skipped = 0;
  DeviationVariant variant = DeviationVariant::commanded;
  std::size_t breaches = 0;
  bool faulted = false;
};

inline MetricsReport compute_metrics(std::span<const LogRecord> log, DeviationVariant variant) {
  MetricsReport m;
  m.variant = variant;
  const EpisodeSet episodes = segment_episodes(log);
  m.episodes = episodes.size();
  for (const auto& e : episodes) m.episode_samples += e.size();
  std::vector<Vec4> qa, qb, u;
  qa.reserve(log.size());
  qb.reserve(log.size());
  u.reserve(log.size());
  for (const auto& r : log) {
    qa.push_back(r.ik_reference.q);
    qb.push_back(variant == DeviationVariant::commanded ? r.command.q : r.measured_joints.q);
    u.push_back(r.control);
    if (r.events & event::breach) ++m.breaches;
    if (r.events & event::fault) m.faulted = true;
  }
  if (const auto mae = mean_absolute_error<4>(qa, qb, episodes)) m.mae_mm = 1000.0 * *mae;
  m.mape_percent = mean_absolute_percentage_error<4>(qa, qb, episodes, &m.mape_skipped);
  m.avr = absolute_variation_rate<4>(u, episodes);
  return m;
}

}  // namespace prsafe
