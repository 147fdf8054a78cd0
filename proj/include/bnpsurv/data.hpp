#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnpsurv {

// One time-to-event record. event=false means right-censored: the event is
// only known to occur after `time`.
struct Observation {
  double time = 0.0;
  bool event = true;
  int group = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Grouped survival data. Groups are dense indices 0..group_count-1, every
// group nonempty. Immutable after validation.
struct Dataset {
  std::vector<Observation> observations;
  int group_count = 0;
  std::vector<int> group_sizes;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Build a Dataset from raw observations, deriving group_count and sizes.
inline Dataset dataset_from(std::vector<Observation> obs) {
  Dataset d;
  d.observations = std::move(obs);
  int max_group = -1;
  for (const Observation& o : d.observations) max_group = std::max(max_group, o.group);
  d.group_count = max_group + 1;
  d.group_sizes.assign(static_cast<std::size_t>(std::max(0, d.group_count)), 0);
  for (const Observation& o : d.observations)
    if (o.group >= 0) ++d.group_sizes[static_cast<std::size_t>(o.group)];
  return d;
}

inline Dataset validate(Dataset d) {
  if (d.observations.empty()) throw std::invalid_argument("empty dataset");
  for (std::size_t i = 0; i < d.observations.size(); ++i) {
    const Observation& o = d.observations[i];
    if (!(o.time > 0.0) || !std::isfinite(o.time))
      throw std::invalid_argument("nonpositive time at observation " + std::to_string(i));
    if (o.group < 0 || o.group >= d.group_count)
      throw std::invalid_argument("unknown group index at observation " + std::to_string(i));
  }
  if (static_cast<int>(d.group_sizes.size()) != d.group_count)
    throw std::invalid_argument("group_sizes does not match group_count");
  std::vector<int> sizes(static_cast<std::size_t>(d.group_count), 0);
  for (const Observation& o : d.observations) ++sizes[static_cast<std::size_t>(o.group)];
  long total = 0;
  for (int j = 0; j < d.group_count; ++j) {
    if (sizes[static_cast<std::size_t>(j)] == 0)
      throw std::invalid_argument("empty group " + std::to_string(j));
    if (sizes[static_cast<std::size_t>(j)] != d.group_sizes[static_cast<std::size_t>(j)])
      throw std::invalid_argument("inconsistent size for group " + std::to_string(j));
    total += d.group_sizes[static_cast<std::size_t>(j)];
  }
  if (total != static_cast<long>(d.observations.size()))
    throw std::invalid_argument("group sizes do not sum to observation count");
  return d;
}

// Observation indices per group, in dataset order.
inline std::vector<std::vector<int>> indices_by_group(const Dataset& d) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(d.group_count));
  for (int j = 0; j < d.group_count; ++j)
    out[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(d.group_sizes[static_cast<std::size_t>(j)]));
  for (std::size_t i = 0; i < d.observations.size(); ++i)
    out[static_cast<std::size_t>(d.observations[i].group)].push_back(static_cast<int>(i));
  return out;
}

}  // namespace bnpsurv
