#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace loadalloc {

using Id = std::int64_t;

inline constexpr std::size_t kLandUseClasses = 5;

enum class LandUse : std::size_t { Residential = 0, Commercial, Industrial, Agricultural, Other };

/// Proportions over (residential, commercial, industrial, agricultural, other).
using LandUseVector = std::array<double, kLandUseClasses>;

struct Point {
  double x_km = 0.0;
  double y_km = 0.0;
};

double distance_km(Point a, Point b);

struct Agent {
  Id id = 0;
  Point coords;
  LandUseVector landuse{};
  double ntl = 0.0;  ///< nW/cm^2/sr
  Id region_id = 0;
};

struct Substation {
  Id id = 0;
  Point coords;
  double demand_actual = 0.0;  ///< metered peak demand, MVA
  Id region_id = 0;
};

struct Region {
  Id id = 0;
  double demand_total = 0.0;  ///< D_r, MVA
  LandUseVector consumption_shares{};
  double area_km2 = 0.0;
};

/// Dominant land-use class; ties resolve to the lowest class index.
LandUse dominant_class(const LandUseVector& landuse);

/// Dominant class is residential, commercial or industrial.
bool is_rci(const Agent& agent);

/// Immutable world. Construction validates every cross-reference and builds
/// the per-region index used by the allocation pipeline.
class Scenario {
 public:
  Scenario(std::vector<Region> regions, std::vector<Agent> agents, std::vector<Substation> substations);

  const std::vector<Region>& regions() const { return regions_; }
  const std::vector<Agent>& agents() const { return agents_; }
  const std::vector<Substation>& substations() const { return substations_; }

  std::size_t region_index(Id region_id) const;
  std::size_t agent_index(Id agent_id) const;
  std::size_t substation_index(Id substation_id) const;

  /// Agent indices of region `r` (position in regions()), ascending.
  std::span<const std::size_t> region_agents(std::size_t r) const { return region_agents_[r]; }
  std::span<const std::size_t> region_substations(std::size_t r) const { return region_substations_[r]; }
  /// Position in regions() of the region owning agent `a`.
  std::size_t agent_region(std::size_t a) const { return agent_region_[a]; }
  std::size_t substation_region(std::size_t j) const { return substation_region_[j]; }

  /// Substation demands replaced; used by tests and the power-flow tools.
  Scenario with_substation_demands(std::span<const double> demands) const;

 private:
  std::vector<Region> regions_;
  std::vector<Agent> agents_;
  std::vector<Substation> substations_;
  std::unordered_map<Id, std::size_t> region_lookup_;
  std::unordered_map<Id, std::size_t> agent_lookup_;
  std::unordered_map<Id, std::size_t> substation_lookup_;
  std::vector<std::vector<std::size_t>> region_agents_;
  std::vector<std::vector<std::size_t>> region_substations_;
  std::vector<std::size_t> agent_region_;
  std::vector<std::size_t> substation_region_;
};

/// Agent index -> substation index, nearest same-region substation.
struct VoronoiAssignment {
  std::vector<std::size_t> agent_to_substation;

  friend bool operator==(const VoronoiAssignment&, const VoronoiAssignment&) = default;
};

/// Nearest substation within the agent's region; distance ties go to the
/// lowest substation id.
VoronoiAssignment assign_voronoi(const Scenario& scenario);

/// Sums agent demands per Voronoi cell. Empty cells receive 0.
std::vector<double> aggregate_to_substations(std::span<const double> agent_demands,
                                             const VoronoiAssignment& assignment, const Scenario& scenario);

}  // namespace loadalloc
