#pragma once

#include <span>
#include <string>
#include <vector>

#include "loadalloc/model.hpp"

namespace loadalloc {

/// Overhead conductor 149-AL1/24-ST1A, per-km values.
struct LineParams {
  double r_ohm_per_km = 0.194;
  double x_ohm_per_km = 0.41;
  double c_nf_per_km = 8.75;
  double rating_ka = 0.47;
  double frequency_hz = 50.0;
};

struct NetworkConfig {
  LineParams line;
  double s_base_mva = 100.0;
  double v_base_kv = 110.0;
  double slack_vm_pu = 1.02;
  /// Lines shorter than this (e.g. slack sitting on a substation) are stretched to it.
  double min_line_km = 0.01;
};

struct MstEdge {
  std::size_t i = 0;  ///< i < j
  std::size_t j = 0;
  double length_km = 0.0;
};

/// Kruskal on the complete Euclidean graph; ties broken by (length, i, j).
std::vector<MstEdge> build_mst(std::span<const Point> points);

struct Bus {
  Id substation_id = -1;  ///< -1 for the slack bus
  Point coords;
};

struct Line {
  std::size_t from = 0;
  std::size_t to = 0;
  double length_km = 0.0;
};

/// Buses 0..n-1 are the substations in input order; bus n is the slack.
/// Lines: the n-1 tree edges first, then the slack tie.
struct NetworkModel {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::size_t slack = 0;
  NetworkConfig config;
};

NetworkModel build_network(std::span<const Substation> substations, const NetworkConfig& config = {});

struct BusLoad {
  double p_mw = 0.0;
  double q_mvar = 0.0;
};

/// Converts apparent-power demands (MVA) to lagging PQ loads.
std::vector<BusLoad> loads_from_demand(std::span<const double> demand_mva, double power_factor = 0.95);

struct SolverOptions {
  double tolerance_pu = 1e-8;
  int max_iterations = 50;
};

struct PowerFlowSolution {
  std::vector<double> vm_pu;
  std::vector<double> va_rad;
  std::vector<double> current_ka;   ///< per line, larger of the two ends
  std::vector<double> loading_pct;  ///< per line, of the thermal rating
  bool converged = false;
  int iterations = 0;
  double max_mismatch_pu = 0.0;
};

/// Polar Newton-Raphson from a flat start. `loads` is indexed like the substations.
PowerFlowSolution solve_ac(const NetworkModel& network, std::span<const BusLoad> loads, const SolverOptions& options = {});

/// Largest |P|,|Q| mismatch (p.u.) of a voltage profile against the specified loads.
double power_mismatch(const NetworkModel& network, std::span<const BusLoad> loads, std::span<const double> vm,
                      std::span<const double> va);

struct LoadingDeviation {
  double mae_pp = 0.0;       ///< mean |loading - reference| in percentage points
  double max_loading_pct = 0.0;
};

LoadingDeviation loading_deviation(const PowerFlowSolution& solution, const PowerFlowSolution& reference);

std::string network_json(const NetworkModel& network);
std::string line_loading_csv(const NetworkModel& network, const PowerFlowSolution& solution);

}  // namespace loadalloc
