#include "loadalloc/powerflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "loadalloc/error.hpp"
#include "text_format.hpp"

namespace loadalloc {

namespace {

using cd = std::complex<double>;

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

struct BranchAdmittance {
  cd series;
  double half_shunt_b = 0.0;
};

BranchAdmittance branch_admittance(const Line& line, const NetworkConfig& cfg) {
  const double z_base = cfg.v_base_kv * cfg.v_base_kv / cfg.s_base_mva;
  const double len = std::max(line.length_km, cfg.min_line_km);
  const cd z(cfg.line.r_ohm_per_km * len / z_base, cfg.line.x_ohm_per_km * len / z_base);
  const double b_total = 2.0 * std::numbers::pi * cfg.line.frequency_hz * cfg.line.c_nf_per_km * 1e-9 * len * z_base;
  return {1.0 / z, 0.5 * b_total};
}

Eigen::MatrixXcd admittance_matrix(const NetworkModel& net) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& line : net.lines) {
    const auto br = branch_admittance(line, net.config);
    const auto f = static_cast<Eigen::Index>(line.from);
    const auto t = static_cast<Eigen::Index>(line.to);
    y(f, f) += br.series + cd(0.0, br.half_shunt_b);
    y(t, t) += br.series + cd(0.0, br.half_shunt_b);
    y(f, t) -= br.series;
    y(t, f) -= br.series;
  }
  return y;
}

void check_loads(const NetworkModel& net, std::span<const BusLoad> loads) {
  if (loads.size() + 1 != net.buses.size()) throw ValidationError("load vector does not match the network buses");
  for (const auto& l : loads) {
    if (!std::isfinite(l.p_mw) || !std::isfinite(l.q_mvar)) throw ValidationError("loads must be finite");
  }
}

// Specified net injections in p.u. (loads are consumption, so negative).
void specified_injections(const NetworkModel& net, std::span<const BusLoad> loads, Eigen::VectorXd& p,
                          Eigen::VectorXd& q) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  p = Eigen::VectorXd::Zero(n);
  q = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < loads.size(); ++i) {
    p(static_cast<Eigen::Index>(i)) = -loads[i].p_mw / net.config.s_base_mva;
    q(static_cast<Eigen::Index>(i)) = -loads[i].q_mvar / net.config.s_base_mva;
  }
}

void calculated_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                           Eigen::VectorXd& p, Eigen::VectorXd& q) {
  const auto n = vm.size();
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
  const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate());
  p = s.real();
  q = s.imag();
}

}  // namespace

std::vector<MstEdge> build_mst(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) throw ValidationError("a spanning tree needs at least two points");
  std::vector<MstEdge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance_km(points[i], points[j]);
      if (d == 0.0)
        throw ValidationError("duplicate points " + std::to_string(i) + " and " + std::to_string(j));
      edges.push_back({i, j, d});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const MstEdge& a, const MstEdge& b) {
    if (a.length_km != b.length_km) return a.length_km < b.length_km;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  UnionFind uf(n);
  std::vector<MstEdge> tree;
  for (const auto& e : edges) {
    if (uf.unite(e.i, e.j)) {
      tree.push_back(e);
      if (tree.size() == n - 1) break;
    }
  }
  return tree;
}

NetworkModel build_network(std::span<const Substation> substations, const NetworkConfig& config) {
  if (substations.empty()) throw ValidationError("network needs at least one substation");
  if (!(config.s_base_mva > 0.0) || !(config.v_base_kv > 0.0) || !(config.slack_vm_pu > 0.0))
    throw ValidationError("network bases must be positive");
  if (!(config.line.rating_ka > 0.0) || config.line.r_ohm_per_km < 0.0 || config.line.x_ohm_per_km < 0.0 ||
      config.line.c_nf_per_km < 0.0 || !(config.min_line_km > 0.0))
    throw ValidationError("invalid line parameters");
  if (config.line.r_ohm_per_km == 0.0 && config.line.x_ohm_per_km == 0.0)
    throw ValidationError("line impedance must be non-zero");

  NetworkModel net;
  net.config = config;
  std::vector<Point> pts;
  Point centroid{0.0, 0.0};
  for (const auto& s : substations) {
    net.buses.push_back({s.id, s.coords});
    pts.push_back(s.coords);
    centroid.x_km += s.coords.x_km;
    centroid.y_km += s.coords.y_km;
  }
  const auto n = static_cast<double>(substations.size());
  centroid.x_km /= n;
  centroid.y_km /= n;

  if (substations.size() >= 2) {
    for (const auto& e : build_mst(pts)) net.lines.push_back({e.i, e.j, std::max(e.length_km, config.min_line_km)});
  }

  std::size_t nearest = 0;
  double best = distance_km(centroid, pts[0]);
  for (std::size_t j = 1; j < pts.size(); ++j) {
    const double d = distance_km(centroid, pts[j]);
    if (d < best || (d == best && substations[j].id < substations[nearest].id)) {
      nearest = j;
      best = d;
    }
  }
  net.slack = net.buses.size();
  net.buses.push_back({-1, centroid});
  net.lines.push_back({net.slack, nearest, std::max(best, config.min_line_km)});
  return net;
}

std::vector<BusLoad> loads_from_demand(std::span<const double> demand_mva, double power_factor) {
  if (!(power_factor > 0.0 && power_factor <= 1.0)) throw ValidationError("power factor must lie in (0, 1]");
  const double q_ratio = std::sqrt(1.0 - power_factor * power_factor);
  std::vector<BusLoad> out;
  out.reserve(demand_mva.size());
  for (double s : demand_mva) out.push_back({s * power_factor, s * q_ratio});
  return out;
}

double power_mismatch(const NetworkModel& network, std::span<const BusLoad> loads, std::span<const double> vm,
                      std::span<const double> va) {
  check_loads(network, loads);
  const auto n = static_cast<Eigen::Index>(network.buses.size());
  if (vm.size() != network.buses.size() || va.size() != network.buses.size())
    throw ValidationError("voltage vectors do not match the network");
  Eigen::VectorXd p_spec, q_spec, p, q;
  specified_injections(network, loads, p_spec, q_spec);
  calculated_injections(admittance_matrix(network), Eigen::Map<const Eigen::VectorXd>(vm.data(), n),
                        Eigen::Map<const Eigen::VectorXd>(va.data(), n), p, q);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<std::size_t>(i) == network.slack) continue;
    worst = std::max({worst, std::abs(p_spec(i) - p(i)), std::abs(q_spec(i) - q(i))});
  }
  return worst;
}

PowerFlowSolution solve_ac(const NetworkModel& network, std::span<const BusLoad> loads, const SolverOptions& options) {
  check_loads(network, loads);
  const auto n = static_cast<Eigen::Index>(network.buses.size());
  const auto slack = static_cast<Eigen::Index>(network.slack);
  const Eigen::MatrixXcd y = admittance_matrix(network);
  const Eigen::MatrixXd g = y.real();
  const Eigen::MatrixXd b = y.imag();

  Eigen::VectorXd p_spec, q_spec;
  specified_injections(network, loads, p_spec, q_spec);
  Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
  vm(slack) = network.config.slack_vm_pu;

  // Unknown k <-> bus: every bus except the slack, once for angle, once for magnitude.
  std::vector<Eigen::Index> pq;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != slack) pq.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(pq.size());

  PowerFlowSolution sol;
  Eigen::VectorXd p, q, mismatch(2 * m);
  Eigen::MatrixXd jac(2 * m, 2 * m);
  for (int iter = 0;; ++iter) {
    calculated_injections(y, vm, va, p, q);
    for (Eigen::Index k = 0; k < m; ++k) {
      mismatch(k) = p_spec(pq[k]) - p(pq[k]);
      mismatch(m + k) = q_spec(pq[k]) - q(pq[k]);
    }
    sol.max_mismatch_pu = m > 0 ? mismatch.cwiseAbs().maxCoeff() : 0.0;
    sol.iterations = iter;
    if (!std::isfinite(sol.max_mismatch_pu)) break;
    if (sol.max_mismatch_pu <= options.tolerance_pu) {
      sol.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;

    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index i = pq[r];
      for (Eigen::Index c = 0; c < m; ++c) {
        const Eigen::Index k = pq[c];
        if (i == k) {
          jac(r, c) = -q(i) - b(i, i) * vm(i) * vm(i);                 // dP/dtheta
          jac(r, m + c) = p(i) / vm(i) + g(i, i) * vm(i);              // dP/dV
          jac(m + r, c) = p(i) - g(i, i) * vm(i) * vm(i);              // dQ/dtheta
          jac(m + r, m + c) = q(i) / vm(i) - b(i, i) * vm(i);          // dQ/dV
        } else {
          const double th = va(i) - va(k);
          const double gs = g(i, k) * std::sin(th), gc = g(i, k) * std::cos(th);
          const double bs = b(i, k) * std::sin(th), bc = b(i, k) * std::cos(th);
          jac(r, c) = vm(i) * vm(k) * (gs - bc);
          jac(r, m + c) = vm(i) * (gc + bs);
          jac(m + r, c) = -vm(i) * vm(k) * (gc + bs);
          jac(m + r, m + c) = vm(i) * (gs - bc);
        }
      }
    }
    const Eigen::VectorXd dx = jac.partialPivLu().solve(mismatch);
    if (!dx.allFinite()) break;
    for (Eigen::Index k = 0; k < m; ++k) {
      va(pq[k]) += dx(k);
      vm(pq[k]) += dx(m + k);
    }
  }

  sol.vm_pu.assign(vm.data(), vm.data() + n);
  sol.va_rad.assign(va.data(), va.data() + n);
  const double i_base_ka = network.config.s_base_mva / (std::sqrt(3.0) * network.config.v_base_kv);
  for (const Line& line : network.lines) {
    const auto br = branch_admittance(line, network.config);
    const cd vf = std::polar(sol.vm_pu[line.from], sol.va_rad[line.from]);
    const cd vt = std::polar(sol.vm_pu[line.to], sol.va_rad[line.to]);
    const cd i_from = (vf - vt) * br.series + vf * cd(0.0, br.half_shunt_b);
    const cd i_to = (vt - vf) * br.series + vt * cd(0.0, br.half_shunt_b);
    const double ka = std::max(std::abs(i_from), std::abs(i_to)) * i_base_ka;
    sol.current_ka.push_back(ka);
    sol.loading_pct.push_back(100.0 * ka / network.config.line.rating_ka);
  }
  return sol;
}

LoadingDeviation loading_deviation(const PowerFlowSolution& solution, const PowerFlowSolution& reference) {
  if (solution.loading_pct.size() != reference.loading_pct.size() || solution.loading_pct.empty())
    throw ValidationError("solutions belong to different networks");
  LoadingDeviation d;
  for (std::size_t l = 0; l < solution.loading_pct.size(); ++l) {
    d.mae_pp += std::abs(solution.loading_pct[l] - reference.loading_pct[l]);
    d.max_loading_pct = std::max(d.max_loading_pct, solution.loading_pct[l]);
  }
  d.mae_pp /= static_cast<double>(solution.loading_pct.size());
  return d;
}

std::string network_json(const NetworkModel& network) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  const auto& c = network.config;
  j["params"] = {{"r_ohm_per_km", c.line.r_ohm_per_km}, {"x_ohm_per_km", c.line.x_ohm_per_km},
                 {"c_nf_per_km", c.line.c_nf_per_km},   {"rating_ka", c.line.rating_ka},
                 {"frequency_hz", c.line.frequency_hz}, {"s_base_mva", c.s_base_mva},
                 {"v_base_kv", c.v_base_kv},            {"slack_vm_pu", c.slack_vm_pu},
                 {"min_line_km", c.min_line_km}};
  nlohmann::ordered_json buses = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < network.buses.size(); ++i) {
    const auto& bus = network.buses[i];
    buses.push_back({{"index", i},
                     {"substation_id", bus.substation_id},
                     {"slack", i == network.slack},
                     {"x_km", bus.coords.x_km},
                     {"y_km", bus.coords.y_km}});
  }
  j["buses"] = std::move(buses);
  nlohmann::ordered_json lines = nlohmann::ordered_json::array();
  for (const auto& l : network.lines) lines.push_back({{"from", l.from}, {"to", l.to}, {"length_km", l.length_km}});
  j["lines"] = std::move(lines);
  return j.dump(2) + "\n";
}

std::string line_loading_csv(const NetworkModel& network, const PowerFlowSolution& solution) {
  if (solution.loading_pct.size() != network.lines.size()) throw ValidationError("solution does not match network");
  std::string out = "line,from_bus,to_bus,length_km,current_ka,loading_pct\n";
  for (std::size_t l = 0; l < network.lines.size(); ++l) {
    const auto& line = network.lines[l];
    out += std::to_string(l) + "," + std::to_string(line.from) + "," + std::to_string(line.to) + "," +
           detail::fmt_double(line.length_km) + "," + detail::fmt_double(solution.current_ka[l]) + "," +
           detail::fmt_double(solution.loading_pct[l]) + "\n";
  }
  return out;
}

}  // namespace loadalloc
