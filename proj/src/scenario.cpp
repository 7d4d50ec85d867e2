#include "loadalloc/scenario.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "loadalloc/error.hpp"
#include "loadalloc/rng.hpp"
#include "text_format.hpp"

namespace loadalloc {

namespace {

struct Bump {
  Point center;
  double sigma = 1.0;
  double amplitude = 1.0;

  double at(Point p) const {
    const double dx = p.x_km - center.x_km;
    const double dy = p.y_km - center.y_km;
    return amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  }
};

std::vector<Bump> draw_bumps(Rng& rng, int count, double side, double lo, double hi, bool random_amplitude) {
  std::vector<Bump> bumps(static_cast<std::size_t>(count));
  for (auto& b : bumps) {
    b.center = {rng.uniform(lo * side, hi * side), rng.uniform(lo * side, hi * side)};
    b.sigma = rng.uniform(0.06, 0.16) * side;
    b.amplitude = random_amplitude ? rng.uniform(0.5, 1.0) : 1.0;
  }
  return bumps;
}

double field_at(const std::vector<Bump>& bumps, Point p, double offset) {
  double v = offset;
  for (const auto& b : bumps) v += b.at(p);
  return v;
}

// Field over the agents, scaled so that its maximum is one.
std::vector<double> normalized_field(const std::vector<Bump>& bumps, const std::vector<Point>& pts, double offset) {
  std::vector<double> v(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) v[i] = field_at(bumps, pts[i], offset);
  const double peak = *std::max_element(v.begin(), v.end());
  for (double& x : v) x /= peak;
  return v;
}

constexpr std::array<double, kLandUseClasses> kLanduseIntercept{0.0, -0.8, -1.2, 1.0, 0.3};
constexpr std::array<double, kLandUseClasses> kLanduseSlope{3.0, 3.0, 2.5, -2.0, -1.0};
constexpr double kMaxRadiance = 267.0;

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
}

void check_nonneg(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be >= 0");
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.n_regions < 1) throw ValidationError("n_regions must be >= 1");
  if (c.agents_per_region < 1) throw ValidationError("agents_per_region must be >= 1");
  if (c.substations_per_region < 1) throw ValidationError("substations_per_region must be >= 1");
  if (c.urbanization_clusters < 1) throw ValidationError("urbanization_clusters must be >= 1");
  check_unit(c.base_signal, "base_signal");
  check_unit(c.ntl_fidelity, "ntl_fidelity");
  check_unit(c.prox_fidelity, "prox_fidelity");
  check_nonneg(c.demand_noise, "demand_noise");
  check_nonneg(c.landuse_noise, "landuse_noise");
  check_nonneg(c.ntl_noise, "ntl_noise");
  check_nonneg(c.ntl_dark_threshold, "ntl_dark_threshold");
  check_nonneg(c.background, "background");
  if (!(c.demand_exponent > 0.0)) throw ValidationError("demand_exponent must be positive");
  if (!(c.ntl_exponent > 0.0)) throw ValidationError("ntl_exponent must be positive");
  if (!(c.substation_density > 0.0)) throw ValidationError("substation_density must be positive");
  if (!(c.load_density_min > 0.0) || !(c.load_density_max >= c.load_density_min))
    throw ValidationError("load density range must be positive and ordered");
}

GeneratedScenario generate(const SynthConfig& config) {
  validate(config);
  const auto n_agents = static_cast<std::size_t>(config.agents_per_region);
  const auto n_subs = static_cast<std::size_t>(config.substations_per_region);
  const int k = config.urbanization_clusters;

  std::vector<Region> regions;
  std::vector<Agent> agents;
  std::vector<Substation> subs;
  std::vector<double> truth;
  Id next_agent = 1, next_sub = 1;
  double x_offset = 0.0;

  for (int r = 0; r < config.n_regions; ++r) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    const Id region_id = r + 1;
    const double side =
        std::sqrt(static_cast<double>(n_subs) / config.substation_density) * rng.uniform(0.85, 1.15);

    std::vector<Point> pts(n_agents);
    for (auto& p : pts) p = {rng.uniform(0.0, side), rng.uniform(0.0, side)};

    const auto urban = draw_bumps(rng, k, side, 0.15, 0.85, true);
    const auto u = normalized_field(urban, pts, config.background);
    std::vector<double> demand(n_agents);
    for (std::size_t a = 0; a < n_agents; ++a)
      demand[a] = std::pow(u[a], config.demand_exponent) * std::exp(config.demand_noise * rng.normal());

    // Land use follows a blend of the demand field and an unrelated field.
    const auto decoy = normalized_field(draw_bumps(rng, k, side, 0.1, 0.9, false), pts, 0.0);
    std::vector<LandUseVector> landuse(n_agents);
    for (std::size_t a = 0; a < n_agents; ++a) {
      const double driver = config.base_signal * u[a] + (1.0 - config.base_signal) * decoy[a];
      LandUseVector z{};
      double peak = -1e300;
      for (std::size_t c = 0; c < kLandUseClasses; ++c) {
        z[c] = kLanduseIntercept[c] + kLanduseSlope[c] * driver + config.landuse_noise * rng.normal();
        peak = std::max(peak, z[c]);
      }
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - peak);
        sum += v;
      }
      for (double& v : z) v /= sum;
      landuse[a] = z;
    }

    const auto clutter = normalized_field(draw_bumps(rng, 2 * k, side, 0.0, 1.0, false), pts, 0.0);
    std::vector<double> ntl(n_agents);
    for (std::size_t a = 0; a < n_agents; ++a) {
      const double v = config.ntl_fidelity * u[a] + (1.0 - config.ntl_fidelity) * clutter[a];
      const double noise = std::exp(config.ntl_noise * rng.normal());
      ntl[a] = v < config.ntl_dark_threshold
                   ? 0.0
                   : std::min(kMaxRadiance, kMaxRadiance * std::pow(v, config.ntl_exponent) * noise);
    }

    // Sited substations are accepted in proportion to urbanization.
    double amp_max = 0.0;
    for (const auto& b : urban) amp_max = std::max(amp_max, b.amplitude);
    std::vector<Point> sites;
    while (sites.size() < n_subs) {
      const Point cand{rng.uniform(0.0, side), rng.uniform(0.0, side)};
      if (rng.uniform() < config.prox_fidelity) {
        const double level = field_at(urban, cand, 0.03);
        if (rng.uniform() > level / amp_max) continue;
      }
      const bool clash = std::any_of(sites.begin(), sites.end(), [&](Point p) { return distance_km(p, cand) < 1e-6; });
      if (!clash) sites.push_back(cand);
    }

    const double target_total = rng.uniform(config.load_density_min, config.load_density_max) * side * side;
    double raw_total = 0.0;
    for (double d : demand) raw_total += d;
    double total = 0.0;
    LandUseVector shares{};
    for (std::size_t a = 0; a < n_agents; ++a) {
      demand[a] = demand[a] / raw_total * target_total;
      total += demand[a];
      for (std::size_t c = 0; c < kLandUseClasses; ++c) shares[c] += demand[a] * landuse[a][c];
    }
    double share_sum = 0.0;
    for (double& s : shares) {
      s /= total;
      share_sum += s;
    }
    for (double& s : shares) s /= share_sum;

    regions.push_back({region_id, total, shares, side * side});
    for (std::size_t a = 0; a < n_agents; ++a) {
      agents.push_back({next_agent++, {pts[a].x_km + x_offset, pts[a].y_km}, landuse[a], ntl[a], region_id});
      truth.push_back(demand[a]);
    }
    for (const auto& s : sites) subs.push_back({next_sub++, {s.x_km + x_offset, s.y_km}, 0.0, region_id});
    x_offset += 2.0 * side;
  }

  Scenario draft(regions, agents, subs);
  const auto assignment = assign_voronoi(draft);
  const auto sub_truth = aggregate_to_substations(truth, assignment, draft);
  return {draft.with_substation_demands(sub_truth), std::move(truth)};
}

// ---------------------------------------------------------------- file I/O

std::string read_text_file(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw ValidationError("cannot open " + path.string());
    std::string out;
    char buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(got));
    const bool failed = got < 0 || (gzdirect(f) && !out.empty());
    gzclose(f);
    if (failed) throw ValidationError("corrupt gzip stream in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (path.extension() == ".gz") {
    // gzopen writes a header without name or mtime, so the bytes are reproducible.
    gzFile f = gzopen(path.string().c_str(), "wb9");
    if (!f) throw RuntimeError("cannot write " + path.string());
    const int wrote = text.empty() ? 0 : gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    if (!text.empty() && wrote <= 0) throw RuntimeError("cannot write " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeError("cannot write " + path.string());
}

namespace {

const std::array<const char*, kLandUseClasses> kClassSuffix{"res", "com", "ind", "agr", "oth"};

class CsvTable {
 public:
  CsvTable(std::string file, const std::string& text) : file_(std::move(file)) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (line.empty()) continue;
      auto cells = split(line);
      if (header_.empty()) {
        header_ = std::move(cells);
        continue;
      }
      if (cells.size() != header_.size())
        throw ValidationError(file_ + " row " + std::to_string(line_no) + ": expected " +
                              std::to_string(header_.size()) + " columns, found " + std::to_string(cells.size()));
      rows_.push_back(std::move(cells));
      lines_.push_back(line_no);
    }
    if (header_.empty()) throw ValidationError(file_ + ": missing header row");
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    throw ValidationError(file_ + ": missing column '" + name + "'");
  }

  std::size_t size() const { return rows_.size(); }

  double number(std::size_t row, std::size_t col) const {
    const std::string& cell = rows_[row][col];
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
      throw error(row, col, "'" + cell + "' is not a finite number");
    return v;
  }

  Id integer(std::size_t row, std::size_t col) const {
    const std::string& cell = rows_[row][col];
    Id v = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      throw error(row, col, "'" + cell + "' is not an integer id");
    return v;
  }

  double non_negative(std::size_t row, std::size_t col) const {
    const double v = number(row, col);
    if (v < 0.0) throw error(row, col, "value must be >= 0");
    return v;
  }

  ValidationError error(std::size_t row, std::size_t col, const std::string& what) const {
    return ValidationError(file_ + " row " + std::to_string(lines_[row]) + ", column " + header_[col] + ": " + what);
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      out.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  std::string file_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

std::filesystem::path locate(const std::filesystem::path& dir, const std::string& name) {
  const auto plain = dir / name;
  if (std::filesystem::exists(plain)) return plain;
  const auto gz = dir / (name + ".gz");
  if (std::filesystem::exists(gz)) return gz;
  throw ValidationError("missing " + plain.string());
}

CsvTable read_table(const std::filesystem::path& dir, const std::string& name) {
  const auto path = locate(dir, name);
  return CsvTable(path.filename().string(), read_text_file(path));
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& dir) {
  const CsvTable rt = read_table(dir, "regions.csv");
  std::vector<Region> regions;
  {
    const auto c_id = rt.column("id");
    const auto c_d = rt.column("demand_total");
    const auto c_area = rt.column("area");
    std::array<std::size_t, kLandUseClasses> c_share{};
    for (std::size_t k = 0; k < kLandUseClasses; ++k) c_share[k] = rt.column(std::string("share_") + kClassSuffix[k]);
    for (std::size_t i = 0; i < rt.size(); ++i) {
      Region r;
      r.id = rt.integer(i, c_id);
      r.demand_total = rt.non_negative(i, c_d);
      r.area_km2 = rt.non_negative(i, c_area);
      for (std::size_t k = 0; k < kLandUseClasses; ++k) r.consumption_shares[k] = rt.non_negative(i, c_share[k]);
      regions.push_back(r);
    }
  }

  const CsvTable at = read_table(dir, "agents.csv");
  std::vector<Agent> agents;
  {
    const auto c_id = at.column("id");
    const auto c_x = at.column("x_km");
    const auto c_y = at.column("y_km");
    const auto c_ntl = at.column("ntl");
    const auto c_region = at.column("region_id");
    std::array<std::size_t, kLandUseClasses> c_p{};
    for (std::size_t k = 0; k < kLandUseClasses; ++k) c_p[k] = at.column(std::string("p_") + kClassSuffix[k]);
    for (std::size_t i = 0; i < at.size(); ++i) {
      Agent a;
      a.id = at.integer(i, c_id);
      a.coords = {at.number(i, c_x), at.number(i, c_y)};
      for (std::size_t k = 0; k < kLandUseClasses; ++k) a.landuse[k] = at.non_negative(i, c_p[k]);
      a.ntl = at.non_negative(i, c_ntl);
      a.region_id = at.integer(i, c_region);
      agents.push_back(a);
    }
  }

  const CsvTable st = read_table(dir, "substations.csv");
  std::vector<Substation> subs;
  {
    const auto c_id = st.column("id");
    const auto c_x = st.column("x_km");
    const auto c_y = st.column("y_km");
    const auto c_d = st.column("demand_actual");
    const auto c_region = st.column("region_id");
    for (std::size_t i = 0; i < st.size(); ++i) {
      Substation s;
      s.id = st.integer(i, c_id);
      s.coords = {st.number(i, c_x), st.number(i, c_y)};
      s.demand_actual = st.non_negative(i, c_d);
      s.region_id = st.integer(i, c_region);
      subs.push_back(s);
    }
  }
  return Scenario(std::move(regions), std::move(agents), std::move(subs));
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& dir, bool gzip) {
  using detail::fmt_double;
  const std::string ext = gzip ? ".csv.gz" : ".csv";

  std::string regions = "id,demand_total";
  for (const char* s : kClassSuffix) regions += std::string(",share_") + s;
  regions += ",area\n";
  for (const auto& r : scenario.regions()) {
    regions += std::to_string(r.id) + "," + fmt_double(r.demand_total);
    for (double v : r.consumption_shares) regions += "," + fmt_double(v);
    regions += "," + fmt_double(r.area_km2) + "\n";
  }

  std::string agents = "id,x_km,y_km";
  for (const char* s : kClassSuffix) agents += std::string(",p_") + s;
  agents += ",ntl,region_id\n";
  for (const auto& a : scenario.agents()) {
    agents += std::to_string(a.id) + "," + fmt_double(a.coords.x_km) + "," + fmt_double(a.coords.y_km);
    for (double v : a.landuse) agents += "," + fmt_double(v);
    agents += "," + fmt_double(a.ntl) + "," + std::to_string(a.region_id) + "\n";
  }

  std::string subs = "id,x_km,y_km,demand_actual,region_id\n";
  for (const auto& s : scenario.substations()) {
    subs += std::to_string(s.id) + "," + fmt_double(s.coords.x_km) + "," + fmt_double(s.coords.y_km) + "," +
            fmt_double(s.demand_actual) + "," + std::to_string(s.region_id) + "\n";
  }

  write_text_file(dir / ("regions" + ext), regions);
  write_text_file(dir / ("agents" + ext), agents);
  write_text_file(dir / ("substations" + ext), subs);
}

}  // namespace loadalloc
