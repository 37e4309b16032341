#include "oedsteer/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "oedsteer/io.hpp"

namespace oedsteer {

namespace {

const std::set<std::string> kKnownKeys = {
    "experiment",       "seed",
    "grid.nx",          "grid.ny",          "grid.width",       "grid.height",
    "grid.x0",          "grid.y0",          "grid.obstacle",
    "wind.mode",        "wind.speed",       "wind.inflow",      "wind.ux",
    "wind.uy",          "wind.file",
    "transport.kappa",  "transport.dt",     "transport.T",
    "truth.blob",
    "obs.t0",           "obs.t_end",        "obs.rate_hz",      "obs.sigma",
    "sensors.nx",       "sensors.ny",       "sensors.margin",
    "prior.eta",        "prior.gamma",      "prior.beta",       "prior.mean_file",
    "rom.use",          "rom.rank",         "rom.oversample",   "rom.power_iters",
    "design.alpha",     "design.rank",      "design.threshold", "design.maxiter",
    "qoi.region",       "qoi.t_start",      "qoi.t_end",
    "steer.t0",         "steer.t_end",      "steer.dt_obs",     "steer.lookahead",
    "steer.qoi_side",   "steer.start",      "steer.alpha",      "steer.neighborhood",
    "steer.maxiter",    "steer.mobile_nx",  "steer.mobile_ny",  "steer.mobile_margin",
    "steer.stationary",
    "output.snapshot_stride",
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Errors {
  std::vector<std::string> messages;
  void add(const std::string& m) { messages.push_back(m); }
  void raise_if_any(const std::string& path) const {
    if (messages.empty()) return;
    std::string what = "scenario validation failed for " + path + ":";
    for (const auto& m : messages) what += "\n  - " + m;
    throw ContractError(what);
  }
};

class ValueParser {
 public:
  ValueParser(const std::vector<std::pair<std::string, std::string>>& entries, Errors& errors)
      : entries_(entries), errors_(&errors) {}

  bool has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == key; });
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      if (it->first == key) return it->second;
    return fallback;
  }
  double num(const std::string& key, double fallback) const {
    const std::string v = str(key, "");
    if (v.empty()) return fallback;
    std::istringstream in(v);
    double x;
    if (!(in >> x) || !consumed(in)) {
      errors_->add("key '" + key + "': expected a number, got '" + v + "'");
      return fallback;
    }
    return x;
  }
  long integer(const std::string& key, long fallback) const {
    const double x = num(key, static_cast<double>(fallback));
    const long n = std::lround(x);
    if (x != static_cast<double>(n)) errors_->add("key '" + key + "': expected an integer");
    return n;
  }
  bool flag(const std::string& key, bool fallback) const {
    const std::string v = str(key, "");
    if (v.empty()) return fallback;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    errors_->add("key '" + key + "': expected true/false, got '" + v + "'");
    return fallback;
  }
  std::vector<double> numbers(const std::string& value, const std::string& key, size_t lo,
                              size_t hi) const {
    std::istringstream in(value);
    std::vector<double> out;
    double x;
    while (in >> x) out.push_back(x);
    if (!consumed(in) || out.size() < lo || out.size() > hi) {
      errors_->add("key '" + key + "': expected " + std::to_string(lo) +
                   (hi != lo ? ".." + std::to_string(hi) : "") + " numbers, got '" + value + "'");
      out.assign(lo, 0.0);
    }
    return out;
  }
  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k == key) out.push_back(v);
    return out;
  }

 private:
  static bool consumed(std::istringstream& in) {
    std::string rest;
    in.clear();
    in >> rest;
    return rest.empty();
  }
  const std::vector<std::pair<std::string, std::string>>& entries_;
  Errors* errors_;
};

RegionRect parse_rect(const std::vector<double>& v) {
  return RegionRect{v[0], v[2], v[1], v[3]};  // xmin ymin xmax ymax
}

}  // namespace

std::vector<double> observation_times(double t0, double t_end, double rate_hz, double dt) {
  require(rate_hz > 0.0, "observation_times: rate must be positive");
  const double period = 1.0 / rate_hz;
  std::vector<double> times;
  for (int k = 0;; ++k) {
    const double t = t0 + k * period;
    if (t > t_end + 1e-9) break;
    times.push_back(std::llround(t / dt) * dt);
  }
  return times;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open scenario file: " + path.string());

  Scenario s;
  s.source_path = path;
  Errors errors;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.add("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kKnownKeys.count(key)) {
      errors.add("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      continue;
    }
    s.entries.emplace_back(key, value);
  }

  ValueParser p(s.entries, errors);

  s.experiment = p.str("experiment", "");
  if (s.experiment != "oed1" && s.experiment != "oed2" && s.experiment != "steer")
    errors.add("key 'experiment': must be one of oed1, oed2, steer");
  s.seed = static_cast<std::uint64_t>(p.integer("seed", 1));

  s.nx = static_cast<int>(p.integer("grid.nx", s.nx));
  s.ny = static_cast<int>(p.integer("grid.ny", s.ny));
  s.width = p.num("grid.width", s.width);
  s.height = p.num("grid.height", s.height);
  s.x0 = p.num("grid.x0", s.x0);
  s.y0 = p.num("grid.y0", s.y0);
  if (s.nx < 4 || s.ny < 4) errors.add("grid.nx/grid.ny: need at least 4 cells per side");
  if (s.width <= 0 || s.height <= 0) errors.add("grid.width/grid.height: must be positive");
  for (const auto& v : p.all("grid.obstacle")) {
    auto nums = p.numbers(v, "grid.obstacle", 4, 4);
    const RegionRect r = parse_rect(nums);
    if (!r.valid()) errors.add("grid.obstacle: degenerate rectangle '" + v + "'");
    else s.obstacles.push_back(r);
  }

  s.wind_mode = p.str("wind.mode", s.wind_mode);
  if (s.wind_mode != "potential" && s.wind_mode != "uniform" && s.wind_mode != "file")
    errors.add("wind.mode: must be potential, uniform, or file");
  s.wind_speed = p.num("wind.speed", s.wind_speed);
  s.wind_inflow = p.str("wind.inflow", s.wind_inflow);
  if (s.wind_inflow != "south" && s.wind_inflow != "north" && s.wind_inflow != "east" &&
      s.wind_inflow != "west")
    errors.add("wind.inflow: must be south, north, east, or west");
  s.wind_ux = p.num("wind.ux", s.wind_ux);
  s.wind_uy = p.num("wind.uy", s.wind_uy);
  s.wind_file = p.str("wind.file", "");
  if (s.wind_mode == "file" && s.wind_file.empty())
    errors.add("wind.file: required when wind.mode = file");
  if (s.wind_mode == "file" && !s.wind_file.empty() &&
      !std::filesystem::exists(std::filesystem::path(s.wind_file)))
    errors.add("wind.file: file does not exist: " + s.wind_file);
  if (s.wind_mode == "potential" && p.num("wind.speed", 10.0) <= 0)
    errors.add("wind.speed: must be positive");

  s.transport.kappa = p.num("transport.kappa", s.transport.kappa);
  s.transport.dt = p.num("transport.dt", s.transport.dt);
  s.transport.T = p.num("transport.T", s.transport.T);
  if (s.transport.kappa <= 0) errors.add("transport.kappa: must be positive");
  if (s.transport.dt <= 0 || s.transport.dt > s.transport.T)
    errors.add("transport.dt: need 0 < dt <= T");

  for (const auto& v : p.all("truth.blob")) {
    auto nums = p.numbers(v, "truth.blob", 3, 5);
    BlobSpec b;
    b.x = nums[0];
    b.y = nums[1];
    b.radius = nums[2];
    if (nums.size() > 3) b.cap = nums[3];
    if (nums.size() > 4) b.eps = nums[4];
    if (b.radius <= 0) errors.add("truth.blob: radius must be positive");
    s.blobs.push_back(b);
  }
  if (s.blobs.empty()) errors.add("truth.blob: at least one source blob is required");

  s.obs_t0 = p.num("obs.t0", s.obs_t0);
  s.obs_t_end = p.num("obs.t_end", s.obs_t_end);
  s.obs_rate_hz = p.num("obs.rate_hz", s.obs_rate_hz);
  s.sigma = p.num("obs.sigma", s.sigma);
  if (s.obs_t0 <= 0 || s.obs_t0 > s.obs_t_end) errors.add("obs.t0: need 0 < t0 <= t_end");
  if (s.obs_t_end > s.transport.T) errors.add("obs.t_end: beyond transport.T");
  if (s.obs_rate_hz <= 0) errors.add("obs.rate_hz: must be positive");
  if (s.sigma < 0) errors.add("obs.sigma: must be non-negative");

  s.sensors_nx = static_cast<int>(p.integer("sensors.nx", s.sensors_nx));
  s.sensors_ny = static_cast<int>(p.integer("sensors.ny", s.sensors_ny));
  s.sensors_margin = p.num("sensors.margin", s.sensors_margin);

  s.prior.eta = p.num("prior.eta", s.prior.eta);
  s.prior.gamma = p.num("prior.gamma", s.prior.gamma);
  s.prior.beta = p.num("prior.beta", -1.0);
  s.prior_mean_file = p.str("prior.mean_file", "");
  if (s.prior.eta <= 0) errors.add("prior.eta: must be positive");
  if (s.prior.gamma < 0) errors.add("prior.gamma: must be non-negative");
  if (!s.prior_mean_file.empty() &&
      !std::filesystem::exists(std::filesystem::path(s.prior_mean_file)))
    errors.add("prior.mean_file: file does not exist: " + s.prior_mean_file);

  s.rom_use = p.flag("rom.use", s.rom_use);
  s.rom_rank = p.integer("rom.rank", s.rom_rank);
  s.rom_oversample = p.integer("rom.oversample", s.rom_oversample);
  s.rom_power_iters = static_cast<int>(p.integer("rom.power_iters", s.rom_power_iters));
  if (s.rom_rank < 1) errors.add("rom.rank: must be at least 1");

  s.design_alpha = p.num("design.alpha", s.design_alpha);
  s.design_rank = p.integer("design.rank", s.design_rank);
  s.design_threshold = p.num("design.threshold", s.design_threshold);
  s.design_maxiter = static_cast<int>(p.integer("design.maxiter", s.design_maxiter));
  if (s.design_alpha < 0) errors.add("design.alpha: must be non-negative");
  if (s.design_threshold <= 0 || s.design_threshold >= 1)
    errors.add("design.threshold: must lie in (0,1)");

  if (p.has("qoi.region")) {
    auto nums = p.numbers(p.str("qoi.region", ""), "qoi.region", 4, 4);
    s.qoi_region = parse_rect(nums);
    if (!s.qoi_region.valid()) errors.add("qoi.region: degenerate rectangle");
  } else if (s.experiment == "oed1" || s.experiment == "oed2") {
    errors.add("qoi.region: required for oed experiments");
  }
  s.qoi_t_start = p.num("qoi.t_start", 0.0);
  s.qoi_t_end = p.num("qoi.t_end", 0.0);
  if (s.qoi_t_start < 0 || s.qoi_t_start > s.qoi_t_end || s.qoi_t_end > s.transport.T)
    errors.add("qoi.t_start/t_end: need 0 <= t_start <= t_end <= T");

  s.steer.t0 = p.num("steer.t0", s.steer.t0);
  s.steer.t_end = p.num("steer.t_end", s.steer.t_end);
  s.steer.dt_obs = p.num("steer.dt_obs", s.steer.dt_obs);
  s.steer.lookahead = p.num("steer.lookahead", s.steer.lookahead);
  s.steer.qoi_side = p.num("steer.qoi_side", s.steer.qoi_side);
  s.steer.alpha = p.num("steer.alpha", s.steer.alpha);
  s.steer.neighborhood = static_cast<int>(p.integer("steer.neighborhood", s.steer.neighborhood));
  s.steer.design_maxiter = static_cast<int>(p.integer("steer.maxiter", s.steer.design_maxiter));
  s.steer_mobile_nx = static_cast<int>(p.integer("steer.mobile_nx", s.steer_mobile_nx));
  s.steer_mobile_ny = static_cast<int>(p.integer("steer.mobile_ny", s.steer_mobile_ny));
  s.steer_mobile_margin = p.num("steer.mobile_margin", s.steer_mobile_margin);
  if (p.has("steer.start")) {
    auto nums = p.numbers(p.str("steer.start", ""), "steer.start", 2, 2);
    s.steer.start_x = nums[0];
    s.steer.start_y = nums[1];
  } else if (s.experiment == "steer") {
    errors.add("steer.start: required for the steer experiment");
  }
  for (const auto& v : p.all("steer.stationary")) {
    auto nums = p.numbers(v, "steer.stationary", 2, 2);
    s.steer_stationary.emplace_back(nums[0], nums[1]);
  }
  if (s.experiment == "steer") {
    if (s.steer_stationary.empty())
      errors.add("steer.stationary: at least one stationary sensor is required");
    if (s.steer.dt_obs <= 0) errors.add("steer.dt_obs: must be positive");
    if (s.steer.lookahead < s.steer.dt_obs)
      errors.add("steer.lookahead: must be at least steer.dt_obs");
    if (s.steer.qoi_side <= 0) errors.add("steer.qoi_side: must be positive");
    if (s.steer.neighborhood != 4 && s.steer.neighborhood != 8)
      errors.add("steer.neighborhood: must be 4 or 8");
    if (s.steer.t0 < s.obs_t0 - 1e-9) errors.add("steer.t0: before obs.t0");
  }
  s.steer.sigma = s.sigma;
  s.steer.seed = s.seed;

  s.snapshot_stride = static_cast<int>(p.integer("output.snapshot_stride", s.snapshot_stride));
  if (s.snapshot_stride < 0) errors.add("output.snapshot_stride: must be non-negative");

  errors.raise_if_any(path.string());
  return s;
}

namespace {

std::vector<double> lattice_coords(double lo, double hi, int count, double margin) {
  std::vector<double> v;
  for (int k = 0; k < count; ++k)
    v.push_back(lo + margin + (hi - lo - 2 * margin) * k / (count - 1));
  return v;
}

Side side_from(const std::string& name) {
  if (name == "south") return Side::South;
  if (name == "north") return Side::North;
  if (name == "east") return Side::East;
  return Side::West;
}

}  // namespace

ScenarioContext build_context(const Scenario& scenario, const ContextOptions& opts) {
  ScenarioContext ctx;
  ctx.scenario = scenario;
  Scenario& s = ctx.scenario;
  if (opts.seed_override) {
    s.seed = *opts.seed_override;
    s.steer.seed = *opts.seed_override;
  }

  ctx.grid = std::make_unique<Grid>(s.nx, s.ny, s.width, s.height, s.x0, s.y0,
                                    std::span<const RegionRect>(s.obstacles));
  const Grid& grid = *ctx.grid;

  if (s.wind_mode == "potential")
    ctx.wind = std::make_unique<WindField>(
        potential_flow_wind(grid, s.wind_speed, side_from(s.wind_inflow)));
  else if (s.wind_mode == "uniform")
    ctx.wind = std::make_unique<WindField>(WindField::uniform(grid, s.wind_ux, s.wind_uy));
  else
    ctx.wind = std::make_unique<WindField>(read_wind(s.wind_file, grid));

  ctx.transport = std::make_unique<TransportOperator>(grid, *ctx.wind, s.transport);

  Vector mean;
  if (!s.prior_mean_file.empty()) mean = read_field(s.prior_mean_file, grid).values;
  ctx.prior = std::make_unique<BiLaplacianPrior>(grid, s.prior, std::move(mean));

  Vector truth = Vector::Zero(grid.numActive());
  for (const auto& b : s.blobs)
    truth += gaussian_blob(grid, b.x, b.y, b.radius, b.cap, b.eps).values;
  ctx.truth = ScalarField(grid, std::move(truth));

  if (s.experiment == "steer") {
    ctx.mobile = make_mobile_grid(grid, s.steer_mobile_nx, s.steer_mobile_ny,
                                  s.steer_mobile_margin);
    std::vector<double> xs, ys;
    for (const auto& [x, y] : s.steer_stationary) {
      auto [i, j] = grid.cellAt(x, y);
      require(!grid.isSolid(i, j), "steer.stationary: sensor inside an obstacle");
      xs.push_back(x);
      ys.push_back(y);
    }
    ctx.num_stationary = static_cast<Index>(xs.size());
    for (Index nd = 0; nd < ctx.mobile.numNodes(); ++nd) {
      xs.push_back(ctx.mobile.xs[static_cast<size_t>(nd)]);
      ys.push_back(ctx.mobile.ys[static_cast<size_t>(nd)]);
    }
    const double t_hi = std::min(s.obs_t_end, s.steer.t_end + s.steer.lookahead);
    auto times = observation_times(s.steer.t0, t_hi, 1.0 / s.steer.dt_obs, s.transport.dt);
    ctx.candidates = std::make_unique<CandidateSet>(grid, s.transport, xs, ys, times,
                                                    DesignMode::StationaryGrid);
  } else {
    auto gx = lattice_coords(s.x0, s.x0 + s.width, s.sensors_nx, s.sensors_margin);
    auto gy = lattice_coords(s.y0, s.y0 + s.height, s.sensors_ny, s.sensors_margin);
    std::vector<double> xs, ys;
    for (double y : gy)
      for (double x : gx) {
        auto [i, j] = grid.cellAt(x, y);
        if (grid.isSolid(i, j)) continue;  // candidates inside obstacles are dropped
        xs.push_back(x);
        ys.push_back(y);
      }
    require(!xs.empty(), "sensors: every candidate position is inside an obstacle");
    auto times = observation_times(s.obs_t0, s.obs_t_end, s.obs_rate_hz, s.transport.dt);
    ctx.candidates = std::make_unique<CandidateSet>(grid, s.transport, xs, ys, times,
                                                    DesignMode::StationaryGrid);
  }

  ctx.forward = std::make_unique<ForwardMap>(*ctx.transport, *ctx.candidates);

  const bool want_rom = opts.force_rom || (s.rom_use && !opts.skip_rom);
  if (want_rom) {
    RomOptions ro;
    ro.oversample = s.rom_oversample;
    ro.power_iters = s.rom_power_iters;
    ro.seed = s.seed;
    const Index max_rank = std::min(ctx.forward->rows(), ctx.forward->cols());
    ctx.rom = std::make_unique<RomOperator>(
        build_rom(*ctx.forward, *ctx.prior, std::min(s.rom_rank, max_rank), true, ro));
  }
  return ctx;
}

}  // namespace oedsteer
