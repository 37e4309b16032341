#include "oedsteer/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace oedsteer {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

struct GridHeader {
  int nx, ny;
  double x0, y0, dx, dy;
};

GridHeader read_header(std::istream& in, const std::string& magic, double* t = nullptr) {
  std::string tag;
  GridHeader h{};
  in >> tag >> h.nx >> h.ny >> h.x0 >> h.y0 >> h.dx >> h.dy;
  if (t) in >> *t;
  if (!in || tag != magic) throw std::runtime_error("malformed " + magic + " file header");
  if (h.nx < 4 || h.ny < 4 || h.dx <= 0 || h.dy <= 0)
    throw std::runtime_error("malformed " + magic + " file header values");
  return h;
}

void check_grid(const GridHeader& h, const Grid& g, const std::string& what) {
  const bool ok = h.nx == g.nx() && h.ny == g.ny() && std::abs(h.x0 - g.x0()) < 1e-9 &&
                  std::abs(h.y0 - g.y0()) < 1e-9 && std::abs(h.dx - g.dx()) < 1e-9 &&
                  std::abs(h.dy - g.dy()) < 1e-9;
  if (!ok) throw std::runtime_error(what + ": file geometry does not match the grid");
}

}  // namespace

void write_field(const std::filesystem::path& path, const ScalarField& field) {
  const Grid& g = *field.grid;
  auto out = open_out(path);
  out << "FIELD " << g.nx() << ' ' << g.ny() << ' ' << fmt(g.x0()) << ' ' << fmt(g.y0()) << ' '
      << fmt(g.dx()) << ' ' << fmt(g.dy()) << ' ' << fmt(field.time) << '\n';
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (i) out << ' ';
      if (g.isSolid(i, j)) out << "nan";
      else out << fmt(field.values(g.activeIndex(i, j)));
    }
    out << '\n';
  }
}

ScalarField read_field(const std::filesystem::path& path, const Grid& grid) {
  auto in = open_in(path);
  double t = 0.0;
  const GridHeader h = read_header(in, "FIELD", &t);
  check_grid(h, grid, "read_field");
  Vector values = Vector::Zero(grid.numActive());
  std::string token;
  for (int j = 0; j < h.ny; ++j)
    for (int i = 0; i < h.nx; ++i) {
      if (!(in >> token)) throw std::runtime_error("read_field: truncated file");
      const double v = std::strtod(token.c_str(), nullptr);
      if (grid.isSolid(i, j)) {
        if (token != "nan" && !std::isnan(v))
          throw std::runtime_error("read_field: value on masked cell");
      } else {
        if (std::isnan(v)) throw std::runtime_error("read_field: nan on fluid cell");
        values(grid.activeIndex(i, j)) = v;
      }
    }
  return ScalarField(grid, std::move(values), t);
}

Grid read_field_grid(const std::filesystem::path& path) {
  auto in = open_in(path);
  double t = 0.0;
  const GridHeader h = read_header(in, "FIELD", &t);
  std::vector<std::uint8_t> mask(static_cast<size_t>(h.nx) * h.ny, 0);
  std::string token;
  for (int j = 0; j < h.ny; ++j)
    for (int i = 0; i < h.nx; ++i) {
      if (!(in >> token)) throw std::runtime_error("read_field_grid: truncated file");
      if (token == "nan" || std::isnan(std::strtod(token.c_str(), nullptr)))
        mask[static_cast<size_t>(j) * h.nx + i] = 1;
    }
  return Grid(h.nx, h.ny, h.nx * h.dx, h.ny * h.dy, h.x0, h.y0, std::move(mask));
}

void write_wind(const std::filesystem::path& path, const WindField& wind) {
  const Grid& g = wind.grid();
  auto out = open_out(path);
  out << "WIND " << g.nx() << ' ' << g.ny() << ' ' << fmt(g.x0()) << ' ' << fmt(g.y0()) << ' '
      << fmt(g.dx()) << ' ' << fmt(g.dy()) << '\n';
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i <= g.nx(); ++i) out << (i ? " " : "") << fmt(wind.u(i, j));
    out << '\n';
  }
  for (int j = 0; j <= g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) out << (i ? " " : "") << fmt(wind.v(i, j));
    out << '\n';
  }
}

WindField read_wind(const std::filesystem::path& path, const Grid& grid) {
  auto in = open_in(path);
  const GridHeader h = read_header(in, "WIND");
  check_grid(h, grid, "read_wind");
  Vector u(static_cast<Index>(grid.nx() + 1) * grid.ny());
  Vector v(static_cast<Index>(grid.nx()) * (grid.ny() + 1));
  for (Index k = 0; k < u.size(); ++k)
    if (!(in >> u(k))) throw std::runtime_error("read_wind: truncated u block");
  for (Index k = 0; k < v.size(); ++k)
    if (!(in >> v(k))) throw std::runtime_error("read_wind: truncated v block");
  return WindField(grid, std::move(u), std::move(v));
}

void write_lowrank(const std::filesystem::path& path, const LowRankPosterior& lr) {
  auto out = open_out(path);
  const Index r = lr.rank();
  const Index n = lr.eigenvectors().rows();
  out << "LRPOST " << r << ' ' << n << '\n';
  for (Index i = 0; i < r; ++i) out << (i ? " " : "") << fmt(lr.eigenvalues()(i));
  out << '\n';
  for (Index i = 0; i < r; ++i) {
    for (Index k = 0; k < n; ++k) out << (k ? " " : "") << fmt(lr.eigenvectors()(k, i));
    out << '\n';
  }
}

LowRankPosterior read_lowrank(const std::filesystem::path& path, const BiLaplacianPrior& prior) {
  auto in = open_in(path);
  std::string tag;
  Index r, n;
  in >> tag >> r >> n;
  if (!in || tag != "LRPOST") throw std::runtime_error("malformed LRPOST header");
  if (n != prior.grid().numActive())
    throw std::runtime_error("read_lowrank: dimension does not match the prior grid");
  Vector values(r);
  Matrix vectors(n, r);
  for (Index i = 0; i < r; ++i)
    if (!(in >> values(i))) throw std::runtime_error("read_lowrank: truncated eigenvalues");
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < n; ++k)
      if (!(in >> vectors(k, i))) throw std::runtime_error("read_lowrank: truncated vectors");
  return LowRankPosterior(prior, std::move(values), std::move(vectors));
}

void write_rom(const std::filesystem::path& path, const RomOperator& rom) {
  auto out = open_out(path);
  out << "ROM " << rom.rank() << ' ' << rom.numDof() << ' ' << rom.numMeasurements() << ' '
      << (rom.preconditioned ? 1 : 0) << '\n';
  for (Index i = 0; i < rom.rank(); ++i) out << (i ? " " : "") << fmt(rom.S(i));
  out << '\n';
  for (Index k = 0; k < rom.numDof(); ++k) {
    for (Index i = 0; i < rom.rank(); ++i) out << (i ? " " : "") << fmt(rom.U(k, i));
    out << '\n';
  }
  for (Index k = 0; k < rom.numMeasurements(); ++k) {
    for (Index i = 0; i < rom.rank(); ++i) out << (i ? " " : "") << fmt(rom.V(k, i));
    out << '\n';
  }
}

RomOperator read_rom(const std::filesystem::path& path, const Grid& grid) {
  auto in = open_in(path);
  std::string tag;
  Index r, n, q;
  int precond;
  in >> tag >> r >> n >> q >> precond;
  if (!in || tag != "ROM") throw std::runtime_error("malformed ROM header");
  if (n != grid.numActive()) throw std::runtime_error("read_rom: dimension mismatch with grid");
  RomOperator rom;
  rom.preconditioned = precond != 0;
  rom.mass = grid.massDiag();
  rom.S.resize(r);
  rom.U.resize(n, r);
  rom.V.resize(q, r);
  for (Index i = 0; i < r; ++i)
    if (!(in >> rom.S(i))) throw std::runtime_error("read_rom: truncated singular values");
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < r; ++i)
      if (!(in >> rom.U(k, i))) throw std::runtime_error("read_rom: truncated U block");
  for (Index k = 0; k < q; ++k)
    for (Index i = 0; i < r; ++i)
      if (!(in >> rom.V(k, i))) throw std::runtime_error("read_rom: truncated V block");
  return rom;
}

void write_observations_csv(const std::filesystem::path& path, const Observations& obs) {
  const CandidateSet& cs = *obs.candidates;
  auto out = open_out(path);
  out << "index,t,x,y,value\n";
  for (Index j = 0; j < obs.d.size(); ++j) {
    const Index p = cs.positionOf(j);
    const Index k = cs.timeIndexOf(j);
    out << j << ',' << fmt(cs.time(k), "%.12g") << ',' << fmt(cs.positionX(p), "%.12g") << ','
        << fmt(cs.positionY(p), "%.12g") << ',' << fmt(obs.d(j), "%.12g") << '\n';
  }
}

void write_design_csv(const std::filesystem::path& path, const CandidateSet& cs,
                      const Vector& weights, const Vector& selected) {
  require(weights.size() == cs.numWeights(), "write_design_csv: weight size mismatch");
  auto out = open_out(path);
  out << "index,x,y,weight,selected\n";
  for (Index s = 0; s < weights.size(); ++s) {
    const Index p = cs.mode() == DesignMode::StationaryGrid ? s : cs.positionOf(s);
    out << s << ',' << fmt(cs.positionX(p), "%.12g") << ',' << fmt(cs.positionY(p), "%.12g")
        << ',' << fmt(weights(s), "%.12g") << ',' << static_cast<int>(selected(s)) << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<std::array<double, 3>>& trajectory) {
  auto out = open_out(path);
  out << "cycle,t,x,y\n";
  for (size_t i = 0; i < trajectory.size(); ++i)
    out << i << ',' << fmt(trajectory[i][0], "%.12g") << ',' << fmt(trajectory[i][1], "%.12g")
        << ',' << fmt(trajectory[i][2], "%.12g") << '\n';
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<CycleRecord>& metrics) {
  auto out = open_out(path);
  out << "cycle,t,l2_error,dist_to_source,goal_variance\n";
  for (const auto& r : metrics)
    out << r.cycle << ',' << fmt(r.t, "%.12g") << ',' << fmt(r.l2_error, "%.12g") << ','
        << fmt(r.dist_to_source, "%.12g") << ',' << fmt(r.goal_variance, "%.12g") << '\n';
}

void render_field_ppm(const std::filesystem::path& field_file,
                      const std::filesystem::path& out_image) {
  Grid grid = read_field_grid(field_file);
  ScalarField field = read_field(field_file, grid);

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index a = 0; a < field.values.size(); ++a) {
    lo = std::min(lo, field.values(a));
    hi = std::max(hi, field.values(a));
  }
  const double span = hi - lo;

  std::ofstream out(out_image, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + out_image.string());
  out << "P6\n" << grid.nx() << ' ' << grid.ny() << "\n255\n";
  for (int j = grid.ny() - 1; j >= 0; --j)
    for (int i = 0; i < grid.nx(); ++i) {
      unsigned char rgb[3];
      if (grid.isSolid(i, j)) {
        rgb[0] = 255;
        rgb[1] = 0;
        rgb[2] = 0;
      } else {
        const double v = field.values(grid.activeIndex(i, j));
        const int gray =
            span > 0.0 ? static_cast<int>(std::lround(255.0 * (v - lo) / span)) : 128;
        rgb[0] = rgb[1] = rgb[2] = static_cast<unsigned char>(std::clamp(gray, 0, 255));
      }
      out.write(reinterpret_cast<const char*>(rgb), 3);
    }
}

std::uint64_t config_hash(const std::vector<std::pair<std::string, std::string>>& entries) {
  auto sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [k, v] : sorted) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  auto out = open_out(path);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(m.scenario_hash));
  out << "command = " << m.command << '\n';
  out << "scenario_hash = " << buf << '\n';
  out << "seed = " << m.seed << '\n';
  for (const auto& [k, v] : m.notes) out << k << " = " << v << '\n';
  for (const auto& a : m.artifacts) out << "artifact = " << a << '\n';
}

}  // namespace oedsteer
