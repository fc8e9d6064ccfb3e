#include "pvmc/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pvmc {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_series_csv(const std::filesystem::path& path, std::span<const double> values,
                      std::size_t steps, std::size_t dim, const std::string& prefix) {
  auto out = open_out(path);
  for (std::size_t d = 0; d < dim; ++d) out << (d ? "," : "") << prefix << d;
  out << '\n';
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t d = 0; d < dim; ++d) out << (d ? "," : "") << values[t * dim + d];
    out << '\n';
  }
}

void write_observations_csv(const std::filesystem::path& path, const ObservationSequence& obs) {
  write_series_csv(path, obs.values(), obs.steps(), obs.dim(), "y");
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& xs) {
  write_series_csv(path, xs.values(), xs.steps(), xs.dim(), "x");
}

ObservationSequence read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  std::size_t dim = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) ++dim;
  }
  std::vector<double> values;
  std::size_t steps = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0) {
        throw std::runtime_error(path.string() + ": unparsable cell '" + cell + "' on row " +
                                 std::to_string(steps + 1));
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != dim) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(steps + 1) + " has " +
                               std::to_string(cols) + " cells, header has " + std::to_string(dim));
    }
    ++steps;
  }
  return ObservationSequence(steps, dim, std::move(values));
}

void write_smoothing_result(const std::filesystem::path& dir, const SmoothingResult& result,
                            std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const auto& g = result.particles;
  {
    auto out = open_out(dir / "weights.csv");
    out << "t";
    for (std::size_t n = 0; n < g.particles(); ++n) out << ",w" << n;
    out << '\n';
    for (std::size_t t = 0; t < g.steps(); ++t) {
      out << t;
      for (std::size_t n = 0; n < g.particles(); ++n) out << ',' << std::exp(result.log_w(t, n));
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "particles.csv");
    out << "t,n";
    for (std::size_t d = 0; d < g.dim(); ++d) out << ",x" << d;
    out << '\n';
    for (std::size_t t = 0; t < g.steps(); ++t) {
      for (std::size_t n = 0; n < g.particles(); ++n) {
        out << t << ',' << n;
        for (double v : g.state(t, n)) out << ',' << v;
        out << '\n';
      }
    }
  }
  nlohmann::json summary = {{"schema_version", kSchemaVersion},
                            {"log_L_hat", result.log_L_hat},
                            {"N", g.particles()},
                            {"T", g.horizon()},
                            {"seed", seed}};
  auto out = open_out(dir / "summary.json");
  out << summary.dump(2) << '\n';
}

void write_beliefs_csv(const std::filesystem::path& path,
                       const std::vector<GaussianBelief>& beliefs) {
  auto out = open_out(path);
  const Eigen::Index d = beliefs.empty() ? 0 : beliefs.front().mean.size();
  out << "t";
  for (Eigen::Index i = 0; i < d; ++i) out << ",m" << i;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out << ",c" << i << '_' << j;
  out << '\n';
  for (std::size_t t = 0; t < beliefs.size(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << beliefs[t].mean(i);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << beliefs[t].cov(i, j);
    out << '\n';
  }
}

}  // namespace pvmc
