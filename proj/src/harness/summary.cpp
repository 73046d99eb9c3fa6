#include "gcm/harness/summary.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gcm::harness {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::size_t MetricsTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw AlignmentError("metrics table has no column '" + name + "'");
}

MetricsTable read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  MetricsTable table;
  std::string line;
  if (!std::getline(in, line)) throw AlignmentError(path.string() + ": empty metrics file");
  table.columns = split(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.columns.size()) {
      throw AlignmentError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(table.columns.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size()) {
        throw AlignmentError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + c + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

double t_interval_half_width(const std::vector<double>& samples, double level) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  boost::math::students_t dist(static_cast<double>(n - 1));
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  return t * sd / std::sqrt(static_cast<double>(n));
}

std::vector<SummaryRow> summarize(const std::vector<fs::path>& csvs) {
  if (csvs.empty()) throw AlignmentError("summarize: no metric files given");
  std::vector<MetricsTable> tables;
  for (const auto& p : csvs) tables.push_back(read_metrics(p));

  const std::size_t it_col = tables[0].column("iteration");
  const std::size_t rows = tables[0].rows.size();
  for (std::size_t k = 1; k < tables.size(); ++k) {
    const auto& t = tables[k];
    if (t.rows.size() != rows) {
      throw AlignmentError("summarize: " + csvs[k].string() + " has " + std::to_string(t.rows.size()) +
                           " iterations, " + csvs[0].string() + " has " + std::to_string(rows));
    }
    const std::size_t col = t.column("iteration");
    for (std::size_t r = 0; r < rows; ++r) {
      if (t.rows[r][col] != tables[0].rows[r][it_col]) {
        throw AlignmentError("summarize: iteration grids differ at row " + std::to_string(r + 1) +
                             " of " + csvs[k].string());
      }
    }
  }

  std::vector<SummaryRow> out;
  for (std::size_t r = 0; r < rows; ++r) {
    SummaryRow row;
    row.iteration = static_cast<std::int64_t>(tables[0].rows[r][it_col]);
    row.seeds = tables.size();
    std::vector<double> samples;
    for (const auto& t : tables) {
      samples.push_back(t.rows[r][t.column("mean_return")]);
      row.env_steps += t.rows[r][t.column("env_steps")];
    }
    row.env_steps /= static_cast<double>(tables.size());
    for (double s : samples) row.mean += s;
    row.mean /= static_cast<double>(samples.size());
    row.half_width = t_interval_half_width(samples);
    row.lower = row.mean - row.half_width;
    row.upper = row.mean + row.half_width;
    row.degenerate = samples.size() < 2;
    out.push_back(row);
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "iteration,env_steps,seeds,mean_return,ci90_half_width,ci90_lower,ci90_upper,degenerate\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << number(r.env_steps) << ',' << r.seeds << ',' << number(r.mean) << ','
       << number(r.half_width) << ',' << number(r.lower) << ',' << number(r.upper) << ','
       << (r.degenerate ? 1 : 0) << "\n";
  }
  return os.str();
}

}  // namespace gcm::harness
