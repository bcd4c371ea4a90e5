#include "pcdiff/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "pcdiff/data.hpp"

namespace pcdiff {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw std::invalid_argument("not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

namespace {

std::string dim_header(std::size_t d) {
  std::string h;
  for (std::size_t j = 0; j < d; ++j) {
    if (j) h += ',';
    h += "dim_" + std::to_string(j);
  }
  return h;
}

void write_row(std::ostream& os, std::span<const double> row) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j) os << ',';
    os << format_double(row[j]);
  }
}

}  // namespace

void write_points_csv(std::ostream& os, const Tensor& points) {
  os << dim_header(points.cols()) << '\n';
  for (std::size_t i = 0; i < points.rows(); ++i) {
    write_row(os, points.row(i));
    os << '\n';
  }
}

Tensor read_points_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("points csv: missing header");
  const std::size_t d = split_csv_line(line).size();
  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d) throw std::invalid_argument("points csv: row " + std::to_string(rows + 1) + " has wrong width");
    for (const auto& f : fields) data.push_back(parse_double(f));
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("points csv: no rows");
  return Tensor({rows, d}, std::move(data));
}

void write_pairs_csv(std::ostream& os, const PreferencePairSet& set) {
  os << "pair_id,role," << dim_header(set.dim()) << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << i << ",winner,";
    write_row(os, set.pairs[i].winner.values());
    os << '\n' << i << ",loser,";
    write_row(os, set.pairs[i].loser.values());
    os << '\n';
  }
}

PreferencePairSet read_pairs_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("pairs csv: missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "pair_id" || header[1] != "role") {
    throw std::invalid_argument("pairs csv: header must start with pair_id,role");
  }
  const std::size_t d = header.size() - 2;
  PreferencePairSet set;
  std::vector<double> winner;
  bool have_winner = false;
  std::string winner_id;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d + 2) throw std::invalid_argument("pairs csv: row has wrong width");
    std::vector<double> x;
    for (std::size_t j = 0; j < d; ++j) x.push_back(parse_double(fields[j + 2]));
    if (fields[1] == "winner") {
      if (have_winner) throw std::invalid_argument("pairs csv: winner row without loser");
      winner = std::move(x);
      winner_id = fields[0];
      have_winner = true;
    } else if (fields[1] == "loser") {
      if (!have_winner || fields[0] != winner_id) throw std::invalid_argument("pairs csv: loser row without winner");
      set.pairs.push_back({Tensor({d}, std::move(winner)), Tensor({d}, std::move(x))});
      winner = {};
      have_winner = false;
    } else {
      throw std::invalid_argument("pairs csv: unknown role '" + fields[1] + "'");
    }
  }
  if (have_winner) throw std::invalid_argument("pairs csv: trailing winner row without loser");
  return set;
}

}  // namespace pcdiff
