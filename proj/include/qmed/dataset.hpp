#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmed {

// n rows of (S, M, Y, X) with X's first column identically 1.
struct Dataset {
  Eigen::VectorXd s, m, y;
  Eigen::MatrixXd x;

  Eigen::Index n() const { return s.size(); }
  Eigen::Index p() const { return x.cols(); }

  void validate() const {
    const Eigen::Index rows = s.size();
    if (m.size() != rows || y.size() != rows || x.rows() != rows)
      throw std::invalid_argument("Dataset: column length mismatch");
    if (rows <= x.cols())
      throw std::invalid_argument("Dataset: need n > p");
    if (!s.allFinite() || !m.allFinite() || !y.allFinite() || !x.allFinite())
      throw std::invalid_argument("Dataset: missing or non-finite values");
    for (Eigen::Index i = 0; i < rows; ++i)
      if (x(i, 0) != 1.0)
        throw std::invalid_argument("Dataset: X1 must be the intercept column of 1s");
  }

  Dataset resample(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
    out.s.resize(k);
    out.m.resize(k);
    out.y.resize(k);
    out.x.resize(k, x.cols());
    for (Eigen::Index i = 0; i < k; ++i) {
      out.s[i] = s[idx[i]];
      out.m[i] = m[idx[i]];
      out.y[i] = y[idx[i]];
      out.x.row(i) = x.row(idx[i]);
    }
    return out;
  }
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace detail

// CSV schema: header row with columns S, M, Y, X1..Xp; X1 the intercept.
inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  long si = -1, mi = -1, yi = -1;
  std::vector<long> xi;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto& h = header[j];
    if (h == "S") si = static_cast<long>(j);
    else if (h == "M") mi = static_cast<long>(j);
    else if (h == "Y") yi = static_cast<long>(j);
    else if (h.size() >= 2 && h[0] == 'X') xi.push_back(static_cast<long>(j));
    else throw std::runtime_error(path + ": unexpected column '" + h + "'");
  }
  if (si < 0 || mi < 0 || yi < 0 || xi.empty())
    throw std::runtime_error(path + ": need columns S, M, Y, X1..Xp");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                               " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(header.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        std::size_t pos = 0;
        row[j] = std::stod(cells[j], &pos);
        if (pos != cells[j].size()) throw std::invalid_argument(cells[j]);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                 ", column '" + header[j] + "': cannot parse '" +
                                 cells[j] + "'");
      }
    }
    rows.push_back(std::move(row));
  }

  Dataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  d.s.resize(n);
  d.m.resize(n);
  d.y.resize(n);
  d.x.resize(n, static_cast<Eigen::Index>(xi.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    d.s[i] = rows[i][si];
    d.m[i] = rows[i][mi];
    d.y[i] = rows[i][yi];
    for (std::size_t j = 0; j < xi.size(); ++j)
      d.x(i, static_cast<Eigen::Index>(j)) = rows[i][xi[j]];
  }
  d.validate();
  return d;
}

inline void write_dataset_csv(const Dataset& d, std::ostream& out) {
  out << "S,M,Y";
  for (Eigen::Index j = 0; j < d.p(); ++j) out << ",X" << (j + 1);
  out << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << d.s[i] << ',' << d.m[i] << ',' << d.y[i];
    for (Eigen::Index j = 0; j < d.p(); ++j) out << ',' << d.x(i, j);
    out << "\n";
  }
}

}  // namespace qmed
