#include "covshift/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace covshift {

namespace {

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + s + "' as a number");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string f = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = f.find_first_not_of(" \t\r\n");
    const auto e = f.find_last_not_of(" \t\r\n");
    fields.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset read_dataset_csv(const std::filesystem::path& path, Role role) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = split_csv_line(line);

  // Map each column to a feature slot or the label.
  std::vector<int> feature_slot(header.size(), -1);
  int label_col = -1;
  int p = 0;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string& h = header[j];
    if (h == "y") {
      if (label_col >= 0) throw std::runtime_error(path.string() + ": duplicate y column");
      label_col = static_cast<int>(j);
    } else if (h.size() > 1 && h[0] == 'x') {
      int idx = 0;
      const auto [ptr, ec] = std::from_chars(h.data() + 1, h.data() + h.size(), idx);
      if (ec != std::errc() || ptr != h.data() + h.size() || idx < 1)
        throw std::runtime_error(path.string() + ": bad column name '" + h + "'");
      feature_slot[j] = idx - 1;
      ++p;
    } else {
      throw std::runtime_error(path.string() + ": unexpected column '" + h + "' (expected x1..xp and y)");
    }
  }
  if (p == 0) throw std::runtime_error(path.string() + ": no feature columns");
  std::vector<bool> seen(static_cast<std::size_t>(p), false);
  for (int s : feature_slot)
    if (s >= 0) {
      if (s >= p || seen[static_cast<std::size_t>(s)])
        throw std::runtime_error(path.string() + ": feature columns must be x1..x" + std::to_string(p));
      seen[static_cast<std::size_t>(s)] = true;
    }

  std::vector<double> xs, ys;
  std::size_t line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    xs.resize(xs.size() + static_cast<std::size_t>(p));
    double* row = xs.data() + rows * static_cast<std::size_t>(p);
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const double v = parse_double(fields[j], path, line_no);
      if (static_cast<int>(j) == label_col)
        ys.push_back(v);
      else
        row[feature_slot[j]] = v;
    }
    ++rows;
  }

  Dataset d;
  d.role = role;
  d.X.resize(static_cast<Index>(rows), p);
  for (std::size_t i = 0; i < rows; ++i)
    for (int j = 0; j < p; ++j) d.X(static_cast<Index>(i), j) = xs[i * static_cast<std::size_t>(p) + j];
  if (label_col >= 0) {
    d.y = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
    if (role == Role::Test) d.heldout_labels = true;
  }
  validate(d);
  return d;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d) {
  auto out = open_out(path);
  for (Index j = 0; j < d.cols(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
  if (d.y) out << ",y";
  out << '\n';
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) out << (j ? "," : "") << format_double(d.X(i, j));
    if (d.y) out << ',' << format_double((*d.y)(i));
    out << '\n';
  }
}

void write_vector_csv(const std::filesystem::path& path, const Vector& v, const std::string& name) {
  auto out = open_out(path);
  out << name << '\n';
  for (Index i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
}

Vector read_vector_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> vals;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields.size() == 1 && fields[0].empty()) continue;
    vals.push_back(parse_double(fields.back(), path, line_no));
  }
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

}  // namespace covshift
