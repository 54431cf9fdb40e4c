#include "stir/dataset.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace stir {

void Dataset::add(const std::vector<double>& values, bool label) {
  if (values.size() != names.size())
    throw std::invalid_argument("dataset: row has " + std::to_string(values.size()) +
                                " values, expected " + std::to_string(names.size()));
  x.insert(x.end(), values.begin(), values.end());
  y.push_back(label ? 1 : 0);
}

void Dataset::append(const Dataset& other) {
  if (other.names != names) throw std::invalid_argument("dataset: column mismatch on append");
  x.insert(x.end(), other.x.begin(), other.x.end());
  y.insert(y.end(), other.y.begin(), other.y.end());
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset d(names);
  d.x.reserve(rows.size() * cols());
  d.y.reserve(rows.size());
  for (std::size_t r : rows) {
    d.x.insert(d.x.end(), row(r), row(r) + cols());
    d.y.push_back(y.at(r));
  }
  return d;
}

std::size_t Dataset::positives() const {
  std::size_t n = 0;
  for (auto v : y) n += v;
  return n;
}

void write_dataset(std::ostream& out, const Dataset& d) {
  out << "label";
  for (const auto& n : d.names) out << '\t' << n;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < d.rows(); ++i) {
    out << static_cast<int>(d.y[i]);
    for (std::size_t j = 0; j < d.cols(); ++j) {
      auto res = std::to_chars(buf, buf + sizeof buf, d.at(i, j));
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty input");
  std::vector<std::string> fields;
  {
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
  }
  if (fields.empty() || fields[0] != "label") throw std::runtime_error("dataset: bad header");
  Dataset d(std::vector<std::string>(fields.begin() + 1, fields.end()));
  std::vector<double> row(d.cols());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    int label = 0;
    auto r = std::from_chars(p, end, label);
    if (r.ec != std::errc() || (label != 0 && label != 1))
      throw std::runtime_error("dataset: bad label on line " + std::to_string(lineno));
    p = r.ptr;
    for (std::size_t j = 0; j < d.cols(); ++j) {
      if (p >= end || *p != '\t')
        throw std::runtime_error("dataset: short row on line " + std::to_string(lineno));
      auto v = std::from_chars(p + 1, end, row[j]);
      if (v.ec != std::errc())
        throw std::runtime_error("dataset: bad value on line " + std::to_string(lineno));
      p = v.ptr;
    }
    if (p != end) throw std::runtime_error("dataset: long row on line " + std::to_string(lineno));
    d.add(row, label == 1);
  }
  return d;
}

}  // namespace stir
