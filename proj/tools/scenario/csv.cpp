#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scenario.hpp"

namespace unravel::cli {

namespace {

void put_number(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  const char* b = s.c_str();
  char* e = nullptr;
  double v = std::strtod(b, &e);
  if (e == b || *e != '\0') throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

OutputKind kind_from_name(const std::string& s) {
  for (OutputKind o : {OutputKind::trajectory, OutputKind::ensemble_mean, OutputKind::sigma, OutputKind::var,
                       OutputKind::record, OutputKind::riccati, OutputKind::collapse_stats, OutputKind::bell})
    if (to_string(o) == s) return o;
  throw std::runtime_error("csv metadata: unknown output kind '" + s + "'");
}

}  // namespace

void write_csv(const SeriesOutput& s, std::ostream& os) {
  os << "# " << s.metadata.dump() << "\n";
  os << "t";
  for (const auto& c : s.columns) os << "," << c;
  os << "\n";
  for (std::size_t r = 0; r < s.t.size(); ++r) {
    put_number(os, s.t[r]);
    for (const auto& col : s.data) {
      os << ",";
      put_number(os, col.at(r));
    }
    os << "\n";
  }
}

std::string to_csv(const SeriesOutput& s) {
  std::ostringstream os;
  write_csv(s, os);
  return os.str();
}

SeriesOutput read_csv(std::istream& is) {
  SeriesOutput s;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw std::runtime_error("csv: missing metadata line");
  try {
    s.metadata = nlohmann::json::parse(line.substr(2));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("csv: bad metadata: ") + e.what());
  }
  if (!s.metadata.contains("output") || !s.metadata.contains("scenario"))
    throw std::runtime_error("csv: metadata lacks scenario/output");
  s.kind = kind_from_name(s.metadata["output"].get<std::string>());
  s.name = s.metadata["scenario"].get<std::string>() + "_" + to_string(s.kind);
  if (!std::getline(is, line)) throw std::runtime_error("csv: missing header");
  auto header = split(line);
  if (header.empty() || header[0] != "t") throw std::runtime_error("csv: header must start with t");
  s.columns.assign(header.begin() + 1, header.end());
  s.data.assign(s.columns.size(), {});
  std::size_t line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != header.size())
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                               " fields");
    s.t.push_back(parse_number(f[0], line_no));
    for (std::size_t i = 1; i < f.size(); ++i) s.data[i - 1].push_back(parse_number(f[i], line_no));
  }
  return s;
}

SeriesOutput read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in);
}

std::vector<std::filesystem::path> write_outputs(const std::vector<SeriesOutput>& outputs,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& s : outputs) {
    auto p = dir / (s.name + ".csv");
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    write_csv(s, os);
    if (!os) throw std::runtime_error("write failed for " + p.string());
    paths.push_back(p);
  }
  return paths;
}

}  // namespace unravel::cli
