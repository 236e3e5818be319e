#include "chaosode/data_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chaosode/errors.hpp"

namespace chaosode {

std::string format_decimal(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string sidecar_path(const std::string& csv_path) {
  return std::filesystem::path(csv_path).replace_extension(".json").string();
}

void write_observations(const ObservationSet& data, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw InputError("cannot write " + csv_path);
  out << 't';
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",x" << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_decimal(data.times[i]);
    for (std::size_t j = 0; j < data.dim(); ++j)
      out << ',' << format_decimal(data.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw InputError("cannot write " + sidecar_path(csv_path));
  side << nlohmann::json{{"sigma", data.sigma}, {"seed", data.seed}, {"t0", data.t0}, {"x0", data.x0}}.dump(2)
       << '\n';
}

namespace {

double parse_double(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) throw InputError(where + ": not a number '" + field + "'");
  return v;
}

}  // namespace

ObservationSet read_observations(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw InputError("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("t,")) throw InputError(csv_path + ": expected header t,x1,...");
  const auto dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<double> times;
  std::vector<double> flat;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    const std::string where = csv_path + ":" + std::to_string(row);
    while (std::getline(ss, field, ',')) values.push_back(parse_double(field, where));
    if (values.size() != dim + 1) throw InputError(where + ": expected " + std::to_string(dim + 1) + " columns");
    if (!times.empty() && !(values[0] > times.back())) throw InputError(where + ": times must increase");
    times.push_back(values[0]);
    flat.insert(flat.end(), values.begin() + 1, values.end());
  }
  if (times.empty()) throw InputError(csv_path + ": no observations");

  ObservationSet data;
  data.times = std::move(times);
  data.states.resize(static_cast<Eigen::Index>(data.times.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < data.states.rows(); ++r)
    for (Eigen::Index c = 0; c < data.states.cols(); ++c)
      data.states(r, c) = flat[static_cast<std::size_t>(r) * dim + static_cast<std::size_t>(c)];
  data.t0 = data.times.front();
  data.x0.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(dim));

  std::ifstream side(sidecar_path(csv_path));
  if (side) {
    try {
      const auto j = nlohmann::json::parse(side);
      data.sigma = j.value("sigma", 0.0);
      data.seed = j.value("seed", std::uint64_t{0});
      data.t0 = j.value("t0", data.t0);
      data.x0 = j.value("x0", data.x0);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(sidecar_path(csv_path) + ": " + e.what());
    }
    if (data.x0.size() != dim) throw InputError(sidecar_path(csv_path) + ": x0 has the wrong dimension");
  }
  return data;
}

std::vector<ScenarioRecord> read_records(const std::string& jsonl_path) {
  std::vector<ScenarioRecord> out;
  std::ifstream in(jsonl_path);
  if (!in) return out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const bool last = in.peek() == std::char_traits<char>::eof();
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      if (last && !in.bad()) break;
      throw InputError(jsonl_path + ":" + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace chaosode
