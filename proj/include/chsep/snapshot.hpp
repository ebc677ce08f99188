#pragma once

// Field snapshots: <stem>.bin holds little-endian float64 values in storage
// order (x fastest), <stem>.json the sidecar
// {dim, cells_per_axis, length_per_axis, name, time}.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "chsep/error.hpp"
#include "chsep/grid.hpp"

namespace chsep {

struct Snapshot {
  ScalarField field;
  std::string name;
  double time = 0.0;
};

inline nlohmann::json grid_to_json(const GridSpec& g) {
  nlohmann::json j;
  j["dim"] = g.dim;
  j["cells_per_axis"] = nlohmann::json::array();
  j["length_per_axis"] = nlohmann::json::array();
  for (int a = 0; a < g.dim; ++a) {
    j["cells_per_axis"].push_back(g.cells[a]);
    j["length_per_axis"].push_back(g.length[a]);
  }
  return j;
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  const int dim = j.at("dim").get<int>();
  const auto& c = j.at("cells_per_axis");
  const auto& l = j.at("length_per_axis");
  if (dim == 1) return GridSpec::line(c.at(0).get<int>(), l.at(0).get<double>());
  if (dim == 2)
    return GridSpec::box(c.at(0).get<int>(), c.at(1).get<int>(), l.at(0).get<double>(),
                         l.at(1).get<double>());
  fail(ErrorKind::ParseError, "snapshot sidecar has unsupported dim");
}

inline void write_snapshot(const std::filesystem::path& stem, const ScalarField& f,
                           const std::string& name, double time) {
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path side = stem;
  side += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + bin.string());
  for (double v : f.values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    out.write(bytes, 8);
  }
  if (!out) fail(ErrorKind::Io, "short write on " + bin.string());

  nlohmann::json j = grid_to_json(f.grid);
  j["name"] = name;
  j["time"] = time;
  std::ofstream js(side);
  if (!js) fail(ErrorKind::Io, "cannot write " + side.string());
  js << j.dump(2) << "\n";
}

/// Accepts the stem with or without a .bin/.json extension.
inline Snapshot read_snapshot(std::filesystem::path stem) {
  if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path side = stem;
  side += ".json";

  std::ifstream js(side);
  if (!js) fail(ErrorKind::Io, "cannot read " + side.string());
  nlohmann::json j;
  try {
    js >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, side.string() + ": " + e.what());
  }
  Snapshot s;
  s.field = ScalarField(grid_from_json(j));
  s.name = j.value("name", std::string{});
  s.time = j.value("time", 0.0);

  std::ifstream in(bin, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + bin.string());
  for (double& v : s.field.values) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) fail(ErrorKind::Io, "truncated snapshot " + bin.string());
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  if (!s.field.all_finite()) fail(ErrorKind::ParseError, "snapshot contains non-finite values");
  return s;
}

}  // namespace chsep
