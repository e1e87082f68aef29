#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "svasu/datamodel.hpp"

namespace svasu {

namespace fs = std::filesystem;

/// Cube raster format: JSON header sidecar + raw band-sequential
/// little-endian float32 payload.
///   {"bands":b,"height":h,"width":w,"dtype":"f32","interleave":"bsq","data_file":...}
inline HyperCube load_cube(const fs::path& header_path) {
  std::ifstream hf(header_path);
  if (!hf) throw IoError("load_cube: cannot open header " + header_path.string());
  nlohmann::json hdr;
  try {
    hf >> hdr;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_cube: malformed header JSON: " + std::string(e.what()));
  }
  for (const char* key : {"bands", "height", "width", "dtype", "interleave", "data_file"})
    if (!hdr.contains(key))
      throw IoError(std::string("load_cube: header missing field '") + key + "'");
  const int bands = hdr["bands"].get<int>();
  const int height = hdr["height"].get<int>();
  const int width = hdr["width"].get<int>();
  if (bands <= 0) throw IoError("load_cube: field 'bands' must be positive");
  if (height <= 0) throw IoError("load_cube: field 'height' must be positive");
  if (width <= 0) throw IoError("load_cube: field 'width' must be positive");
  if (hdr["dtype"].get<std::string>() != "f32")
    throw IoError("load_cube: field 'dtype' must be \"f32\"");
  if (hdr["interleave"].get<std::string>() != "bsq")
    throw IoError("load_cube: field 'interleave' must be \"bsq\"");

  const fs::path data_path =
      header_path.parent_path() / hdr["data_file"].get<std::string>();
  std::ifstream df(data_path, std::ios::binary);
  if (!df) throw IoError("load_cube: cannot open data_file " + data_path.string());
  df.seekg(0, std::ios::end);
  const std::uint64_t actual = static_cast<std::uint64_t>(df.tellg());
  const std::uint64_t n = static_cast<std::uint64_t>(height) * width;
  const std::uint64_t expected = static_cast<std::uint64_t>(bands) * n * 4;
  if (actual != expected)
    throw IoError("load_cube: data_file size mismatch: expected " +
                  std::to_string(expected) + " bytes, got " + std::to_string(actual));
  df.seekg(0, std::ios::beg);

  std::vector<float> buf(static_cast<std::size_t>(bands) * n);
  df.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected));
  if (!df) throw IoError("load_cube: short read on data_file");

  HyperCube cube;
  cube.height = height;
  cube.width = width;
  cube.data.resize(bands, static_cast<long>(n));
  // BSQ: one full band plane at a time, row-major within the plane.
  for (int b = 0; b < bands; ++b)
    for (std::uint64_t j = 0; j < n; ++j) {
      const float v = buf[static_cast<std::size_t>(b) * n + j];
      if (!std::isfinite(v))
        throw IoError("load_cube: non-finite value in data_file at band " +
                      std::to_string(b) + ", pixel " + std::to_string(j));
      cube.data(b, static_cast<long>(j)) = v;
    }
  cube.validate();
  return cube;
}

inline void save_cube(const HyperCube& cube, const fs::path& header_path,
                      const std::string& data_name) {
  cube.validate();
  nlohmann::json hdr = {{"bands", cube.bands()},   {"height", cube.height},
                        {"width", cube.width},     {"dtype", "f32"},
                        {"interleave", "bsq"},     {"data_file", data_name}};
  std::ofstream hf(header_path);
  if (!hf) throw IoError("save_cube: cannot write " + header_path.string());
  hf << hdr.dump(2) << "\n";

  const fs::path data_path = header_path.parent_path() / data_name;
  std::ofstream df(data_path, std::ios::binary);
  if (!df) throw IoError("save_cube: cannot write " + data_path.string());
  const std::uint64_t n = static_cast<std::uint64_t>(cube.pixels());
  std::vector<float> buf(static_cast<std::size_t>(cube.bands()) * n);
  for (int b = 0; b < cube.bands(); ++b)
    for (std::uint64_t j = 0; j < n; ++j)
      buf[static_cast<std::size_t>(b) * n + j] =
          static_cast<float>(cube.data(b, static_cast<long>(j)));
  df.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * 4));
  if (!df) throw IoError("save_cube: short write on " + data_path.string());
}

/// CSV: one matrix row per line, comma separated, no header row.
inline void save_matrix_csv(const Matrix& m, const fs::path& path) {
  if (!m.allFinite()) throw InvalidArgument("save_matrix_csv: non-finite entries");
  std::ofstream f(path);
  if (!f) throw IoError("save_matrix_csv: cannot write " + path.string());
  char cell[40];
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      std::snprintf(cell, sizeof cell, "%.17g", m(i, j));
      f << (j ? "," : "") << cell;
    }
    f << "\n";
  }
  if (!f) throw IoError("save_matrix_csv: write failure on " + path.string());
}

inline Matrix load_matrix_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_matrix_csv: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IoError("load_matrix_csv: unparseable cell '" + cell + "' in " +
                      path.string());
      }
      if (used != cell.size())
        throw IoError("load_matrix_csv: trailing junk in cell '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("load_matrix_csv: ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("load_matrix_csv: empty file " + path.string());
  Matrix m(static_cast<long>(rows.size()), static_cast<long>(rows.front().size()));
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline nlohmann::json class_offsets_to_json(const std::vector<ClassRange>& offs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [b, e] : offs) arr.push_back({b, e});
  return arr;
}

inline std::vector<ClassRange> class_offsets_from_json(const nlohmann::json& arr) {
  std::vector<ClassRange> offs;
  for (const auto& pr : arr) offs.emplace_back(pr.at(0).get<int>(), pr.at(1).get<int>());
  return offs;
}

}  // namespace svasu
