// Copyright 2026 The mfpg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Off-policy data collection: each triple draws x ~ N(0, Sx), u ~ N(0, Su)
// and w ~ N(0, Sw) independently and records x+ = Ax + Bu + w. Datasets
// persist as CSV plus a JSON metadata sidecar.

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfpg/error.hpp"
#include "mfpg/lqr.hpp"
#include "mfpg/rng.hpp"
#include "mfpg/tensorops.hpp"

namespace mfpg {

struct DataTriple {
  Vector x;
  Vector u;
  Vector x_plus;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  Index nx = 0;
  Index nu = 0;
  Matrix sigma_x;
  Matrix sigma_u;
  std::string system_sha;
};

struct Dataset {
  std::vector<DataTriple> triples;
  DatasetMeta meta;

  std::size_t size() const { return triples.size(); }
};

inline bool operator==(const DataTriple& a, const DataTriple& b) {
  return a.x == b.x && a.u == b.u && a.x_plus == b.x_plus;
}

inline bool operator==(const DatasetMeta& a, const DatasetMeta& b) {
  return a.seed == b.seed && a.nx == b.nx && a.nu == b.nu && a.sigma_x == b.sigma_x && a.sigma_u == b.sigma_u &&
         a.system_sha == b.system_sha;
}

inline bool operator==(const Dataset& a, const Dataset& b) { return a.meta == b.meta && a.triples == b.triples; }

/// Lower factor L with L L' = cov. Falls back to a symmetric square root when
/// cov is only semidefinite (Cholesky fails).
inline Matrix covariance_factor(const Matrix& cov) {
  const Matrix s = symmetrized(cov, "covariance");
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues()(0) < -1e-12 * scale) throw DomainError("covariance is indefinite");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline Vector sample_gaussian_with_factor(const Matrix& factor, CounterRng& rng) {
  Vector z(factor.cols());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return factor * z;
}

inline Vector sample_gaussian(const Matrix& cov, CounterRng& rng) {
  return sample_gaussian_with_factor(covariance_factor(cov), rng);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// SHA-256 (hex) of the 17-digit text of A, B and sigma_w, column-major.
inline std::string system_fingerprint(const LinearSystem& sys) {
  std::ostringstream text;
  auto put = [&](const char* tag, const Matrix& m) {
    text << tag << ' ' << m.rows() << ' ' << m.cols();
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) text << ' ' << format_double(m(i, j));
    text << '\n';
  };
  put("A", sys.A);
  put("B", sys.B);
  put("sigma_w", sys.sigma_w);
  const std::string s = text.str();

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(s.data(), s.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("system_fingerprint: SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

inline Dataset collect_dataset(const LinearSystem& sys, std::size_t n, const Matrix& sigma_x, const Matrix& sigma_u,
                               std::uint64_t seed) {
  if (n == 0) throw ArgumentError("collect_dataset: N must be at least 1");
  if (sigma_x.rows() != sys.nx() || sigma_x.cols() != sys.nx()) throw DimensionError("sigma_x must be n_x x n_x");
  if (sigma_u.rows() != sys.nu() || sigma_u.cols() != sys.nu()) throw DimensionError("sigma_u must be n_u x n_u");
  const Matrix lx = covariance_factor(sigma_x);
  const Matrix lu = covariance_factor(sigma_u);
  const Matrix lw = covariance_factor(sys.sigma_w);

  Dataset ds;
  ds.meta = {seed, sys.nx(), sys.nu(), symmetrized(sigma_x), symmetrized(sigma_u), system_fingerprint(sys)};
  ds.triples.reserve(n);
  CounterRng rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    DataTriple t;
    t.x = sample_gaussian_with_factor(lx, rng);
    t.u = sample_gaussian_with_factor(lu, rng);
    const Vector w = sample_gaussian_with_factor(lw, rng);
    t.x_plus = sys.A * t.x + sys.B * t.u + w;
    ds.triples.push_back(std::move(t));
  }
  return ds;
}

/// Sidecar path: the data path with its extension replaced by ".json".
inline std::filesystem::path metadata_path(const std::filesystem::path& data_path) {
  auto p = data_path;
  p.replace_extension(".json");
  return p;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw SchemaError(what + ": expected a nested array");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw SchemaError(what + ": ragged rows");
    for (Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw SchemaError(what + ": non-numeric entry");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::vector<std::string> dataset_header(Index nx, Index nu) {
  std::vector<std::string> cols;
  for (Index i = 1; i <= nx; ++i) cols.push_back("x" + std::to_string(i));
  for (Index i = 1; i <= nu; ++i) cols.push_back("u" + std::to_string(i));
  for (Index i = 1; i <= nx; ++i) cols.push_back("xp" + std::to_string(i));
  return cols;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.triples.empty()) throw ArgumentError("save_dataset: empty dataset");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto header = dataset_header(ds.meta.nx, ds.meta.nu);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& t : ds.triples) {
    if (t.x.size() != ds.meta.nx || t.u.size() != ds.meta.nu || t.x_plus.size() != ds.meta.nx) {
      throw DimensionError("save_dataset: triple does not match metadata dimensions");
    }
    bool first = true;
    for (const Vector* v : {&t.x, &t.u, &t.x_plus}) {
      for (Index i = 0; i < v->size(); ++i) {
        out << (first ? "" : ",") << format_double((*v)(i));
        first = false;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());

  nlohmann::json meta = {
      {"seed", ds.meta.seed},
      {"N", ds.triples.size()},
      {"n_x", ds.meta.nx},
      {"n_u", ds.meta.nu},
      {"sigma_x", detail::matrix_to_json(ds.meta.sigma_x)},
      {"sigma_u", detail::matrix_to_json(ds.meta.sigma_u)},
      {"system_sha", ds.meta.system_sha},
  };
  std::ofstream mout(metadata_path(path), std::ios::binary);
  if (!mout) throw IoError("cannot open " + metadata_path(path).string() + " for writing");
  mout << meta.dump(2) << '\n';
  if (!mout) throw IoError("write failed: " + metadata_path(path).string());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream min(metadata_path(path));
  if (!min) throw IoError("cannot open metadata sidecar " + metadata_path(path).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(min);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(metadata_path(path).string() + ": " + e.what(), 0);
  }

  Dataset ds;
  try {
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    ds.meta.nx = meta.at("n_x").get<Index>();
    ds.meta.nu = meta.at("n_u").get<Index>();
    ds.meta.sigma_x = detail::matrix_from_json(meta.at("sigma_x"), "sigma_x");
    ds.meta.sigma_u = detail::matrix_from_json(meta.at("sigma_u"), "sigma_u");
    ds.meta.system_sha = meta.at("system_sha").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("metadata: ") + e.what());
  }
  const auto declared_n = meta.contains("N") ? meta["N"].get<std::size_t>() : 0;

  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw SchemaError("empty dataset file (no header)");
  ++lineno;
  auto header = detail::split_csv(line);
  for (auto& h : header) h = detail::trim(h);
  if (header != dataset_header(ds.meta.nx, ds.meta.nu)) {
    throw SchemaError("header does not match n_x=" + std::to_string(ds.meta.nx) +
                      ", n_u=" + std::to_string(ds.meta.nu));
  }
  const std::size_t ncols = header.size();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv(line);
    if (cells.size() != ncols) {
      throw SchemaError("row " + std::to_string(row) + " (line " + std::to_string(lineno) + ") has " +
                        std::to_string(cells.size()) + " columns, expected " + std::to_string(ncols));
    }
    Vector values(static_cast<Index>(ncols));
    for (std::size_t c = 0; c < ncols; ++c) {
      const std::string cell = detail::trim(cells[c]);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
        throw ParseError("invalid number '" + cell + "' in column " + header[c], lineno);
      }
      values(static_cast<Index>(c)) = v;
    }
    const Index nx = ds.meta.nx, nu = ds.meta.nu;
    ds.triples.push_back({values.segment(0, nx), values.segment(nx, nu), values.segment(nx + nu, nx)});
  }
  if (ds.triples.empty()) throw SchemaError("dataset contains no triples");
  if (declared_n != 0 && declared_n != ds.triples.size()) {
    throw SchemaError("metadata declares N=" + std::to_string(declared_n) + " but file has " +
                      std::to_string(ds.triples.size()) + " rows");
  }
  return ds;
}

}  // namespace mfpg
