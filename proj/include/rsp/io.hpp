#pragma once

// CSV tables (RFC 4180), JSON manifests and raw state-vector dumps.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rsp/errors.hpp"
#include "rsp/spinsim.hpp"

namespace rsp {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

using CsvCell = std::variant<std::string, double, std::int64_t, std::uint64_t>;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    if (header_.empty()) throw InvalidParameter("csv table needs at least one column");
  }

  void add_row(std::vector<CsvCell> row) {
    if (row.size() != header_.size())
      throw InvalidParameter("csv row has " + std::to_string(row.size()) + " cells, header has " +
                             std::to_string(header_.size()));
    rows_.push_back(std::move(row));
  }

  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& row : rows_) {
      std::vector<std::string> cells;
      cells.reserve(row.size());
      for (const auto& c : row) cells.push_back(render(c));
      write_line(os, cells);
    }
    return os.str();
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << str();
    if (!f) throw IoError("write failed for " + path.string());
  }

 private:
  static std::string render(const CsvCell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::to_string(std::get<std::uint64_t>(c));
  }

  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) os << ',';
      os << csv_escape(cells[k]);
    }
    os << "\r\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
};

/// Minimal RFC 4180 reader, used by tests and for chaining commands.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          cell += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
      row.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      cell += c;
    }
  }
  if (quoted) throw IoError("unterminated quoted csv field");
  if (any || !cell.empty() || !row.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Amplitudes as interleaved little-endian (re, im) doubles plus a JSON
/// sidecar `<path>.json` with the atom count and norm.
inline void dump_state(const std::filesystem::path& path, const StateVector& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  auto put = [&](double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> bytes{};
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    f.write(bytes.data(), 8);
  };
  for (Eigen::Index k = 0; k < s.amplitudes.size(); ++k) {
    put(s.amplitudes[k].real());
    put(s.amplitudes[k].imag());
  }
  if (!f) throw IoError("write failed for " + path.string());
  write_json(path.string() + ".json", {{"atoms", s.n},
                                       {"dimension", s.amplitudes.size()},
                                       {"norm", s.norm()},
                                       {"layout", "complex128 little-endian, bit k = atom k, 0 = up"}});
}

inline StateVector load_state(const std::filesystem::path& path) {
  const auto meta = read_json(path.string() + ".json");
  const std::size_t n = meta.at("atoms").get<std::size_t>();
  StateVector s;
  s.n = n;
  s.amplitudes = CVector::Zero(static_cast<Eigen::Index>(hilbert_dim(n)));
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  auto get = [&] {
    std::array<unsigned char, 8> bytes{};
    if (!f.read(reinterpret_cast<char*>(bytes.data()), 8)) throw IoError("truncated state file " + path.string());
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[b]} << (8 * b);
    return std::bit_cast<double>(bits);
  };
  for (Eigen::Index k = 0; k < s.amplitudes.size(); ++k) {
    const double re = get();
    s.amplitudes[k] = cplx(re, get());
  }
  return s;
}

}  // namespace rsp
