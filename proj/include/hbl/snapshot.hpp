#pragma once

// Binary field snapshots. Little-endian: magic "HBL1", u32 version, n, N, r,
// p, q, component_count, then every component in multi-index order, each as
// N^{2n} points (row-major grid) of r x r row-major (f64 re, f64 im) pairs.
// Metrics add a JSON sidecar `<file>.json` with the bundle level and the
// coordinate convention.

#include "hbl/bundle.hpp"

#include "json.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace hbl {

inline constexpr std::uint32_t snapshot_version = 1;
inline constexpr const char* metric_sidecar_format = "hbl-metric/1";
inline constexpr const char* coordinate_convention = "z=x+iy; i dz^dzbar = 2 dx^dy; iF0 = pi m omega";

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

class Reader {
public:
  Reader(const std::string& data, const std::string& path) : d_(data), path_(path) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, d_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, d_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  void bytes(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, d_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == d_.size(); }

private:
  void need(std::size_t n) const {
    if (d_.size() - pos_ < n) throw IoError("truncated snapshot: " + path_);
  }
  const std::string& d_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return data;
}

}  // namespace detail

/// Writes bytes to `path`, throwing IoError on failure.
inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string encode_snapshot(const EndForm& f) {
  const GridField& z = f.zero();
  const Grid& g = z.grid();
  const int r = z.rank();
  std::string out;
  out.reserve(32 + f.size() * z.points() * r * r * 16);
  out.append("HBL1", 4);
  for (std::uint32_t v : {snapshot_version, static_cast<std::uint32_t>(g.n), static_cast<std::uint32_t>(g.N),
                          static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(f.p()),
                          static_cast<std::uint32_t>(f.q()), static_cast<std::uint32_t>(f.size())})
    detail::put_u32(out, v);
  for (std::size_t c = 0; c < f.size(); ++c) {
    const GridField& a = f[c];
    for (std::size_t p = 0; p < a.points(); ++p)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
          detail::put_f64(out, a(p, i, j).real());
          detail::put_f64(out, a(p, i, j).imag());
        }
  }
  return out;
}

inline EndForm decode_snapshot(const std::string& data, const std::string& path = "<memory>") {
  detail::Reader rd(data, path);
  char magic[4];
  rd.bytes(magic, 4);
  if (std::memcmp(magic, "HBL1", 4) != 0) throw IoError("bad snapshot magic: " + path);
  const std::uint32_t version = rd.u32();
  if (version != snapshot_version) throw IoError("unsupported snapshot version " + std::to_string(version) + ": " + path);
  const std::uint32_t n = rd.u32(), N = rd.u32(), r = rd.u32(), p = rd.u32(), q = rd.u32(), count = rd.u32();
  if (n < 1 || n > 3 || N < 4 || N > 1024 || !is_power_of_two(static_cast<int>(N)) || r < 1 || r > 64 || p > n ||
      q > n)
    throw IoError("snapshot header out of range: " + path);
  const Grid grid{static_cast<int>(n), static_cast<int>(N)};
  EndForm f(grid.n, static_cast<int>(p), static_cast<int>(q), GridField(grid, static_cast<int>(r)));
  if (count != f.size()) throw IoError("snapshot component count does not match its bidegree: " + path);
  const std::size_t expected = 32 + static_cast<std::size_t>(count) * grid.points() * r * r * 16;
  if (data.size() != expected) throw IoError("snapshot size mismatch: " + path);
  for (std::size_t c = 0; c < f.size(); ++c) {
    GridField a(grid, static_cast<int>(r));
    for (std::size_t pt = 0; pt < a.points(); ++pt)
      for (std::uint32_t i = 0; i < r; ++i)
        for (std::uint32_t j = 0; j < r; ++j) {
          const double re = rd.f64();
          const double im = rd.f64();
          if (!std::isfinite(re) || !std::isfinite(im)) throw IoError("non-finite value in snapshot: " + path);
          a(pt, static_cast<int>(i), static_cast<int>(j)) = Complex(re, im);
        }
    f[c] = std::move(a);
  }
  if (!rd.done()) throw IoError("trailing bytes in snapshot: " + path);
  return f;
}

inline void save_snapshot(const std::filesystem::path& path, const EndForm& f) { write_file(path, encode_snapshot(f)); }

inline EndForm load_snapshot(const std::filesystem::path& path) {
  return decode_snapshot(detail::read_file(path), path.string());
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

inline nlohmann::ordered_json metric_sidecar(const Background& bg) {
  nlohmann::ordered_json j;
  j["format"] = metric_sidecar_format;
  j["n"] = bg.n();
  j["N"] = bg.N();
  j["r"] = bg.rank;
  j["m"] = bg.level;
  nlohmann::ordered_json g = nlohmann::ordered_json::array();
  for (int a = 0; a < bg.n(); ++a) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int b = 0; b < bg.n(); ++b) row.push_back({bg.kaehler(a, b).real(), bg.kaehler(a, b).imag()});
    g.push_back(std::move(row));
  }
  j["kaehler"] = std::move(g);
  j["convention"] = coordinate_convention;
  j["stores"] = "h = H0^{-1} H";
  return j;
}

inline void save_metric(const std::filesystem::path& path, const Background& bg, const Metric& H) {
  validate_metric(bg, H);
  save_snapshot(path, as_form(H.h));
  write_file(sidecar_path(path), metric_sidecar(bg).dump(2) + "\n");
}

/// Loads a metric and checks it against `bg`: shape, bidegree, sidecar level
/// and Kaehler form, positivity.
inline Metric load_metric(const std::filesystem::path& path, const Background& bg) {
  EndForm f = load_snapshot(path);
  if (f.p() != 0 || f.q() != 0) throw IoError("metric snapshot must have bidegree (0,0): " + path.string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(detail::read_file(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt metric sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  try {
    if (side.at("format").get<std::string>() != metric_sidecar_format)
      throw IoError("unknown metric sidecar format: " + sidecar_path(path).string());
    if (side.at("m").get<int>() != bg.level || side.at("r").get<int>() != bg.rank || side.at("n").get<int>() != bg.n() ||
        side.at("N").get<int>() != bg.N())
      throw IoError("metric " + path.string() + " was saved for a different background");
    const auto& g = side.at("kaehler");
    for (int a = 0; a < bg.n(); ++a)
      for (int b = 0; b < bg.n(); ++b)
        if (Complex(g.at(a).at(b).at(0).get<double>(), g.at(a).at(b).at(1).get<double>()) != bg.kaehler(a, b))
          throw IoError("metric " + path.string() + " was saved for a different Kaehler form");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt metric sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  Metric H{std::move(f[0])};
  if (H.h.grid() != bg.grid || H.h.rank() != bg.rank)
    throw IoError("metric " + path.string() + " does not match the background grid");
  try {
    validate_metric(bg, H);
  } catch (const DegenerateMetricError& e) {
    throw IoError("metric " + path.string() + " is not positive-definite Hermitian: " + e.what());
  }
  return H;
}

}  // namespace hbl
