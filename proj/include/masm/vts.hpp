#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "masm/errors.hpp"
#include "masm/grid.hpp"

namespace masm {

static_assert(std::endian::native == std::endian::little, "VTS payloads assume a little-endian host");

inline constexpr const char* kToolVersion = "masm 0.1.0";

// Provenance recorded in every output header; re-running a subcommand from
// these fields reproduces the file bit-identically.
struct provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
};

// A volume series plus its on-disk header fields. The payload is raw
// little-endian f64 in time-fastest order (t, then x, then y, then z).
struct vts_dataset {
  volume_series vol;
  std::string role = "signal";
  provenance prov;
  bool allow_nan = false;
};

namespace detail {

inline void write_be64(std::ofstream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((value >> (56 - 8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t read_be64(std::ifstream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value = (value << 8) | bytes[i];
  return value;
}

}  // namespace detail

inline std::string vts_header_json(const vts_dataset& ds) {
  nlohmann::json h;
  h["dims"] = {ds.vol.dims.nx, ds.vol.dims.ny, ds.vol.dims.nz, ds.vol.T};
  h["dtype"] = "f64le";
  h["t_tr"] = ds.vol.t_tr;
  h["spacing"] = {ds.vol.spacing[0], ds.vol.spacing[1], ds.vol.spacing[2]};
  h["role"] = ds.role;
  h["allow_nan"] = ds.allow_nan;
  h["provenance"] = {{"config_hash", ds.prov.config_hash},
                     {"seed", ds.prov.seed},
                     {"tool_version", ds.prov.tool_version}};
  return h.dump();
}

inline void write_vts(const vts_dataset& ds, const std::string& path) {
  const size_t expected = static_cast<size_t>(ds.vol.dims.voxels()) * ds.vol.T;
  if (ds.vol.data.size() != expected)
    throw format_error("write_vts: payload size does not match dims for " + path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error("write_vts: cannot open " + path);
  const std::string header = vts_header_json(ds);
  out.write("VTS1", 4);
  detail::write_be64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(ds.vol.data.data()),
            static_cast<std::streamsize>(ds.vol.data.size() * sizeof(double)));
  if (!out) throw format_error("write_vts: failed writing " + path);
}

inline vts_dataset read_vts(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw format_error("read_vts: cannot open " + path);
  const std::int64_t file_size = static_cast<std::int64_t>(in.tellg());
  in.seekg(0);

  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VTS1", 4) != 0)
    throw format_error("read_vts: bad magic in " + path);
  const std::uint64_t header_len = detail::read_be64(in);
  if (!in || static_cast<std::int64_t>(12 + header_len) > file_size)
    throw format_error("read_vts: header length field exceeds file size in " + path);

  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw format_error("read_vts: invalid header JSON in " + path + ": " + e.what());
  }

  vts_dataset ds;
  const auto dims = h.at("dims");
  if (!dims.is_array() || dims.size() != 4) throw format_error("read_vts: dims must have 4 entries in " + path);
  ds.vol.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
  ds.vol.T = dims[3].get<int>();
  if (h.at("dtype").get<std::string>() != "f64le")
    throw format_error("read_vts: unsupported dtype in " + path);
  ds.vol.t_tr = h.value("t_tr", 1.0);
  if (h.contains("spacing")) {
    const auto sp = h["spacing"];
    ds.vol.spacing = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
  }
  ds.role = h.value("role", "signal");
  ds.allow_nan = h.value("allow_nan", false);
  if (h.contains("provenance")) {
    const auto& p = h["provenance"];
    ds.prov.config_hash = p.value("config_hash", "");
    ds.prov.seed = p.value("seed", std::uint64_t{0});
    ds.prov.tool_version = p.value("tool_version", "");
  }

  const std::int64_t expected_payload =
      static_cast<std::int64_t>(ds.vol.dims.voxels()) * ds.vol.T * static_cast<std::int64_t>(sizeof(double));
  const std::int64_t actual_payload = file_size - 12 - static_cast<std::int64_t>(header_len);
  if (actual_payload != expected_payload)
    throw format_error("read_vts: payload size mismatch in " + path + ": expected " +
                       std::to_string(expected_payload) + " bytes, found " + std::to_string(actual_payload));

  ds.vol.data.resize(static_cast<size_t>(ds.vol.dims.voxels()) * ds.vol.T);
  in.read(reinterpret_cast<char*>(ds.vol.data.data()), expected_payload);
  if (!in) throw format_error("read_vts: short read in " + path);

  if (!ds.allow_nan) {
    for (double v : ds.vol.data)
      if (std::isnan(v)) throw format_error("read_vts: NaN payload rejected for " + path);
  }
  return ds;
}

}  // namespace masm
