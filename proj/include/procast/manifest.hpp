#pragma once

#include <cstdint>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "procast/container.hpp"
#include "procast/errors.hpp"
#include "procast/version.hpp"

namespace procast {

// Everything needed to reconstruct a run: the command, its resolved
// configuration (after flag/env/default precedence), digests of every input
// file, the seed, and the toolkit version.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::array();
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
};

inline std::string utc_timestamp(std::time_t t = std::time(nullptr)) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// CRC32 + byte size of a file, so a manifest pins its exact inputs.
inline void manifest_add_input(RunManifest& m, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  m.inputs.push_back(
      {{"path", path},
       {"crc32", crc32(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size())},
       {"bytes", bytes.size()}});
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"command", m.command}, {"config", m.config},
                        {"inputs", m.inputs},   {"seed", m.seed},
                        {"version", kVersion},  {"started_at", m.started_at},
                        {"finished_at", m.finished_at}};
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path + "'");
  out << manifest_to_json(m).dump(2) << "\n";
}

}  // namespace procast
