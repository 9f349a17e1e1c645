#include "nse/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nse::cli {

using nlohmann::json;

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string checksum_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for checksumming");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return hex;
}

void add_artifact(RunManifest& manifest, const std::string& name) {
  manifest.artifacts.push_back({name, checksum_file(manifest.out_dir + "/" + name)});
}

void write_manifest(const RunManifest& manifest) {
  json root;
  root["command"] = manifest.command;
  root["config_file"] = manifest.config_file;
  root["seed"] = manifest.seed;
  root["out_dir"] = manifest.out_dir;
  root["started_at"] = manifest.started_at;
  root["finished_at"] = manifest.finished_at;
  root["artifacts"] = json::object();
  for (const auto& [name, sum] : manifest.artifacts) root["artifacts"][name] = sum;
  std::ofstream out(manifest.out_dir + "/manifest.json", std::ios::binary);
  if (!out) throw ParseError("cannot write manifest in '" + manifest.out_dir + "'");
  out << root.dump(2) << '\n';
}

}  // namespace nse::cli
