#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nse/common.hpp"

// Run manifests: every command records what it produced and the checksum of
// each artifact, so reruns can be compared without byte-diffing the files.
namespace nse::cli {

struct RunManifest {
  std::string command;
  std::string config_file;  // empty when no config file was given
  long seed = 0;
  std::string out_dir;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name -> fnv1a64 hex
};

std::string iso8601_utc_now();

// FNV-1a over the file bytes, as 16 hex digits. ParseError if unreadable.
std::string checksum_file(const std::string& path);

// Checksums out_dir/name and appends it to the artifact list.
void add_artifact(RunManifest& manifest, const std::string& name);

// Writes out_dir/manifest.json (the manifest never lists itself).
void write_manifest(const RunManifest& manifest);

}  // namespace nse::cli
