#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramstore/cluster_map.hpp"

// Files a cluster keeps in the shared directory (the NFS stand-in):
//   <cluster_id>.<role>.key     hex secret + '\n', mode 0600
//   <cluster_id>.cluster.json   orchestrator state: addresses and pids
namespace ramstore::shared_dir {

std::filesystem::path key_path(const std::filesystem::path& dir, const std::string& cluster_id, Role role);
std::filesystem::path state_path(const std::filesystem::path& dir, const std::string& cluster_id);

void write_keyring(const std::filesystem::path& dir, const std::string& cluster_id, const Keyring& keyring);
/// Throws AuthFailure if the key file is missing or malformed.
std::string read_secret(const std::filesystem::path& dir, const std::string& cluster_id, Role role);
Keyring read_keyring(const std::filesystem::path& dir, const std::string& cluster_id);

/// Writes `content` via a temporary file and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content, bool owner_only);

/// Every file in `dir` whose name starts with "<cluster_id>.".
std::vector<std::filesystem::path> cluster_files(const std::filesystem::path& dir, const std::string& cluster_id);

}  // namespace ramstore::shared_dir
