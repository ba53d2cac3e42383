#include "ramstore/shared_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "ramstore/error.hpp"

namespace fs = std::filesystem;

namespace ramstore::shared_dir {

fs::path key_path(const fs::path& dir, const std::string& cluster_id, Role role) {
  return dir / (cluster_id + "." + std::string(role_name(role)) + ".key");
}

fs::path state_path(const fs::path& dir, const std::string& cluster_id) {
  return dir / (cluster_id + ".cluster.json");
}

void write_file_atomic(const fs::path& path, const std::string& content, bool owner_only) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, owner_only ? 0600 : 0644);
  if (fd < 0) {
    throw Error(Errc::SharedDirUnwritable, tmp.string() + ": " + std::strerror(errno));
  }
  std::size_t done = 0;
  while (done < content.size()) {
    const ssize_t w = ::write(fd, content.data() + done, content.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(Errc::SharedDirUnwritable, tmp.string() + ": " + std::strerror(err));
    }
    done += static_cast<std::size_t>(w);
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::SharedDirUnwritable, path.string() + ": " + ec.message());
}

void write_keyring(const fs::path& dir, const std::string& cluster_id, const Keyring& keyring) {
  for (const auto& [role, secret] : keyring.secrets) {
    write_file_atomic(key_path(dir, cluster_id, role), secret + "\n", true);
  }
}

std::string read_secret(const fs::path& dir, const std::string& cluster_id, Role role) {
  const auto path = key_path(dir, cluster_id, role);
  std::ifstream in(path);
  std::string secret;
  if (!in || !std::getline(in, secret) || secret.empty()) {
    throw Error(Errc::AuthFailure, "cannot read key file " + path.string());
  }
  return secret;
}

Keyring read_keyring(const fs::path& dir, const std::string& cluster_id) {
  Keyring keyring;
  for (Role r : kAllRoles) keyring.secrets[r] = read_secret(dir, cluster_id, r);
  return keyring;
}

std::vector<fs::path> cluster_files(const fs::path& dir, const std::string& cluster_id) {
  std::vector<fs::path> out;
  std::error_code ec;
  const std::string prefix = cluster_id + ".";
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0) out.push_back(entry.path());
  }
  return out;
}

}  // namespace ramstore::shared_dir
