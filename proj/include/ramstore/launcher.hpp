#pragma once

#include <sys/types.h>

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ramstore {

struct HostOutcome {
  std::string host;
  bool ok = false;
  std::string error;  // empty on success
  nlohmann::json detail;
  double seconds = 0.0;
};

/// Runs `action` for every host concurrently. Every action is started before
/// any is awaited; a failing host never cancels its peers. Outcomes keep the
/// order of `hosts`.
std::vector<HostOutcome> launch_parallel(const std::vector<std::string>& hosts,
                                         const std::function<nlohmann::json(const std::string&)>& action);

/// A detached daemon process that reports readiness with one JSON line on stdout.
class DaemonProcess {
 public:
  /// Spawns argv[0] in a new session; stdin is /dev/null, stdout is a pipe to us,
  /// stderr is inherited.
  static DaemonProcess spawn(const std::vector<std::string>& argv);

  DaemonProcess() = default;
  DaemonProcess(DaemonProcess&& other) noexcept;
  DaemonProcess& operator=(DaemonProcess&& other) noexcept;
  DaemonProcess(const DaemonProcess&) = delete;
  DaemonProcess& operator=(const DaemonProcess&) = delete;
  ~DaemonProcess();

  pid_t pid() const noexcept { return pid_; }

  /// Waits for the readiness line. Returns nullopt on timeout; throws
  /// AgentFailure if the process exits or writes something unparsable.
  std::optional<nlohmann::json> wait_ready(std::chrono::milliseconds timeout);

 private:
  pid_t pid_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
};

/// Prints the readiness line and detaches stdout; used by daemons.
void announce_ready(const nlohmann::json& line);

/// True once `pid` no longer exists (or is a zombie). Reaps it if it is our child.
bool process_gone(pid_t pid);

/// Polls until the process is gone; returns false on timeout.
bool wait_process_exit(pid_t pid, std::chrono::milliseconds timeout);

/// SIGKILL, then reap if possible.
void kill_process(pid_t pid);

/// Path of the daemon executable: $RAMSTORE_DAEMON, else `ramstored` next to
/// the running executable, else the build-time location.
std::string default_daemon_path();

}  // namespace ramstore
