#include "ramstore/launcher.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ramstore/error.hpp"

extern char** environ;

namespace ramstore {

std::vector<HostOutcome> launch_parallel(const std::vector<std::string>& hosts,
                                         const std::function<nlohmann::json(const std::string&)>& action) {
  std::vector<HostOutcome> outcomes(hosts.size());
  std::vector<std::thread> threads;
  threads.reserve(hosts.size());
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    outcomes[i].host = hosts[i];
    threads.emplace_back([&, i] {
      const auto start = std::chrono::steady_clock::now();
      try {
        outcomes[i].detail = action(hosts[i]);
        outcomes[i].ok = true;
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      } catch (...) {
        outcomes[i].error = "unknown failure";
      }
      outcomes[i].seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
  }
  for (auto& t : threads) t.join();
  return outcomes;
}

DaemonProcess DaemonProcess::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(Errc::InvalidArgument, "empty daemon command line");
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(Errc::Internal, std::string("pipe: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, fds[1], 1);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t empty;
  sigemptyset(&empty);
  sigset_t defaults;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigaddset(&defaults, SIGTERM);
  sigaddset(&defaults, SIGINT);
  sigaddset(&defaults, SIGHUP);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSID | POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF);

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, argv[0].c_str(), &actions, &attr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw Error(Errc::AgentFailure, "cannot start " + argv[0] + ": " + std::strerror(rc));
  }
  DaemonProcess process;
  process.pid_ = pid;
  process.stdout_fd_ = fds[0];
  return process;
}

DaemonProcess::DaemonProcess(DaemonProcess&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)),
      stdout_fd_(std::exchange(other.stdout_fd_, -1)),
      buffer_(std::move(other.buffer_)) {}

DaemonProcess& DaemonProcess::operator=(DaemonProcess&& other) noexcept {
  if (this != &other) {
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    pid_ = std::exchange(other.pid_, -1);
    stdout_fd_ = std::exchange(other.stdout_fd_, -1);
    buffer_ = std::move(other.buffer_);
  }
  return *this;
}

DaemonProcess::~DaemonProcess() {
  if (stdout_fd_ >= 0) ::close(stdout_fd_);
}

std::optional<nlohmann::json> DaemonProcess::wait_ready(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      auto line = nlohmann::json::parse(buffer_.substr(0, nl), nullptr, false);
      buffer_.erase(0, nl + 1);
      if (line.is_discarded() || !line.is_object()) {
        throw Error(Errc::AgentFailure, "pid " + std::to_string(pid_) + " wrote a malformed ready line");
      }
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{stdout_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::Internal, std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::read(stdout_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::AgentFailure, std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) {
      throw Error(Errc::AgentFailure, "pid " + std::to_string(pid_) + " exited before becoming ready");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void announce_ready(const nlohmann::json& line) {
  const std::string text = line.dump() + "\n";
  std::fwrite(text.data(), 1, text.size(), stdout);
  std::fflush(stdout);
  const int devnull = ::open("/dev/null", O_WRONLY | O_CLOEXEC);
  if (devnull >= 0) {
    ::dup2(devnull, 1);
    ::close(devnull);
  }
}

bool process_gone(pid_t pid) {
  if (pid <= 0) return true;
  int status = 0;
  const pid_t r = ::waitpid(pid, &status, WNOHANG);
  if (r == pid) return true;
  if (r == 0) return false;  // our child, still running
  if (::kill(pid, 0) != 0 && errno == ESRCH) return true;
  // Not our child: an unreaped zombie counts as gone.
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string text;
  if (!std::getline(stat, text)) return true;
  const auto close_paren = text.rfind(')');
  return close_paren != std::string::npos && close_paren + 2 < text.size() &&
         text[close_paren + 2] == 'Z';
}

bool wait_process_exit(pid_t pid, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto pause = std::chrono::microseconds(100);
  while (!process_gone(pid)) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::microseconds(20000));
  }
  return true;
}

void kill_process(pid_t pid) {
  if (pid <= 0) return;
  ::kill(pid, SIGKILL);
  wait_process_exit(pid, std::chrono::seconds(5));
}

std::string default_daemon_path() {
  if (const char* env = std::getenv("RAMSTORE_DAEMON"); env != nullptr && *env != '\0') return env;
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const auto sibling = self.parent_path() / "ramstored";
    if (std::filesystem::exists(sibling, ec)) return sibling.string();
  }
#ifdef RAMSTORE_DAEMON_FALLBACK
  return RAMSTORE_DAEMON_FALLBACK;
#else
  return "ramstored";
#endif
}

}  // namespace ramstore
