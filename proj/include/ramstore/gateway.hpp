#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "ramstore/error.hpp"
#include "ramstore/object_store.hpp"

namespace httplib {
class Server;
}

namespace ramstore {

struct GatewaySpec {
  std::string listen_address;  // "host:port"; port 0 picks a free one
  ClusterEndpoint cluster;
  std::string client_secret;   // expected in "Authorization: Bearer <hex>"
  std::uint64_t max_body_bytes = 256ull << 20;
  std::uint32_t bucket_replication_factor = 1;  // for PUT /{pool}
};

/// HTTP status for a store error. Total over Errc.
int gateway_status(Errc code);

/// S3-subset front end over ObjectStore:
///
///   PUT    /{pool}/{object}   201   body stored; x-amz-meta-* headers become metadata
///   GET    /{pool}/{object}   200   object bytes
///   HEAD   /{pool}/{object}   200   size only
///   DELETE /{pool}/{object}   204
///   GET    /{pool}?list       200   "name\tsize\n" rows sorted by name
///   PUT    /{pool}            201   creates the pool
///
/// Missing or wrong bearer token: 403. PUT without Content-Length: 411.
/// Body over the cap: 413.
class GatewayServer {
 public:
  /// Binds the socket and checks the monitor. Throws AddressInUse or
  /// MonitorUnavailable.
  explicit GatewayServer(GatewaySpec spec);
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;
  ~GatewayServer();

  void start();
  void stop();

  int port() const noexcept { return port_; }
  std::string address() const { return host_ + ":" + std::to_string(port_); }

 private:
  void install_routes();

  GatewaySpec spec_;
  std::string host_;
  int port_ = 0;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
};

}  // namespace ramstore
