#include "ramstore/gateway.hpp"

#include <httplib.h>

#include <charconv>

namespace ramstore {

namespace {

constexpr const char* kMetaPrefix = "x-amz-meta-";

std::pair<std::string, int> split_listen_address(const std::string& address) {
  const auto colon = address.rfind(':');
  int port = -1;
  if (colon != std::string::npos) {
    const char* first = address.data() + colon + 1;
    const char* last = address.data() + address.size();
    auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc() || ptr != last || port < 0 || port > 65535) port = -1;
  }
  if (port < 0) throw Error(Errc::InvalidArgument, "listen address must be host:port, got '" + address + "'");
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  return {host, port};
}

void fail(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(message + "\n", "text/plain");
}

void fail(httplib::Response& res, const Error& e) { fail(res, gateway_status(e.code()), e.what()); }

bool lower_prefix(const std::string& s, const std::string& prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

// Runs a request body against the store, mapping errors onto statuses.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    fail(res, e);
  } catch (const std::exception& e) {
    fail(res, 500, e.what());
  }
}

}  // namespace

int gateway_status(Errc code) {
  switch (code) {
    case Errc::NoSuchObject:
    case Errc::UnknownPool:
      return 404;
    case Errc::NoSpace:
    case Errc::QuotaExceeded:
      return 507;
    case Errc::AuthFailure:
      return 403;
    case Errc::PayloadTooLarge:
      return 413;
    case Errc::InvalidName:
    case Errc::InvalidArgument:
      return 400;
    case Errc::DuplicatePool:
      return 409;
    case Errc::InvalidGeometry:
    case Errc::DeviceDestroyed:
    case Errc::OutOfRange:
    case Errc::UnknownDevice:
    case Errc::AddressInUse:
    case Errc::DuplicateCluster:
    case Errc::UnknownCluster:
    case Errc::DuplicateOsd:
    case Errc::UnknownOsd:
    case Errc::NotEnoughOsds:
    case Errc::ManagerUnavailable:
    case Errc::MonitorUnavailable:
    case Errc::ChecksumMismatch:
    case Errc::PhaseTimeout:
    case Errc::AgentFailure:
    case Errc::SharedDirUnwritable:
    case Errc::AlreadyDeployed:
    case Errc::EmptyPipeline:
    case Errc::SingleStage:
    case Errc::BackendUnavailable:
    case Errc::ZeroBaseline:
    case Errc::TooFewSamples:
    case Errc::MismatchedRows:
    case Errc::Protocol:
    case Errc::Internal:
      return 500;
  }
  return 500;
}

GatewayServer::GatewayServer(GatewaySpec spec) : spec_(std::move(spec)), http_(std::make_unique<httplib::Server>()) {
  auto [host, port] = split_listen_address(spec_.listen_address);
  host_ = host;
  if (spec_.client_secret.empty()) spec_.client_secret = spec_.cluster.client_secret;

  // Fails with MonitorUnavailable before we take the port.
  ObjectStore(spec_.cluster).map();

  http_->set_payload_max_length(spec_.max_body_bytes);
  // The library default adds SO_REUSEPORT, which lets a second gateway share a
  // port that is already serving; keep only SO_REUSEADDR.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
  if (port == 0) {
    port_ = http_->bind_to_any_port(host_);
    if (port_ < 0) throw Error(Errc::AddressInUse, spec_.listen_address);
  } else {
    if (!http_->bind_to_port(host_, port)) throw Error(Errc::AddressInUse, spec_.listen_address);
    port_ = port;
  }
}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::start() {
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void GatewayServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

void GatewayServer::install_routes() {
  http_->set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    const std::string auth = req.get_header_value("Authorization");
    const std::string expected = "Bearer " + spec_.client_secret;
    auto handled = [&](int status, const std::string& message) {
      fail(res, status, message);
      // The body was not read; the connection cannot be reused.
      res.set_header("Connection", "close");
      return httplib::Server::HandlerResponse::Handled;
    };
    if (!secrets_equal(auth, expected)) return handled(403, "AuthFailure: missing or wrong bearer token");
    if (req.method == "PUT") {
      if (!req.has_header("Content-Length")) return handled(411, "Content-Length required");
      const auto length = req.get_header_value_u64("Content-Length");
      if (length > spec_.max_body_bytes) return handled(413, "PayloadTooLarge: body exceeds the gateway cap");
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  http_->Put(R"(/([^/]+)/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      Metadata meta;
      for (const auto& [key, value] : req.headers) {
        if (lower_prefix(key, kMetaPrefix)) {
          std::string name = key.substr(std::char_traits<char>::length(kMetaPrefix));
          for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
          meta[name] = value;
        }
      }
      const auto* data = reinterpret_cast<const std::byte*>(req.body.data());
      const auto manifest =
          ObjectStore(spec_.cluster).put_object(req.matches[1], req.matches[2], {data, req.body.size()}, meta);
      res.status = 201;
      res.set_header("ETag", std::to_string(manifest.checksum));
    });
  });

  http_->Put(R"(/([^/]+)/?)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      PoolSpec pool;
      pool.name = req.matches[1];
      pool.replication_factor = spec_.bucket_replication_factor;
      ObjectStore(spec_.cluster).create_pool(pool);
      res.status = 201;
    });
  });

  http_->Get(R"(/([^/]+)/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto object = ObjectStore(spec_.cluster).get_object(req.matches[1], req.matches[2]);
      for (const auto& [key, value] : object.user_metadata) res.set_header(kMetaPrefix + key, value);
      res.status = 200;
      res.body.assign(reinterpret_cast<const char*>(object.data.data()), object.data.size());
      res.set_header("Content-Type", "application/octet-stream");
    });
  });

  http_->Get(R"(/([^/]+)/?)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::string body;
      for (const auto& entry : ObjectStore(spec_.cluster).list_objects(req.matches[1])) {
        body += entry.name + "\t" + std::to_string(entry.total_size_bytes) + "\n";
      }
      res.status = 200;
      res.set_content(body, "text/plain");
    });
  });

  http_->Delete(R"(/([^/]+)/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ObjectStore(spec_.cluster).delete_object(req.matches[1], req.matches[2]);
      res.status = 204;
    });
  });
}

}  // namespace ramstore
