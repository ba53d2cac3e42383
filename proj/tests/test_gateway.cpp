#include <gtest/gtest.h>

#include <httplib.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <random>

#include "ramstore/error.hpp"
#include "ramstore/gateway.hpp"
#include "support.hpp"

using namespace ramstore;
using ramstore::testing::LocalCluster;
using ramstore::testing::random_bytes;

namespace {

// Sends only a request head and returns the raw response, so a server that
// answers before reading the body can be observed.
std::string head_only_request(int port, const std::string& head) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return {};
  }
  (void)::send(fd, head.data(), head.size(), MSG_NOSIGNAL);
  std::string out;
  char buf[4096];
  for (ssize_t n; (n = ::recv(fd, buf, sizeof(buf), 0)) > 0;) out.append(buf, static_cast<std::size_t>(n));
  ::close(fd);
  return out;
}

std::string as_string(const std::vector<std::byte>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size()};
}

class GatewayTest : public ::testing::Test {
 protected:
  explicit GatewayTest(std::uint64_t osd_capacity = 64ull << 20) : cluster_(2, osd_capacity) {
    cluster_.create_pool("p", 1, 1 << 20);
    GatewaySpec spec;
    spec.listen_address = "127.0.0.1:0";
    spec.cluster = cluster_.endpoint();
    spec.max_body_bytes = 16 << 20;
    gateway_ = std::make_unique<GatewayServer>(spec);
    gateway_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", gateway_->port());
    auth_ = {{"Authorization", "Bearer " + cluster_.client_secret()}};
  }
  ~GatewayTest() override { gateway_->stop(); }

  int put(const std::string& path, const std::string& body, httplib::Headers extra = {}) {
    httplib::Headers h = auth_;
    h.insert(extra.begin(), extra.end());
    auto r = client_->Put(path, h, body, "application/octet-stream");
    return r ? r->status : -1;
  }

  LocalCluster cluster_;
  std::unique_ptr<GatewayServer> gateway_;
  std::unique_ptr<httplib::Client> client_;
  httplib::Headers auth_;
};

class SmallGateway : public GatewayTest {
 protected:
  SmallGateway() : GatewayTest(1 << 20) {}
};

}  // namespace

TEST(GatewayStatus, ErrorMapping) {
  EXPECT_EQ(gateway_status(Errc::NoSuchObject), 404);
  EXPECT_EQ(gateway_status(Errc::UnknownPool), 404);
  EXPECT_EQ(gateway_status(Errc::NoSpace), 507);
  EXPECT_EQ(gateway_status(Errc::AuthFailure), 403);
  EXPECT_EQ(gateway_status(Errc::PayloadTooLarge), 413);
  EXPECT_EQ(gateway_status(Errc::InvalidName), 400);
  EXPECT_EQ(gateway_status(Errc::ChecksumMismatch), 500);
  EXPECT_EQ(gateway_status(Errc::Internal), 500);
}

TEST_F(GatewayTest, RoundTrip) {
  EXPECT_EQ(put("/p/abc", "abc"), 201);
  auto r = client_->Get("/p/abc", auth_);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "abc");
}

TEST_F(GatewayTest, MetadataHeaders) {
  EXPECT_EQ(put("/p/m", "x", {{"x-amz-meta-owner", "beamline"}}), 201);
  auto r = client_->Get("/p/m", auth_);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->get_header_value("x-amz-meta-owner"), "beamline");
  EXPECT_EQ(cluster_.store().get_object("p", "m").user_metadata.at("owner"), "beamline");
}

TEST_F(GatewayTest, DeleteThenGet) {
  ASSERT_EQ(put("/p/gone", "bye"), 201);
  auto d = client_->Delete("/p/gone", auth_);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->status, 204);
  auto g = client_->Get("/p/gone", auth_);
  ASSERT_TRUE(g);
  EXPECT_EQ(g->status, 404);
}

TEST_F(GatewayTest, MissingPool) {
  auto r = client_->Get("/missing-pool/x", auth_);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
}

TEST_F(GatewayTest, Listing) {
  for (const char* n : {"b", "c", "a"}) ASSERT_EQ(put(std::string("/p/") + n, std::string(3, n[0])), 201);
  auto r = client_->Get("/p?list", auth_);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "a\t3\nb\t3\nc\t3\n");
}

TEST_F(GatewayTest, CreatePool) {
  auto r = client_->Put("/fresh", auth_, "", "text/plain");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  EXPECT_NE(cluster_.monitor().get_map().find_pool("fresh"), nullptr);
  r = client_->Put("/fresh", auth_, "", "text/plain");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 409);
}

TEST_F(GatewayTest, LargeBinaryRoundTrip) {
  std::mt19937_64 rng(21);
  const auto data = as_string(random_bytes(rng, (5 << 20) + 3));
  ASSERT_EQ(put("/p/big", data), 201);
  auto r = client_->Get("/p/big", auth_);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->body, data);
}

TEST_F(GatewayTest, BodyOverCap) {
  const std::string head = "PUT /p/huge HTTP/1.1\r\nHost: localhost\r\nAuthorization: Bearer " +
                           cluster_.client_secret() + "\r\nContent-Length: " + std::to_string((16 << 20) + 1) +
                           "\r\nConnection: close\r\n\r\n";
  const auto response = head_only_request(gateway_->port(), head);
  EXPECT_EQ(response.rfind("HTTP/1.1 413", 0), 0u) << response;
  EXPECT_TRUE(cluster_.store().list_objects("p").empty());
}

TEST_F(GatewayTest, PutWithoutLength) {
  const std::string head = "PUT /p/x HTTP/1.1\r\nHost: localhost\r\nAuthorization: Bearer " +
                           cluster_.client_secret() + "\r\nConnection: close\r\n\r\n";
  EXPECT_EQ(head_only_request(gateway_->port(), head).rfind("HTTP/1.1 411", 0), 0u);
}

// Every route, no token and a wrong token: 403 and nothing changes.
TEST_F(GatewayTest, AuthMatrix) {
  ASSERT_EQ(put("/p/kept", "kept"), 201);
  for (const httplib::Headers& headers :
       {httplib::Headers{}, httplib::Headers{{"Authorization", "Bearer " + std::string(64, 'f')}},
        httplib::Headers{{"Authorization", cluster_.client_secret()}}}) {
    auto check = [&](const httplib::Result& r) {
      ASSERT_TRUE(r);
      EXPECT_EQ(r->status, 403);
    };
    check(client_->Put("/p/new", headers, "x", "text/plain"));
    check(client_->Put("/newpool", headers, "", "text/plain"));
    check(client_->Get("/p/kept", headers));
    check(client_->Head("/p/kept", headers));
    check(client_->Get("/p?list", headers));
    check(client_->Delete("/p/kept", headers));
  }
  EXPECT_EQ(cluster_.store().list_objects("p").size(), 1u);
  EXPECT_EQ(cluster_.monitor().get_map().find_pool("newpool"), nullptr);
}

TEST_F(GatewayTest, OccupiedPort) {
  GatewaySpec spec;
  spec.listen_address = "127.0.0.1:" + std::to_string(gateway_->port());
  spec.cluster = cluster_.endpoint();
  try {
    GatewayServer second(spec);
    FAIL() << "bound twice";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AddressInUse);
  }
}

TEST(Gateway, MonitorUnavailable) {
  ramstore::testing::TempDir dir;
  GatewaySpec spec;
  spec.listen_address = "127.0.0.1:0";
  spec.cluster = {"nobody", dir / "mon.sock", "secret"};
  try {
    GatewayServer server(spec);
    FAIL() << "started without a monitor";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MonitorUnavailable);
  }
}

TEST_F(SmallGateway, OverCapacityLeavesNothing) {
  std::mt19937_64 rng(22);
  ASSERT_EQ(put("/p/small", "ok"), 201);
  EXPECT_EQ(put("/p/huge", as_string(random_bytes(rng, 3 << 20))), 507);
  auto r = client_->Get("/p/huge", auth_);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  const auto list = cluster_.store().list_objects("p");
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0].name, "small");
}
