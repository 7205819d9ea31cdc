// SPDX-License-Identifier: Apache-2.0

#include "cdc/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace cdc {

SimTransport::SimTransport(LatencyModel latency, FailureModel failures, std::uint64_t seed)
    : latency_(std::move(latency)), failures_(std::move(failures)), seed_(seed) {
  latency_.validate();
  failures_.validate();
}

void SimTransport::send(const Message& msg, std::uint32_t from, std::uint32_t to, double at_ms) {
  auto frame = encode_frame(msg);
  if (failures_.is_down(from, at_ms)) {
    ++dropped_;
    return;
  }
  const bool outbound = from == kCoordinatorId;
  const std::uint32_t device = outbound ? to : from;
  auto rng = make_stream(seed_, {0x11e4, device, msg.request_id, msg.layer_id, outbound ? 0u : 1u,
                                 static_cast<std::uint64_t>(msg.type)});
  const double delivered = at_ms + latency_.delay(device, frame.size(), rng);
  if (failures_.is_down(to, delivered)) {
    ++dropped_;
    return;
  }
  queue_.push(Pending{delivered, seq_++, from, to, at_ms, std::move(frame)});
}

std::optional<Envelope> SimTransport::recv() {
  if (queue_.empty()) return std::nullopt;
  Pending p = queue_.top();
  queue_.pop();
  return Envelope{decode_frame(p.frame), p.from, p.to, p.sent_ms, p.delivered_ms, p.frame.size()};
}

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw ConnectionClosed(what + ": " + std::strerror(errno));
}

void read_exact(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) throw ConnectionClosed("peer closed the connection");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    got += static_cast<std::size_t>(r);
  }
}

}  // namespace

TcpConnection::TcpConnection(int fd) : fd_(fd), send_mu_(std::make_unique<std::mutex>()) {
  if (fd_ >= 0) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
}

TcpConnection::TcpConnection(TcpConnection&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), send_mu_(std::move(other.send_mu_)) {}

TcpConnection& TcpConnection::operator=(TcpConnection&& other) noexcept {
  if (this != &other) {
    close_fd();
    fd_ = std::exchange(other.fd_, -1);
    send_mu_ = std::move(other.send_mu_);
  }
  return *this;
}

TcpConnection::~TcpConnection() { close_fd(); }

void TcpConnection::close_fd() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

TcpConnection TcpConnection::connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ConnectionClosed("resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ConnectionClosed("cannot connect to " + host + ":" + service);
  return TcpConnection(fd);
}

void TcpConnection::send(const Message& msg) {
  const auto frame = encode_frame(msg);
  std::lock_guard lock(*send_mu_);
  if (fd_ < 0) throw ConnectionClosed("send on a closed connection");
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t r = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    sent += static_cast<std::size_t>(r);
  }
}

Message TcpConnection::recv() {
  if (fd_ < 0) throw ConnectionClosed("recv on a closed connection");
  std::vector<std::uint8_t> frame(kFrameHeaderSize);
  read_exact(fd_, frame.data(), kFrameHeaderSize);
  const auto h = parse_frame_header(frame);
  frame.resize(kFrameHeaderSize + h.payload_len + kFrameTrailerSize);
  read_exact(fd_, frame.data() + kFrameHeaderSize, h.payload_len + kFrameTrailerSize);
  return decode_frame(frame);
}

void TcpConnection::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ParseError("listener host must be an IPv4 address: " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 16) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("bind/listen " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

TcpConnection TcpListener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return TcpConnection(fd);
    if (errno != EINTR) throw_errno("accept");
  }
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ParseError("address '" + addr + "' is not host:port");
  std::uint16_t port = 0;
  const char* first = addr.data() + colon + 1;
  const char* last = addr.data() + addr.size();
  auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || ptr != last) throw ParseError("bad port in address '" + addr + "'");
  return {addr.substr(0, colon), port};
}

TcpTransport::TcpTransport(std::uint32_t self) : self_(self), epoch_(std::chrono::steady_clock::now()) {}

TcpTransport::~TcpTransport() { close(); }

double TcpTransport::now_ms() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
}

void TcpTransport::add_peer(std::uint32_t peer, TcpConnection conn) {
  std::lock_guard lock(mu_);
  if (closed_) throw ConnectionClosed("transport closed");
  if (peers_.count(peer)) throw InvalidArgument("peer " + std::to_string(peer) + " already connected");
  auto p = std::make_unique<Peer>(Peer{std::move(conn), {}});
  Peer* raw = p.get();
  ++open_readers_;
  raw->reader = std::thread([this, raw, peer] {
    while (true) {
      try {
        Message m = raw->conn.recv();
        const std::size_t bytes = kFrameHeaderSize + m.payload.size() + kFrameTrailerSize;
        const double t = now_ms();
        std::lock_guard inner(mu_);
        inbox_.push_back(Envelope{std::move(m), peer, self_, t, t, bytes});
        cv_.notify_all();
      } catch (const Error&) {
        break;
      }
    }
    std::lock_guard inner(mu_);
    --open_readers_;
    cv_.notify_all();
  });
  peers_.emplace(peer, std::move(p));
}

void TcpTransport::send(const Message& msg, std::uint32_t from, std::uint32_t to, double) {
  if (from != self_) throw InvalidArgument("TcpTransport can only send as its own id");
  Peer* peer = nullptr;
  {
    std::lock_guard lock(mu_);
    auto it = peers_.find(to);
    if (it == peers_.end()) throw UnknownDevice("no connection to device " + std::to_string(to));
    peer = it->second.get();
  }
  peer->conn.send(msg);
}

std::optional<Envelope> TcpTransport::recv() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !inbox_.empty() || open_readers_ == 0; });
  if (inbox_.empty()) return std::nullopt;
  Envelope e = std::move(inbox_.front());
  inbox_.pop_front();
  return e;
}

void TcpTransport::close() {
  std::map<std::uint32_t, std::unique_ptr<Peer>> peers;
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
    for (auto& [id, p] : peers_) p->conn.shutdown();
    peers.swap(peers_);
  }
  for (auto& [id, p] : peers) {
    if (p->reader.joinable()) p->reader.join();
  }
}

}  // namespace cdc
