// SPDX-License-Identifier: Apache-2.0
//
// Message transports. SimTransport delivers frames on a virtual clock with
// sampled link delays and failure-aware drops; TcpTransport moves the same
// frames over loopback/LAN sockets with one reader thread per peer.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include "cdc/latency.hpp"
#include "cdc/wire.hpp"

namespace cdc {

inline constexpr std::uint32_t kCoordinatorId = 0xffff'ffffu;

struct Envelope {
  Message msg;
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double sent_ms = 0.0;
  double delivered_ms = 0.0;
  std::size_t frame_bytes = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Message& msg, std::uint32_t from, std::uint32_t to, double at_ms) = 0;
  // Next delivered message; nullopt once nothing more can arrive.
  virtual std::optional<Envelope> recv() = 0;
};

class SimTransport final : public Transport {
 public:
  SimTransport(LatencyModel latency, FailureModel failures, std::uint64_t seed);

  void send(const Message& msg, std::uint32_t from, std::uint32_t to, double at_ms) override;
  std::optional<Envelope> recv() override;

  std::size_t pending() const noexcept { return queue_.size(); }
  std::size_t dropped() const noexcept { return dropped_; }
  const LatencyModel& latency() const noexcept { return latency_; }
  const FailureModel& failures() const noexcept { return failures_; }

 private:
  struct Pending {
    double delivered_ms;
    std::uint64_t seq;
    std::uint32_t from;
    std::uint32_t to;
    double sent_ms;
    std::vector<std::uint8_t> frame;
    bool operator>(const Pending& o) const {
      return delivered_ms != o.delivered_ms ? delivered_ms > o.delivered_ms : seq > o.seq;
    }
  };

  LatencyModel latency_;
  FailureModel failures_;
  std::uint64_t seed_;
  std::uint64_t seq_ = 0;
  std::size_t dropped_ = 0;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
};

// Blocking, frame-oriented socket. send() may be called from several threads.
class TcpConnection {
 public:
  explicit TcpConnection(int fd);
  TcpConnection(TcpConnection&& other) noexcept;
  TcpConnection& operator=(TcpConnection&& other) noexcept;
  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;
  ~TcpConnection();

  static TcpConnection connect(const std::string& host, std::uint16_t port);

  void send(const Message& msg);
  // Throws ConnectionClosed on EOF or a reset socket.
  Message recv();
  void shutdown();
  bool is_open() const noexcept { return fd_ >= 0; }

 private:
  void close_fd() noexcept;

  int fd_ = -1;
  std::unique_ptr<std::mutex> send_mu_;
};

class TcpListener {
 public:
  // Port 0 picks a free port.
  explicit TcpListener(std::uint16_t port = 0, const std::string& host = "127.0.0.1");
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener();

  std::uint16_t port() const noexcept { return port_; }
  TcpConnection accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// "host:port" -> parts; throws ParseError.
std::pair<std::string, std::uint16_t> parse_address(const std::string& addr);

// Star endpoint over TCP: one connection per peer id, a reader thread per
// connection feeding a shared inbox. Timestamps are wall-clock ms since
// construction.
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(std::uint32_t self);
  ~TcpTransport() override;

  void add_peer(std::uint32_t peer, TcpConnection conn);
  void send(const Message& msg, std::uint32_t from, std::uint32_t to, double at_ms) override;
  std::optional<Envelope> recv() override;
  void close();
  double now_ms() const;

 private:
  struct Peer {
    TcpConnection conn;
    std::thread reader;
  };

  std::uint32_t self_;
  std::chrono::steady_clock::time_point epoch_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> inbox_;
  std::map<std::uint32_t, std::unique_ptr<Peer>> peers_;
  std::size_t open_readers_ = 0;
  bool closed_ = false;
};

}  // namespace cdc
