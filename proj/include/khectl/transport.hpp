#pragma once

// Length-prefixed message channels between the plant node and the
// controller node. Every payload travels as one frame (see wire::frame).

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

namespace khectl::transport {

class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(std::string_view payload) = 0;
  /// Blocks until a full message arrives. Throws std::runtime_error when
  /// the peer closes the connection.
  virtual std::string receive() = 0;
};

class SocketChannel final : public Channel {
 public:
  explicit SocketChannel(int fd);
  ~SocketChannel() override;
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;

  void send(std::string_view payload) override;
  std::string receive() override;

 private:
  int fd_;
  std::string buffer_;
};

std::pair<std::unique_ptr<SocketChannel>, std::unique_ptr<SocketChannel>> socket_pair();

std::unique_ptr<SocketChannel> tcp_connect(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  /// Binds 127.0.0.1 unless `host` says otherwise; port 0 picks a free one.
  explicit TcpListener(std::uint16_t port, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<SocketChannel> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace khectl::transport
