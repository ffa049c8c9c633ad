#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include <fmt/format.h>

#include "tsc/attrbus.hpp"

namespace tsc::bus {

namespace {

constexpr std::uint32_t kMaxFrame = 64u << 20;

bool write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, char* data, std::size_t n) {
  while (n > 0) {
    ssize_t r = ::recv(fd, data, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

// Returns false on EOF, I/O failure or an oversized length prefix.
bool read_frame(int fd, std::string& out) {
  unsigned char len[4];
  if (!read_all(fd, reinterpret_cast<char*>(len), 4)) return false;
  std::uint32_t n = (std::uint32_t{len[0]} << 24) | (std::uint32_t{len[1]} << 16) | (std::uint32_t{len[2]} << 8) | len[3];
  if (n > kMaxFrame) return false;
  out.resize(n);
  return read_all(fd, out.data(), n);
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

std::string encode_frame(std::string_view payload) {
  auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(payload.size() + 4);
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out.append(payload);
  return out;
}

struct SocketTransport::Thread {
  std::thread t;
};

SocketTransport::SocketTransport(Simulation sim) : server_(std::make_unique<AttrServer>(std::move(sim))) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(fmt::format("socket(): {}", std::strerror(errno)));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 1) < 0) {
    ::close(listen_fd_);
    throw TransportError(fmt::format("cannot listen on loopback: {}", std::strerror(errno)));
  }
  socklen_t alen = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
  port_ = ntohs(addr.sin_port);

  thread_ = std::make_unique<Thread>();
  thread_->t = std::thread([this] { serve(); });

  client_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (client_fd_ < 0 || ::connect(client_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    std::string why = std::strerror(errno);
    ::shutdown(listen_fd_, SHUT_RDWR);
    thread_->t.join();
    ::close(listen_fd_);
    if (client_fd_ >= 0) ::close(client_fd_);
    throw TransportError(fmt::format("cannot connect to loopback port {}: {}", port_, why));
  }
  set_nodelay(client_fd_);
}

SocketTransport::~SocketTransport() {
  if (client_fd_ >= 0) {
    ::shutdown(client_fd_, SHUT_RDWR);
    ::close(client_fd_);
  }
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (thread_ && thread_->t.joinable()) thread_->t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void SocketTransport::serve() {
  int fd = ::accept(listen_fd_, nullptr, nullptr);
  if (fd < 0) return;
  set_nodelay(fd);
  std::string frame;
  while (read_frame(fd, frame)) {
    json request = json::parse(frame, nullptr, false);
    if (request.is_discarded()) break;  // malformed frame ends the session
    json reply = server_->handle(request);
    std::string out = encode_frame(reply.dump());
    if (!write_all(fd, out.data(), out.size())) break;
    if (server_->closed()) break;
  }
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

json SocketTransport::roundtrip(const json& request) {
  std::string out = encode_frame(request.dump());
  if (!write_all(client_fd_, out.data(), out.size()))
    throw TransportError("connection to attribute server lost while sending");
  std::string frame;
  if (!read_frame(client_fd_, frame)) throw TransportError("attribute server closed the connection");
  json reply = json::parse(frame, nullptr, false);
  if (reply.is_discarded()) throw TransportError("malformed reply frame");
  return reply;
}

void SocketTransport::send_raw(std::string_view bytes) {
  if (!write_all(client_fd_, bytes.data(), bytes.size())) throw TransportError("connection lost while sending");
}

}  // namespace tsc::bus
