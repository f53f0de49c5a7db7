#include "fedcd/tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include "fedcd/graphmask.hpp"

namespace fedcd {
namespace {

constexpr std::uint64_t kMaxPayloadBytes = 1ull << 30;

[[noreturn]] void fail_errno(const std::string& what) {
  throw ProtocolError(what + ": " + std::strerror(errno));
}

void set_io_timeout(int fd, double seconds) {
  if (seconds <= 0.0) return;
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - std::floor(seconds)) * 1e6);
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void send_all(int fd, const std::uint8_t* data, std::size_t len,
              const std::string& who) {
  std::size_t sent = 0;
  while (sent < len) {
    const ssize_t k = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        throw ProtocolError("send to " + who + " timed out");
      }
      fail_errno("send to " + who + " failed");
    }
    sent += static_cast<std::size_t>(k);
  }
}

void recv_all(int fd, std::uint8_t* data, std::size_t len,
              const std::string& who) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t k = ::recv(fd, data + got, len - got, 0);
    if (k == 0) {
      throw ProtocolError(who + " disconnected mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        throw ProtocolError("read from " + who + " timed out");
      }
      fail_errno("read from " + who + " failed");
    }
    got += static_cast<std::size_t>(k);
  }
}

void write_frame(int fd, const RoundMessage& msg, const std::string& who) {
  const std::vector<std::uint8_t> frame = tcp_encode(msg);
  send_all(fd, frame.data(), frame.size(), who);
}

RoundMessage read_frame(int fd, const std::string& who) {
  std::vector<std::uint8_t> buf(kWireHeaderBytes);
  recv_all(fd, buf.data(), kWireHeaderBytes, who);
  std::uint64_t payload_bytes = 0;
  for (int i = 0; i < 8; ++i) {
    payload_bytes = (payload_bytes << 8) | buf[18 + i];
  }
  if (payload_bytes > kMaxPayloadBytes) {
    throw ProtocolError("frame from " + who + " exceeds payload limit");
  }
  buf.resize(kWireHeaderBytes + payload_bytes + 4);
  recv_all(fd, buf.data() + kWireHeaderBytes, payload_bytes + 4, who);
  return tcp_decode(buf);
}

RoundMessage expect_frame(int fd, MsgType want, const std::string& who) {
  const RoundMessage msg = read_frame(fd, who);
  if (msg.type != want) {
    throw ProtocolError(std::string("expected ") + msg_type_name(want) +
                        " from " + who + ", got " + msg_type_name(msg.type));
  }
  return msg;
}

std::vector<double> matrix_to_payload(const Matrix& u) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j) flat.push_back(u(i, j));
  return flat;
}

Matrix payload_to_matrix(const std::vector<double>& p, Eigen::Index d,
                         const std::string& who) {
  if (static_cast<Eigen::Index>(p.size()) != d * d) {
    throw ProtocolError("payload from " + who +
                        " has wrong size for a proxy matrix");
  }
  Matrix u(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      u(i, j) = p[static_cast<std::size_t>(i * d + j)];
  return u;
}

struct FdGuard {
  int fd = -1;
  ~FdGuard() {
    if (fd >= 0) ::close(fd);
  }
};

}  // namespace

TcpServer::TcpServer(FederationConfig cfg, int d, const std::string& host,
                     int port, double timeout_seconds)
    : cfg_(std::move(cfg)), d_(d), timeout_(timeout_seconds) {
  if (cfg_.r == 0) cfg_.r = cfg_.m;
  cfg_.validate();
  if (cfg_.mode == Mode::Separate) {
    throw ConfigError("tcp: SEPARATE mode has no server role");
  }
  if (d_ < 1) throw ConfigError("tcp: d must be positive");

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) fail_errno("tcp: socket creation failed");
  const int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ProtocolError("tcp: invalid host address '" + host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
      0) {
    const int err = errno;
    ::close(listen_fd_);
    listen_fd_ = -1;
    errno = err;
    fail_errno("tcp: bind failed");
  }
  if (::listen(listen_fd_, cfg_.m) < 0) {
    const int err = errno;
    ::close(listen_fd_);
    listen_fd_ = -1;
    errno = err;
    fail_errno("tcp: listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpServer::~TcpServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

RunReport TcpServer::run() {
  const SolverConfig& sol = cfg_.solver;
  const ModelKind kind = cfg_.model_kind();
  const bool share_phi = cfg_.mode == Mode::As;
  const int m = cfg_.m;
  const Eigen::Index d = d_;

  std::vector<FdGuard> conns(static_cast<std::size_t>(m));
  RunReport report;

  // Admission: every client announces its id; ids must be unique in [0, m).
  for (int accepted = 0; accepted < m; ++accepted) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) fail_errno("tcp: accept failed");
    set_io_timeout(fd, timeout_);
    const RoundMessage hello = expect_frame(fd, MsgType::Hello, "new client");
    if (hello.payload.size() != 1) {
      ::close(fd);
      throw ProtocolError("tcp: HELLO must carry exactly the client id");
    }
    const long id = std::lround(hello.payload[0]);
    if (id < 0 || id >= m) {
      ::close(fd);
      throw ProtocolError("tcp: client id " + std::to_string(id) +
                          " out of range");
    }
    if (hello.d != static_cast<std::uint32_t>(d)) {
      ::close(fd);
      throw ProtocolError("tcp: client " + std::to_string(id) +
                          " disagrees on d");
    }
    if (conns[static_cast<std::size_t>(id)].fd >= 0) {
      ::close(fd);
      throw ProtocolError("tcp: duplicate client id " + std::to_string(id));
    }
    conns[static_cast<std::size_t>(id)].fd = fd;
  }
  for (int k = 0; k < m; ++k) {
    report.message_log.push_back(
        {MsgType::Hello, k, true, 0, 0, sizeof(double)});
  }

  const auto client_name = [](int k) {
    return "client " + std::to_string(k);
  };

  RngStream select_stream =
      RngStream(cfg_.master_seed).split(static_cast<std::uint64_t>(m));
  Matrix u_shared = Matrix::Zero(d, d);
  std::vector<double> phi_flat;  // AS only, layout fixed by the clients

  AlmState alm{sol.alpha_init, sol.rho_init, 1};
  DeterministicEval eval = deterministic_eval(u_shared, kind, sol.tau);
  double h_prev = eval.h;
  const std::size_t u_bytes = static_cast<std::size_t>(d * d) * 8;

  while (true) {
    for (int k = 0; k < m; ++k) {
      RoundMessage sched;
      sched.type = MsgType::Schedule;
      sched.outer_t = static_cast<std::uint32_t>(alm.t);
      sched.d = static_cast<std::uint32_t>(d);
      sched.payload = {alm.alpha, alm.rho};
      write_frame(conns[static_cast<std::size_t>(k)].fd, sched,
                  client_name(k));
      report.message_log.push_back(
          {MsgType::Schedule, k, false, sched.outer_t, 0, 2 * 8});
    }

    long done = 0;
    std::uint32_t round = 0;
    std::vector<Matrix> uploads(static_cast<std::size_t>(m));
    std::vector<std::vector<double>> phi_uploads(
        share_phi ? static_cast<std::size_t>(m) : 0);
    while (done < sol.it_in) {
      done = std::min(done + sol.it_fl, sol.it_in);
      ++round;
      for (int k = 0; k < m; ++k) {
        const int fd = conns[static_cast<std::size_t>(k)].fd;
        const RoundMessage up =
            expect_frame(fd, MsgType::UUpload, client_name(k));
        if (up.outer_t != static_cast<std::uint32_t>(alm.t) ||
            up.round != round) {
          throw ProtocolError("tcp: " + client_name(k) +
                              " answered for the wrong round");
        }
        uploads[static_cast<std::size_t>(k)] =
            payload_to_matrix(up.payload, d, client_name(k));
        report.message_log.push_back(
            {MsgType::UUpload, k, true, up.outer_t, round, u_bytes});
        if (share_phi) {
          const RoundMessage pup =
              expect_frame(fd, MsgType::PhiUpload, client_name(k));
          if (pup.outer_t != static_cast<std::uint32_t>(alm.t) ||
              pup.round != round) {
            throw ProtocolError("tcp: " + client_name(k) +
                                " sent networks for the wrong round");
          }
          phi_uploads[static_cast<std::size_t>(k)] = pup.payload;
          report.message_log.push_back({MsgType::PhiUpload, k, true,
                                        pup.outer_t, round,
                                        pup.payload.size() * 8});
        }
      }

      const std::vector<int> sel = select_clients(m, cfg_.r, select_stream);
      std::vector<const Matrix*> picked;
      picked.reserve(sel.size());
      for (int idx : sel) picked.push_back(&uploads[static_cast<std::size_t>(idx)]);
      u_shared = aggregate_proxies(picked);
      if (share_phi) {
        const std::vector<double>& first =
            phi_uploads[static_cast<std::size_t>(sel.front())];
        phi_flat = first;
        for (std::size_t s = 1; s < sel.size(); ++s) {
          const std::vector<double>& other =
              phi_uploads[static_cast<std::size_t>(sel[s])];
          if (other.size() != phi_flat.size()) {
            throw ProtocolError("tcp: clients disagree on network layout");
          }
          for (std::size_t i = 0; i < phi_flat.size(); ++i) {
            phi_flat[i] += other[i];
          }
        }
        if (sel.size() > 1) {
          const double inv = 1.0 / static_cast<double>(sel.size());
          for (double& v : phi_flat) v *= inv;
        }
      }

      RoundMessage bc;
      bc.type = MsgType::UBroadcast;
      bc.outer_t = static_cast<std::uint32_t>(alm.t);
      bc.round = round;
      bc.d = static_cast<std::uint32_t>(d);
      bc.payload = matrix_to_payload(u_shared);
      for (int k = 0; k < m; ++k) {
        write_frame(conns[static_cast<std::size_t>(k)].fd, bc,
                    client_name(k));
        report.message_log.push_back(
            {MsgType::UBroadcast, k, false, bc.outer_t, round, u_bytes});
      }
      if (share_phi) {
        RoundMessage pbc;
        pbc.type = MsgType::PhiBroadcast;
        pbc.outer_t = static_cast<std::uint32_t>(alm.t);
        pbc.round = round;
        pbc.d = static_cast<std::uint32_t>(d);
        pbc.payload = phi_flat;
        for (int k = 0; k < m; ++k) {
          write_frame(conns[static_cast<std::size_t>(k)].fd, pbc,
                      client_name(k));
          report.message_log.push_back({MsgType::PhiBroadcast, k, false,
                                        pbc.outer_t, round,
                                        phi_flat.size() * 8});
        }
      }
      ++report.aggregations;
    }

    eval = deterministic_eval(u_shared, kind, sol.tau);
    report.h_trace.push_back(eval.h);
    report.alpha_trace.push_back(alm.alpha);
    report.rho_trace.push_back(alm.rho);
    alm_update(alm, eval.h, h_prev, sol);
    h_prev = eval.h;
    if (outer_loop_should_stop(alm, eval.h, sol)) break;
  }

  RoundMessage fin;
  fin.type = MsgType::Done;
  fin.outer_t = static_cast<std::uint32_t>(alm.t);
  fin.d = static_cast<std::uint32_t>(d);
  for (int k = 0; k < m; ++k) {
    write_frame(conns[static_cast<std::size_t>(k)].fd, fin, client_name(k));
    report.message_log.push_back(
        {MsgType::Done, k, false, fin.outer_t, 0, 0});
  }

  report.outer_iters = alm.t - 1;
  report.final_u = u_shared;
  report.final_mask = eval.mask;
  const double thr =
      sol.threshold > 0.0 ? sol.threshold
                          : (kind == ModelKind::Linear ? 0.3 : 0.5);
  report.learned = threshold_to_dag(eval.mask, thr);
  return report;
}

Matrix tcp_join(const FederationConfig& cfg_in, int client_id, Matrix data,
                const std::string& host, int port, double timeout_seconds) {
  FederationConfig cfg = cfg_in;
  if (cfg.r == 0) cfg.r = cfg.m;
  cfg.validate();
  const SolverConfig& sol = cfg.solver;
  const Eigen::Index d = data.cols();

  FdGuard conn;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::seconds(5);
  for (;;) {
    conn.fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (conn.fd < 0) fail_errno("tcp: socket creation failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw ProtocolError("tcp: invalid host address '" + host + "'");
    }
    if (::connect(conn.fd, reinterpret_cast<sockaddr*>(&addr),
                  sizeof(addr)) == 0) {
      break;
    }
    const int err = errno;
    ::close(conn.fd);
    conn.fd = -1;
    if (err != ECONNREFUSED ||
        std::chrono::steady_clock::now() >= deadline) {
      errno = err;
      fail_errno("tcp: connect failed");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  set_io_timeout(conn.fd, timeout_seconds);
  const int one = 1;
  setsockopt(conn.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  ClientState client = make_client(
      client_id, std::move(data), cfg.model_kind(), sol,
      RngStream(cfg.master_seed).split(static_cast<std::uint64_t>(client_id)));
  const bool share_phi = cfg.mode == Mode::As;

  RoundMessage hello;
  hello.type = MsgType::Hello;
  hello.d = static_cast<std::uint32_t>(d);
  hello.payload = {static_cast<double>(client_id)};
  write_frame(conn.fd, hello, "server");

  for (;;) {
    const RoundMessage msg = read_frame(conn.fd, "server");
    if (msg.type == MsgType::Done) break;
    if (msg.type != MsgType::Schedule) {
      throw ProtocolError(std::string("tcp: expected SCHEDULE or DONE, got ") +
                          msg_type_name(msg.type));
    }
    if (msg.payload.size() != 2) {
      throw ProtocolError("tcp: SCHEDULE must carry alpha and rho");
    }
    AlmState alm{msg.payload[0], msg.payload[1],
                 static_cast<long>(msg.outer_t)};
    if (sol.reset_adam) client.adam.reset();
    client.adam.set_learning_rate(sol.lr_at(alm.t));

    long done = 0;
    std::uint32_t round = 0;
    while (done < sol.it_in) {
      const long block = std::min(sol.it_fl, sol.it_in - done);
      self_update(client, alm, sol, block);
      done += block;
      ++round;

      RoundMessage up;
      up.type = MsgType::UUpload;
      up.outer_t = msg.outer_t;
      up.round = round;
      up.d = static_cast<std::uint32_t>(d);
      up.payload = matrix_to_payload(client.u);
      write_frame(conn.fd, up, "server");
      if (share_phi) {
        RoundMessage pup;
        pup.type = MsgType::PhiUpload;
        pup.outer_t = msg.outer_t;
        pup.round = round;
        pup.d = static_cast<std::uint32_t>(d);
        pup.payload = flatten_networks(client.phi);
        write_frame(conn.fd, pup, "server");
      }

      const RoundMessage bc = expect_frame(conn.fd, MsgType::UBroadcast,
                                           "server");
      if (bc.round != round) {
        throw ProtocolError("tcp: broadcast for the wrong round");
      }
      client.u = payload_to_matrix(bc.payload, d, "server");
      if (share_phi) {
        const RoundMessage pbc =
            expect_frame(conn.fd, MsgType::PhiBroadcast, "server");
        unflatten_networks(pbc.payload, client.phi);
      }
    }
  }
  return client.u;
}

}  // namespace fedcd
