#pragma once

#include <string>

#include "fedcd/federation.hpp"

namespace fedcd {

// Synchronous-round federation server over TCP.  Binds in the constructor
// (port 0 picks an ephemeral port, see port()); run() accepts cfg.m clients,
// drives the outer loop, and returns the same report the in-process
// transport produces, except that score traces stay empty because the
// server never sees data.
class TcpServer {
 public:
  TcpServer(FederationConfig cfg, int d, const std::string& host, int port,
            double timeout_seconds = 0.0);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  int port() const { return port_; }
  RunReport run();

 private:
  FederationConfig cfg_;
  int d_;
  double timeout_;
  int listen_fd_ = -1;
  int port_ = 0;
};

// Client endpoint: connects, announces itself, and follows the server's
// schedule until DONE.  Returns the client's final proxy matrix.
Matrix tcp_join(const FederationConfig& cfg, int client_id, Matrix data,
                const std::string& host, int port,
                double timeout_seconds = 0.0);

}  // namespace fedcd
