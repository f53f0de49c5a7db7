#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fedcd/config.hpp"
#include "fedcd/errors.hpp"
#include "fedcd/experiment.hpp"
#include "fedcd/federation.hpp"
#include "fedcd/io.hpp"
#include "fedcd/synthgen.hpp"
#include "fedcd/tcp.hpp"
#include "fedcd/wire.hpp"

using namespace fedcd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p =
      fs::temp_directory_path() / "fedcd_unit_scratch";
  fs::create_directories(p);
  return p;
}

Scenario tiny_scenario(int d, int m, int n, std::uint64_t seed,
                       Regime regime = Regime::Iid) {
  ScenarioSpec spec;
  spec.d = d;
  spec.edge_factor = 1;
  spec.m = m;
  spec.n = n;
  spec.regime = regime;
  spec.function_family = MechanismKind::Gp;
  spec.seed = seed;
  return make_scenario(spec);
}

FederationConfig tiny_config(int m, Mode mode, std::uint64_t seed) {
  FederationConfig cfg;
  cfg.m = m;
  cfg.mode = mode;
  cfg.master_seed = seed;
  cfg.solver.it_max = 2;
  cfg.solver.it_in = 40;
  cfg.solver.it_fl = 15;
  return cfg;
}

}  // namespace

TEST_CASE("select_clients draws sorted unique subsets uniformly") {
  RngStream stream(1);
  const std::vector<int> all = select_clients(4, 4, stream);
  CHECK(all == std::vector<int>{0, 1, 2, 3});

  std::vector<long> hits(4, 0);
  const int reps = 10000;
  for (int i = 0; i < reps; ++i) {
    const std::vector<int> s = select_clients(4, 2, stream);
    REQUIRE(s.size() == 2);
    CHECK(s[0] < s[1]);  // ascending, therefore unique
    for (int k : s) ++hits[static_cast<std::size_t>(k)];
  }
  for (long h : hits) {
    const double freq = static_cast<double>(h) / reps;
    CHECK(freq > 0.48);  // each client appears with probability 1/2
    CHECK(freq < 0.52);
  }

  RngStream s1(9), s2(9);
  CHECK(select_clients(10, 3, s1) == select_clients(10, 3, s2));
}

TEST_CASE("aggregate_proxies averages entrywise, singletons bitwise") {
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  const Matrix mean = aggregate_proxies(std::vector<Matrix>{a, b});
  CHECK(mean(0, 0) == 3.0);
  CHECK(mean(1, 1) == 6.0);

  Matrix odd(2, 2);
  odd << 0.1, 0.2, 0.3, 0.4;  // values with inexact binary representation
  const Matrix single = aggregate_proxies(std::vector<Matrix>{odd});
  CHECK((single.array() == odd.array()).all());

  const std::vector<const Matrix*> ptrs{&a, &b};
  const Matrix mean2 = aggregate_proxies(ptrs);
  CHECK((mean2 - mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("broadcast_apply installs the aggregate on every client") {
  SolverConfig sol;
  std::vector<ClientState> clients;
  for (int k = 0; k < 3; ++k) {
    clients.push_back(make_client(k, Matrix::Random(10, 2), ModelKind::Mlp,
                                  sol, RngStream(50 + k)));
  }
  Matrix u(2, 2);
  u << 0, 1.5, -0.5, 0;
  broadcast_apply(u, clients);
  for (const ClientState& c : clients)
    CHECK((c.u.array() == u.array()).all());
}

TEST_CASE("network averaging and flat packing round-trip") {
  SolverConfig sol;
  std::vector<ClientState> clients;
  for (int k = 0; k < 2; ++k) {
    clients.push_back(make_client(k, Matrix::Random(8, 3), ModelKind::Mlp,
                                  sol, RngStream(60 + k)));
  }
  const MlpStack avg = average_networks(clients, {0, 1});
  const double got = avg[1].layers[2].w(4, 5);
  const double want = 0.5 * (clients[0].phi[1].layers[2].w(4, 5) +
                             clients[1].phi[1].layers[2].w(4, 5));
  CHECK(got == want);

  const std::vector<double> flat = flatten_networks(avg);
  MlpStack rebuilt = clients[0].phi;  // same shape, different values
  unflatten_networks(flat, rebuilt);
  for (int j = 0; j < 3; ++j)
    for (int l = 0; l < kMlpLayers; ++l) {
      CHECK((rebuilt[j].layers[l].w.array() == avg[j].layers[l].w.array())
                .all());
      CHECK((rebuilt[j].layers[l].b.array() == avg[j].layers[l].b.array())
                .all());
    }
}

TEST_CASE("vote_combine keeps majority edges and prunes weak cycles") {
  BinaryDag e01 = BinaryDag::Zero(2, 2);
  e01(0, 1) = 1;
  BinaryDag e10 = BinaryDag::Zero(2, 2);
  e10(1, 0) = 1;
  BinaryDag both = e01 + e10;

  // Support 3 of 5 crosses a 0.5 quorum (cut 2.5); support 2 does not.
  const BinaryDag win =
      vote_combine({e01, e01, e01, e10, e10}, 0.5);
  CHECK(win(0, 1) == 1);
  CHECK(win(1, 0) == 0);

  // Supports 4 vs 3 both cross the quorum; the cycle resolves toward the
  // stronger direction.
  const BinaryDag cyc = vote_combine({both, both, both, e01, BinaryDag::Zero(2, 2)}, 0.5);
  CHECK(cyc(0, 1) == 1);
  CHECK(cyc(1, 0) == 0);

  CHECK_THROWS_AS(vote_combine({}, 0.5), DimensionError);
}

TEST_CASE("run_sps aggregates once per flush window") {
  const Scenario sc = tiny_scenario(3, 2, 30, 71);
  FederationConfig cfg = tiny_config(2, Mode::Ds, 72);
  cfg.r = 2;
  cfg.solver.it_in = 10;
  cfg.solver.it_fl = 3;
  std::vector<ClientState> clients;
  for (int k = 0; k < 2; ++k) {
    clients.push_back(make_client(k, sc.datasets[k], ModelKind::Mlp,
                                  cfg.solver,
                                  RngStream(cfg.master_seed).split(k)));
  }
  AlmState alm{0.0, cfg.solver.rho_init, 1};
  RngStream sel(5);
  std::vector<MessageLogEntry> log;
  long aggregations = 0;
  run_sps(clients, alm, cfg, sel, 1, &log, &aggregations);
  CHECK(aggregations == 4);  // windows of 3,3,3,1
  // Every window logs one upload and one broadcast per client.
  long uploads = 0, broadcasts = 0;
  for (const MessageLogEntry& e : log) {
    if (e.type == MsgType::UUpload) ++uploads;
    if (e.type == MsgType::UBroadcast) ++broadcasts;
    CHECK(e.type != MsgType::PhiUpload);  // proxy-only mode
  }
  CHECK(uploads == 8);
  CHECK(broadcasts == 8);
  // After the final broadcast all clients hold the same proxy matrix.
  CHECK((clients[0].u.array() == clients[1].u.array()).all());
}

TEST_CASE("full runs are deterministic across invocations") {
  const Scenario sc = tiny_scenario(3, 2, 30, 73);
  const FederationConfig cfg = tiny_config(2, Mode::Ds, 74);
  const RunReport a = run_dsfcd(sc.datasets, cfg);
  const RunReport b = run_dsfcd(sc.datasets, cfg);
  CHECK(a.learned == b.learned);
  CHECK((a.final_u.array() == b.final_u.array()).all());
  CHECK(a.h_trace == b.h_trace);
  CHECK(a.score_trace == b.score_trace);
  CHECK(a.outer_iters == b.outer_iters);
  CHECK(a.aggregations == b.aggregations);
  CHECK(a.outer_iters >= 1);
  CHECK(is_dag(a.learned));
}

TEST_CASE("all-shared mode also exchanges network weights") {
  const Scenario sc = tiny_scenario(3, 2, 30, 75);
  const FederationConfig cfg = tiny_config(2, Mode::As, 76);
  const RunReport rep = run_dsfcd(sc.datasets, cfg);
  long phi = 0;
  for (const MessageLogEntry& e : rep.message_log)
    if (e.type == MsgType::PhiUpload || e.type == MsgType::PhiBroadcast)
      ++phi;
  CHECK(phi > 0);
  CHECK(is_dag(rep.learned));
}

TEST_CASE("separate mode trains in isolation and votes") {
  const Scenario sc = tiny_scenario(3, 3, 30, 77, Regime::NonIid);
  const FederationConfig cfg = tiny_config(3, Mode::Separate, 78);
  const RunReport rep = run_dsfcd(sc.datasets, cfg);
  CHECK(rep.per_client.size() == 3);
  CHECK(rep.aggregations == 0);
  CHECK(rep.message_log.empty());
  CHECK(rep.learned == vote_combine(rep.per_client, cfg.vote_quorum));
  for (const BinaryDag& b : rep.per_client) CHECK(is_dag(b));
}

TEST_CASE("federation config validation enforces bounds") {
  FederationConfig cfg;
  cfg.m = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  FederationConfig cfg2;
  cfg2.m = 4;
  cfg2.r = 5;
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);
  FederationConfig cfg3;
  cfg3.vote_quorum = 0.0;
  cfg3.r = cfg3.m;
  CHECK_THROWS_AS(cfg3.validate(), ConfigError);
}

TEST_CASE("wire frames round-trip exactly") {
  RoundMessage msg;
  msg.type = MsgType::UUpload;
  msg.outer_t = 3;
  msg.round = 7;
  msg.d = 2;
  msg.payload = {0.0, 1.5, -2.25, 1e300};
  const std::vector<std::uint8_t> frame = tcp_encode(msg);
  CHECK(frame.size() == kWireHeaderBytes + 4 * 8 + 4);
  const RoundMessage back = tcp_decode(frame);
  CHECK(back == msg);

  // Header fields land big-endian at fixed offsets.
  CHECK(frame[0] == 0x46);  // magic "FCD1"
  CHECK(frame[1] == 0x43);
  CHECK(frame[2] == 0x44);
  CHECK(frame[3] == 0x31);
  CHECK(frame[4] == kWireVersion);
  CHECK(frame[5] == static_cast<std::uint8_t>(MsgType::UUpload));
  CHECK(frame[13] == 7);   // round, low byte of big-endian u32
  CHECK(frame[25] == 32);  // payload_len low byte: 4 doubles
}

TEST_CASE("wire decoding names the offending field") {
  RoundMessage msg;
  msg.type = MsgType::Schedule;
  msg.d = 2;
  msg.payload = {0.5, 6e-3};
  std::vector<std::uint8_t> frame = tcp_encode(msg);

  auto expect_error = [](std::vector<std::uint8_t> bad,
                         const std::string& needle) {
    try {
      tcp_decode(bad);
      FAIL_CHECK("expected ProtocolError mentioning " << needle);
    } catch (const ProtocolError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  std::vector<std::uint8_t> magic = frame;
  magic[0] ^= 0xFF;
  expect_error(magic, "magic");

  std::vector<std::uint8_t> version = frame;
  version[4] = 9;
  expect_error(version, "version");

  std::vector<std::uint8_t> type = frame;
  type[5] = 99;
  expect_error(type, "type");

  std::vector<std::uint8_t> crc = frame;
  crc[kWireHeaderBytes + 3] ^= 0x01;  // flip one payload bit
  expect_error(crc, "CRC");

  std::vector<std::uint8_t> short_frame(frame.begin(), frame.begin() + 10);
  expect_error(short_frame, "truncated");

  std::vector<std::uint8_t> odd = frame;
  odd[25] = 33;  // payload length not a multiple of 8
  expect_error(odd, "payload");
}

TEST_CASE("crc32 matches the reference check value") {
  const char* s = "123456789";
  CHECK(crc32(reinterpret_cast<const std::uint8_t*>(s), 9) == 0xCBF43926u);
  CHECK(crc32(nullptr, 0) == 0x00000000u);
}

TEST_CASE("tcp transport reproduces the in-process run") {
  const Scenario sc = tiny_scenario(3, 2, 25, 81);
  FederationConfig cfg = tiny_config(2, Mode::Ds, 82);
  const RunReport inproc = run_dsfcd(sc.datasets, cfg);

  TcpServer server(cfg, 3, "127.0.0.1", 0);
  RunReport tcp_rep;
  std::thread srv([&] { tcp_rep = server.run(); });
  std::vector<std::thread> joiners;
  std::vector<Matrix> finals(2);
  for (int k = 0; k < 2; ++k) {
    joiners.emplace_back([&, k] {
      finals[k] =
          tcp_join(cfg, k, sc.datasets[k], "127.0.0.1", server.port());
    });
  }
  for (auto& t : joiners) t.join();
  srv.join();

  CHECK(tcp_rep.learned == inproc.learned);
  CHECK((tcp_rep.final_u.array() == inproc.final_u.array()).all());
  CHECK(tcp_rep.h_trace == inproc.h_trace);
  CHECK(tcp_rep.score_trace.empty());  // the server never sees data
  CHECK((finals[0].array() == finals[1].array()).all());
}

TEST_CASE("config text parses every section and flags unknown keys") {
  const std::string text = R"(
# demo configuration
[scenario]
d = 6
graph = SF
edge_factor = 3
clients = 4
observations = 120
regime = NONIID
function = MIM
noise_var = 0.9

[federation]
mode = AS
sampled_clients = 2
vote_quorum = 0.6
transport = tcp
host = 10.0.0.1
port = 9000
io_timeout = 12.5

[solver]
rho_init = 0.5
beta = auto
it_max = 7
lr = 0.01
lr_decay = 0.9
threshold = 0.4
reset_adam = false

[experiment]
repetitions = 3
master_seed = 99
output_dir = /tmp/x
scenario_id = demo
standardize = on
)";
  const ExperimentConfig cfg = parse_config_text(text);
  CHECK(cfg.scenario.d == 6);
  CHECK(cfg.scenario.graph == GraphModel::Sf);
  CHECK(cfg.scenario.edge_factor == 3);
  CHECK(cfg.scenario.m == 4);
  CHECK(cfg.scenario.n == 120);
  CHECK(cfg.scenario.regime == Regime::NonIid);
  CHECK(cfg.scenario.function_family == MechanismKind::Mim);
  CHECK(cfg.scenario.iid_noise_var == 0.9);
  CHECK(cfg.fed.mode == Mode::As);
  CHECK(cfg.fed.r == 2);
  CHECK(cfg.fed.vote_quorum == 0.6);
  CHECK(cfg.transport == TransportKind::Tcp);
  CHECK(cfg.host == "10.0.0.1");
  CHECK(cfg.port == 9000);
  CHECK(cfg.io_timeout_seconds == 12.5);
  CHECK(cfg.fed.solver.rho_init == 0.5);
  CHECK(!cfg.rho_auto);
  CHECK(cfg.beta_auto);
  CHECK(cfg.fed.solver.it_max == 7);
  CHECK(cfg.fed.solver.lr == 0.01);
  CHECK(cfg.fed.solver.lr_decay == 0.9);
  CHECK(!cfg.lr_decay_auto);
  CHECK(cfg.fed.solver.threshold == 0.4);
  CHECK(!cfg.fed.solver.reset_adam);
  CHECK(cfg.repetitions == 3);
  CHECK(cfg.master_seed == 99);
  CHECK(cfg.output_dir == "/tmp/x");
  CHECK(cfg.scenario_id == "demo");
  CHECK(cfg.standardize == StandardizeMode::On);

  CHECK_THROWS_AS(parse_config_text("[scenario]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[nonsense]\nd = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[scenario]\nd = banana\n"), ConfigError);
}

TEST_CASE("auto-resolved solver defaults depend on mode and dimension") {
  ExperimentConfig cfg;
  cfg.fed.mode = Mode::Ds;
  resolve_solver_defaults(cfg, 10);
  CHECK(cfg.fed.solver.rho_init == doctest::Approx(6e-3));
  CHECK(cfg.fed.solver.lr_decay == 1.0);

  ExperimentConfig lin;
  lin.fed.mode = Mode::LinearAs;
  resolve_solver_defaults(lin, 10);
  CHECK(lin.fed.solver.lr_decay == 0.5);

  ExperimentConfig as20;
  as20.fed.mode = Mode::As;
  resolve_solver_defaults(as20, 20);
  CHECK(as20.fed.solver.rho_init == doctest::Approx(1e-5));
  CHECK(as20.fed.solver.beta == doctest::Approx(20.0));
}

TEST_CASE("standardize_columns z-scores and centers flat columns") {
  Matrix x(4, 2);
  x << 1, 5, 2, 5, 3, 5, 4, 5;
  const Matrix z = standardize_columns(x);
  CHECK(std::abs(z.col(0).mean()) < 1e-15);
  const double var =
      (z.col(0).array() - z.col(0).mean()).square().sum() / 3.0;
  CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((z.col(1).array() == 0.0).all());  // zero spread: centered only
}

TEST_CASE("csv matrices and edge lists round-trip through files") {
  const fs::path dir = scratch_dir();
  const fs::path mpath = dir / "mat.csv";
  Matrix x(2, 3);
  x << 1.5, -2.25, 3.0000000001, 0.1, 1e-17, -4;
  save_csv_matrix(mpath.string(), x);
  const Matrix back = load_csv_matrix(mpath.string());
  CHECK((back.array() == x.array()).all());  // %.17g is lossless for doubles

  const fs::path epath = dir / "edges.txt";
  BinaryDag b = BinaryDag::Zero(3, 3);
  b(0, 2) = 1;
  b(1, 0) = 1;
  save_edge_list(epath.string(), b);
  CHECK(load_edge_list(epath.string(), 3) == b);

  CHECK_THROWS_AS(load_csv_matrix((dir / "missing.csv").string()),
                  ConfigError);
}

TEST_CASE("metrics rows format with stable precision and summarize") {
  MetricsRow row;
  row.scenario_id = "s";
  row.d = 4;
  row.graph = "ER";
  row.regime = "IID";
  row.mode = "DS";
  row.seed = 7;
  row.shd = 2;
  row.tpr = 1.0 / 3.0;
  row.fdr = 0;
  row.nnz = 5;
  row.outer_iters = 3;
  row.wall_seconds = 0.25;
  const std::string line = format_metrics_row(row);
  CHECK(line ==
        "s,4,ER,IID,DS,7,2,0.33333333333333331,0,5,3,0.25");
  CHECK(metrics_csv_header() ==
        "scenario,d,graph,regime,mode,seed,shd,tpr,fdr,nnz,outer_iters,"
        "wall_seconds");

  MetricsRow other = row;
  other.shd = 4;
  const std::vector<SummaryStat> stats = summarize_metrics({row, other});
  CHECK(stats.front().metric == "shd");
  CHECK(stats.front().mean == 3.0);
  CHECK(stats.front().stddev == doctest::Approx(std::sqrt(2.0)));
  const std::vector<SummaryStat> solo = summarize_metrics({row});
  CHECK(solo.front().stddev == 0.0);
}

TEST_CASE("run_experiment writes reproducible results and summary files") {
  ExperimentConfig cfg;
  cfg.scenario.d = 4;
  cfg.scenario.edge_factor = 1;
  cfg.scenario.m = 2;
  cfg.scenario.n = 25;
  cfg.repetitions = 2;
  cfg.master_seed = 314;
  cfg.fed.solver.it_max = 2;
  cfg.fed.solver.it_in = 30;
  cfg.fed.solver.it_fl = 10;
  cfg.scenario_id = "unit";
  const fs::path dir = scratch_dir() / "exp";
  cfg.output_dir = dir.string();

  int ticks = 0;
  const ExperimentResult res =
      run_experiment(cfg, [&](const MetricsRow&) { ++ticks; });
  CHECK(ticks == 2);
  CHECK(res.rows.size() == 2);
  CHECK(fs::exists(res.results_path));
  CHECK(fs::exists(res.summary_path));
  CHECK(res.rows[0].seed != res.rows[1].seed);
  CHECK(res.rows[0].graph == "ER");
  CHECK(res.rows[0].mode == "DS");

  const ExperimentResult again = run_experiment(cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(again.rows[i].shd == res.rows[i].shd);
    CHECK(again.rows[i].tpr == res.rows[i].tpr);
    CHECK(again.rows[i].seed == res.rows[i].seed);
  }
}

TEST_CASE("external csv data flows through the experiment runner") {
  const fs::path dir = scratch_dir() / "ext";
  fs::create_directories(dir);
  const Scenario sc = tiny_scenario(3, 2, 30, 91);
  std::vector<std::string> paths;
  for (int k = 0; k < 2; ++k) {
    const fs::path p = dir / ("client_" + std::to_string(k) + ".csv");
    save_csv_matrix(p.string(), sc.datasets[k]);
    paths.push_back(p.string());
  }
  const fs::path tpath = dir / "truth.txt";
  save_edge_list(tpath.string(), sc.truth.b_true);

  ExperimentConfig cfg;
  cfg.data_paths = paths;
  cfg.truth_path = tpath.string();
  cfg.scenario.d = 3;
  cfg.repetitions = 1;
  cfg.master_seed = 92;
  cfg.fed.solver.it_max = 2;
  cfg.fed.solver.it_in = 30;
  cfg.fed.solver.it_fl = 10;
  cfg.output_dir = (dir / "out").string();
  CHECK(cfg.standardize_effective());  // auto turns on for external data

  const ExperimentResult res = run_experiment(cfg);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].graph == "EXT");
  CHECK(res.rows[0].regime == "EXT");
  CHECK(res.rows[0].shd >= 0.0);  // truth provided, so metrics are real
}

TEST_CASE("format_double emits shortest-lossless decimal text") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0 / 3.0) == "0.33333333333333331");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}
