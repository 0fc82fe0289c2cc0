#include "fedpat/federation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

#include "support/testutil.hpp"

namespace {

using fedpat::FederationConfig;
using fedpat::Matrix;
using fedpat::Message;

// --- structural guarantee: the aggregator cannot hold the private key --------

// The session type accepts only the public half; a full keypair does not
// convert, and no private-key member is reachable on the type.
static_assert(std::is_constructible_v<fedpat::AggregatorSession,
                                      fedpat::PaillierPublicKey,
                                      FederationConfig>);
static_assert(!std::is_constructible_v<fedpat::AggregatorSession,
                                       fedpat::PaillierKeypair,
                                       FederationConfig>);

template <typename T>
concept ExposesPrivateKey = requires(T t) { t.priv; } ||
                            requires(T t) { t.lambda; } ||
                            requires(T t) { t.mu; };

static_assert(ExposesPrivateKey<fedpat::PaillierKeypair>);    // sanity check
static_assert(ExposesPrivateKey<fedpat::PaillierPrivateKey>);
static_assert(!ExposesPrivateKey<fedpat::PaillierPublicKey>);
static_assert(!ExposesPrivateKey<fedpat::AggregatorSession>);

fedpat::PaillierKeypair test_key(int bits = 128, std::uint64_t seed = 99) {
  return fedpat::keygen(bits, seed);
}

std::vector<Matrix> round_robin_shards(const Matrix& data, std::size_t p) {
  std::vector<std::vector<std::vector<double>>> parts(p);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    parts[i % p].emplace_back(data.row(i).begin(), data.row(i).end());
  }
  std::vector<Matrix> shards;
  for (auto& rows : parts) shards.push_back(Matrix::from_rows(rows));
  return shards;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

// --- key files ----------------------------------------------------------------

TEST(KeyFiles, KeypairRoundtrip) {
  testutil::ScopedTempDir td;
  const auto kp = test_key();
  fedpat::save_keypair(td.file("kp.json"), kp);
  const auto back = fedpat::load_keypair(td.file("kp.json"));
  EXPECT_EQ(back.pub.n, kp.pub.n);
  EXPECT_EQ(back.pub.g, kp.pub.g);
  EXPECT_EQ(back.pub.bits, kp.pub.bits);
  EXPECT_EQ(back.pub.n2, kp.pub.n2);
  EXPECT_EQ(back.priv.lambda, kp.priv.lambda);
  EXPECT_EQ(back.priv.mu, kp.priv.mu);
}

TEST(KeyFiles, PublicKeyRoundtripAndKeypairFileAccepted) {
  testutil::ScopedTempDir td;
  const auto kp = test_key();
  fedpat::save_public_key(td.file("pub.json"), kp.pub);
  const auto pub = fedpat::load_public_key(td.file("pub.json"));
  EXPECT_EQ(pub.n, kp.pub.n);
  EXPECT_EQ(pub.g, kp.pub.g);
  // A full keypair file also serves as a public-key source.
  fedpat::save_keypair(td.file("kp.json"), kp);
  const auto pub2 = fedpat::load_public_key(td.file("kp.json"));
  EXPECT_EQ(pub2.n, kp.pub.n);
  // The public-key file must never contain private material.
  const std::string text = testutil::read_file(td.file("pub.json"));
  EXPECT_EQ(text.find("lambda"), std::string::npos);
  EXPECT_EQ(text.find("mu"), std::string::npos);
  EXPECT_EQ(text.find("private"), std::string::npos);
}

TEST(KeyFiles, MalformedFilesRejected) {
  testutil::ScopedTempDir td;
  EXPECT_THROW(fedpat::load_public_key(td.file("absent.json")),
               fedpat::InputError);
  testutil::write_file(td.file("bad.json"), "{not json");
  EXPECT_THROW(fedpat::load_public_key(td.file("bad.json")),
               fedpat::InputError);
  testutil::write_file(td.file("nofield.json"), R"({"g":"3","bits":128})");
  EXPECT_THROW(fedpat::load_public_key(td.file("nofield.json")),
               fedpat::InputError);
  testutil::write_file(td.file("notint.json"), R"({"n":"xyz"})");
  EXPECT_THROW(fedpat::load_public_key(td.file("notint.json")),
               fedpat::InputError);
  testutil::write_file(td.file("pubonly.json"), R"({"public":{"n":"35"}})");
  EXPECT_THROW(fedpat::load_keypair(td.file("pubonly.json")),
               fedpat::InputError);
}

// --- in-process federation ------------------------------------------------------

TEST(RunFederation, SingleClientSingleRoundReproducesLocalFit) {
  // With P = 1 and one plaintext round the protocol result IS the local fit.
  const Matrix data = testutil::make_blobs(60, 3, 2, 10.0, 0.4, 5);
  FederationConfig cfg;
  cfg.num_clients = 1;
  cfg.rounds = 1;
  cfg.k = 3;
  cfg.fuzzifier_m = 2.0;
  cfg.seed = 314;
  cfg.encrypted = false;
  cfg.key_bits = 128;
  const auto model = fedpat::run_federation(cfg, {data});
  const auto local = fedpat::fcm_fit(data, 3, 2.0, 314);
  EXPECT_EQ(model.centers.data(), local.model.centers.data());
}

TEST(RunFederation, EncryptedMatchesPlaintextAcrossClientCounts) {
  const Matrix data = testutil::make_blobs(120, 3, 2, 10.0, 0.4, 41);
  const auto kp = test_key(128, 7);
  const double tol = std::ldexp(1.0, -40);
  for (std::size_t p : {1u, 2u, 3u, 5u}) {
    FederationConfig cfg;
    cfg.num_clients = p;
    cfg.rounds = 3;
    cfg.k = 3;
    cfg.fuzzifier_m = 2.0;
    cfg.seed = 2024;
    cfg.key_bits = 128;
    const auto shards = round_robin_shards(data, p);

    cfg.encrypted = true;
    const auto enc = fedpat::run_federation(cfg, shards, &kp);
    cfg.encrypted = false;
    const auto plain = fedpat::run_federation(cfg, shards, &kp);

    EXPECT_LT(max_abs_diff(enc.centers, plain.centers), tol) << "P=" << p;
  }
}

TEST(RunFederation, ResultIndependentOfShardAssignment) {
  // The fold is keyed by client id and ciphertext sums are exact integers,
  // so which client holds which shard cannot change the global model.
  const Matrix data = testutil::make_blobs(80, 2, 2, 9.0, 0.5, 13);
  const auto kp = test_key(128, 8);
  const auto shards = round_robin_shards(data, 2);
  FederationConfig cfg;
  cfg.num_clients = 2;
  cfg.rounds = 2;
  cfg.k = 2;
  cfg.seed = 99;
  cfg.key_bits = 128;
  const auto ab = fedpat::run_federation(cfg, {shards[0], shards[1]}, &kp);
  const auto ba = fedpat::run_federation(cfg, {shards[1], shards[0]}, &kp);
  EXPECT_EQ(ab.centers.data(), ba.centers.data());
}

TEST(RunFederation, DeterministicForSeedWithGeneratedKey) {
  const Matrix data = testutil::make_blobs(40, 2, 2, 8.0, 0.4, 3);
  FederationConfig cfg;
  cfg.num_clients = 2;
  cfg.rounds = 2;
  cfg.k = 2;
  cfg.seed = 555;
  cfg.key_bits = 128;
  const auto shards = round_robin_shards(data, 2);
  const auto a = fedpat::run_federation(cfg, shards);
  const auto b = fedpat::run_federation(cfg, shards);
  EXPECT_EQ(a.centers.data(), b.centers.data());
}

TEST(RunFederation, RecoversPlantedCenters) {
  // Three clients, all observing the same three population clusters: the
  // averaged model must land near the true centers.
  std::vector<Matrix> shards;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    shards.push_back(testutil::make_blobs(60, 3, 2, 12.0, 0.3, s));
  }
  FederationConfig cfg;
  cfg.num_clients = 3;
  cfg.rounds = 3;
  cfg.k = 3;
  cfg.seed = 7;
  cfg.key_bits = 128;
  const auto model = fedpat::run_federation(cfg, shards);
  // True centers: make_blobs places k=3 on a triangle with side 12, i.e.
  // circumradius R = 12/sqrt(3) at angles 0, 120, 240 degrees.
  const double r = 12.0 / std::sqrt(3.0);
  std::vector<std::vector<double>> expected = {
      {r, 0.0}, {-0.5 * r, r * std::sqrt(3.0) / 2.0},
      {-0.5 * r, -r * std::sqrt(3.0) / 2.0}};
  for (const auto& want : expected) {
    double best = 1e18;
    for (std::size_t c = 0; c < model.centers.rows(); ++c) {
      const double d = std::hypot(model.centers(c, 0) - want[0],
                                  model.centers(c, 1) - want[1]);
      best = std::min(best, d);
    }
    EXPECT_LT(best, 1.0) << "no center near (" << want[0] << "," << want[1]
                         << ")";
  }
}

TEST(RunFederation, ValidatesClientData) {
  FederationConfig cfg;
  cfg.num_clients = 2;
  cfg.key_bits = 128;
  cfg.k = 2;
  const Matrix a = Matrix::from_rows({{0, 0}, {1, 1}, {2, 2}});
  const Matrix b2 = Matrix::from_rows({{0, 0, 0}, {1, 1, 1}});
  EXPECT_THROW(fedpat::run_federation(cfg, {}), fedpat::InputError);
  EXPECT_THROW(fedpat::run_federation(cfg, {a}), fedpat::InputError);
  EXPECT_THROW(fedpat::run_federation(cfg, {a, b2}), fedpat::InputError);
  const Matrix tiny = Matrix::from_rows({{5.0, 5.0}});
  EXPECT_THROW(fedpat::run_federation(cfg, {a, tiny}), fedpat::InputError);
}

// --- protocol error handling ----------------------------------------------------

// Runs an aggregator over the given server-side transports and returns the
// exception it ended with (null if it finished cleanly).
std::exception_ptr run_aggregator(fedpat::PaillierPublicKey pub,
                                  FederationConfig cfg,
                                  std::vector<fedpat::FrameTransport*> ends) {
  std::exception_ptr err;
  std::thread t([&] {
    try {
      fedpat::AggregatorSession(std::move(pub), cfg).run(ends);
    } catch (...) {
      err = std::current_exception();
    }
    for (auto* e : ends) e->close();
  });
  t.join();
  return err;
}

std::string protocol_error_text(std::exception_ptr err) {
  if (!err) return "";
  try {
    std::rethrow_exception(err);
  } catch (const fedpat::ProtocolError& e) {
    return e.what();
  } catch (...) {
    return "(wrong exception type)";
  }
}

TEST(Aggregator, RejectsParticipantCountMismatch) {
  auto [srv, cli] = fedpat::make_duplex_pair();
  FederationConfig cfg;
  cfg.num_clients = 3;
  fedpat::AggregatorSession session(test_key().pub, cfg);
  EXPECT_THROW(session.run({srv.get()}), fedpat::ProtocolError);
}

TEST(Aggregator, RejectsWrongExpectedP) {
  auto [srv, cli] = fedpat::make_duplex_pair();
  FederationConfig cfg;
  cfg.num_clients = 1;
  Message hello;
  hello.type = "HELLO";
  hello.client_id = "c1";
  hello.payload = {{"cols", 2}, {"p", 5}};
  cli->send(hello);
  const auto err = run_aggregator(test_key().pub, cfg, {srv.get()});
  EXPECT_EQ(protocol_error_text(err), "client 'c1' expects a different P");
}

TEST(Aggregator, RejectsDuplicateClientIds) {
  auto [srv1, cli1] = fedpat::make_duplex_pair();
  auto [srv2, cli2] = fedpat::make_duplex_pair();
  FederationConfig cfg;
  cfg.num_clients = 2;
  for (auto* cli : {cli1.get(), cli2.get()}) {
    Message hello;
    hello.type = "HELLO";
    hello.client_id = "dup";
    hello.payload = {{"cols", 2}, {"p", 2}};
    cli->send(hello);
  }
  const auto err =
      run_aggregator(test_key().pub, cfg, {srv1.get(), srv2.get()});
  EXPECT_EQ(protocol_error_text(err), "duplicate client id 'dup'");
}

TEST(Aggregator, RejectsMismatchedFeatureWidths) {
  auto [srv1, cli1] = fedpat::make_duplex_pair();
  auto [srv2, cli2] = fedpat::make_duplex_pair();
  FederationConfig cfg;
  cfg.num_clients = 2;
  Message h1;
  h1.type = "HELLO";
  h1.client_id = "a";
  h1.payload = {{"cols", 2}, {"p", 2}};
  cli1->send(h1);
  Message h2;
  h2.type = "HELLO";
  h2.client_id = "b";
  h2.payload = {{"cols", 3}, {"p", 2}};
  cli2->send(h2);
  const auto err =
      run_aggregator(test_key().pub, cfg, {srv1.get(), srv2.get()});
  EXPECT_EQ(protocol_error_text(err), "clients disagree on feature width");
}

TEST(Aggregator, RejectsUpdateAtWrongScale) {
  auto [srv, cli] = fedpat::make_duplex_pair();
  FederationConfig cfg;
  cfg.num_clients = 1;
  cfg.k = 2;
  cfg.fraction_bits = 48;
  std::exception_ptr err;
  std::thread t([&] {
    try {
      std::vector<fedpat::FrameTransport*> ends = {srv.get()};
      fedpat::AggregatorSession(test_key().pub, cfg).run(ends);
    } catch (...) {
      err = std::current_exception();
    }
    srv->close();
  });
  Message hello;
  hello.type = "HELLO";
  hello.client_id = "c1";
  hello.payload = {{"cols", 2}, {"p", 1}};
  cli->send(hello);
  EXPECT_EQ(cli->recv().type, "GLOBAL");
  Message update;
  update.type = "UPDATE";
  update.round = 1;
  update.client_id = "c1";
  update.payload = {{"cipher", {"1", "1", "1", "1"}}, {"exponent", 47}};
  cli->send(update);
  t.join();
  EXPECT_EQ(protocol_error_text(err),
            "UPDATE uses an unexpected fixed-point scale");
}

TEST(Client, RejectsServerWithDifferentP) {
  auto [srv, cli] = fedpat::make_duplex_pair();
  const auto kp = test_key();
  const Matrix data = Matrix::from_rows({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  std::exception_ptr err;
  std::thread t([&] {
    try {
      fedpat::run_client(kp, data, *cli, "c1", 2);
    } catch (...) {
      err = std::current_exception();
    }
    cli->close();
  });
  EXPECT_EQ(srv->recv().type, "HELLO");
  Message global;
  global.type = "GLOBAL";
  global.round = 0;
  global.payload = {{"seed", 1},     {"k", 2},      {"m", 2.0},
                    {"rounds", 3},   {"p", 3},      {"fraction_bits", 48},
                    {"tolerance", 1e-6}, {"max_iter", 300}, {"encrypted", true}};
  srv->send(global);
  t.join();
  EXPECT_EQ(protocol_error_text(err),
            "server runs a different participant count");
}

// --- federated cluster-count selection -------------------------------------------

TEST(FederatedSelectK, FindsPlantedKAcrossClients) {
  std::vector<Matrix> shards;
  for (std::uint64_t s = 21; s <= 23; ++s) {
    shards.push_back(testutil::make_blobs(60, 3, 2, 12.0, 0.4, s));
  }
  FederationConfig cfg;
  cfg.num_clients = 3;
  cfg.rounds = 2;
  cfg.seed = 77;
  cfg.key_bits = 128;
  cfg.fuzzifier_m = 2.0;
  const auto kp = test_key(128, 31);
  const auto sel = fedpat::federated_select_k(cfg, shards, &kp);
  EXPECT_EQ(sel.k_star, 3u);
  // Smallest client has 60 rows -> sweep 2..7 -> 6 curve entries.
  EXPECT_EQ(sel.mcd_curve.size(), 6u);
}

TEST(FederatedSelectK, RequiresEnoughRows) {
  FederationConfig cfg;
  cfg.num_clients = 2;
  cfg.key_bits = 128;
  const Matrix big = testutil::make_blobs(30, 2, 2, 8.0, 0.4, 1);
  const Matrix small = testutil::make_blobs(8, 2, 2, 8.0, 0.4, 2);
  EXPECT_THROW(fedpat::federated_select_k(cfg, {}), fedpat::InputError);
  EXPECT_THROW(fedpat::federated_select_k(cfg, {big, small}),
               fedpat::InputError);
}

}  // namespace
