#pragma once

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "fedpat/fcm.hpp"
#include "fedpat/fedmsg.hpp"
#include "fedpat/paillier.hpp"

namespace fedpat {

struct FederationConfig {
  std::size_t num_clients = 1;  // P, fixed before round 1
  int rounds = 3;
  int key_bits = 2048;
  std::size_t k = 2;
  double fuzzifier_m = 2.0;
  std::uint64_t seed = 1;
  int fraction_bits = kFractionBits;
  double tolerance = 1e-6;
  int max_iter = 300;
  // Plaintext-sum mode runs the identical protocol without encryption; it
  // exists so tests can show the encrypted path computes the same means.
  bool encrypted = true;
};

// --- key files ---------------------------------------------------------------

inline void save_public_key(const std::string& path,
                            const PaillierPublicKey& pub) {
  nlohmann::json j{{"n", pub.n.get_str()}, {"g", pub.g.get_str()},
                   {"bits", pub.bits}};
  std::ofstream os(path);
  if (!os) throw InputError("cannot write key file: " + path);
  os << j.dump(2) << "\n";
}

inline void save_keypair(const std::string& path, const PaillierKeypair& kp) {
  nlohmann::json j{{"public",
                    {{"n", kp.pub.n.get_str()},
                     {"g", kp.pub.g.get_str()},
                     {"bits", kp.pub.bits}}},
                   {"private",
                    {{"lambda", kp.priv.lambda.get_str()},
                     {"mu", kp.priv.mu.get_str()}}}};
  std::ofstream os(path);
  if (!os) throw InputError("cannot write key file: " + path);
  os << j.dump(2) << "\n";
}

namespace detail {

inline mpz_class mpz_from_json(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw InputError(std::string("key file: missing field '") + field + "'");
  }
  try {
    return mpz_class(j[field].get<std::string>(), 10);
  } catch (const std::invalid_argument&) {
    throw InputError(std::string("key file: field '") + field +
                     "' is not a base-10 integer");
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read file: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw InputError("malformed JSON in " + path);
  return j;
}

}  // namespace detail

inline PaillierPublicKey load_public_key(const std::string& path) {
  nlohmann::json j = detail::load_json_file(path);
  if (j.contains("public")) j = j["public"];  // accept a full keypair file
  PaillierPublicKey pub;
  pub.n = detail::mpz_from_json(j, "n");
  pub.bits = j.value("bits", 0);
  pub.finish();
  return pub;
}

inline PaillierKeypair load_keypair(const std::string& path) {
  nlohmann::json j = detail::load_json_file(path);
  if (!j.contains("public") || !j.contains("private")) {
    throw InputError("key file lacks public/private sections: " + path);
  }
  PaillierKeypair kp;
  kp.pub.n = detail::mpz_from_json(j["public"], "n");
  kp.pub.bits = j["public"].value("bits", 0);
  kp.pub.finish();
  kp.priv.lambda = detail::mpz_from_json(j["private"], "lambda");
  kp.priv.mu = detail::mpz_from_json(j["private"], "mu");
  return kp;
}

// --- aggregator (server) side ------------------------------------------------

struct AggregatorSummary {
  std::size_t clients = 0;
  int rounds_completed = 0;
};

// Holds the public key only. The fold over client updates happens in
// ciphertext space, so this type never needs — and by construction never
// contains — lambda or mu.
class AggregatorSession {
 public:
  AggregatorSession(PaillierPublicKey pub, FederationConfig config)
      : pub_(std::move(pub)), config_(std::move(config)) {}

  AggregatorSummary run(const std::vector<FrameTransport*>& clients) {
    if (clients.size() != config_.num_clients) {
      throw ProtocolError("participant count differs from the configured P");
    }
    const std::size_t p = clients.size();

    // HELLO: every client announces its id, feature dimension, and the P it
    // expects; all must agree before round 1.
    std::vector<std::string> ids(p);
    long long cols = -1;
    for (std::size_t i = 0; i < p; ++i) {
      Message hello = clients[i]->recv();
      expect(hello, "HELLO", 0);
      ids[i] = hello.client_id;
      const long long c = hello.payload.value("cols", -1);
      const long long their_p = hello.payload.value("p", -1);
      if (c <= 0) throw ProtocolError("HELLO lacks a feature dimension");
      if (cols < 0) cols = c;
      if (c != cols) throw ProtocolError("clients disagree on feature width");
      if (their_p != static_cast<long long>(p)) {
        throw ProtocolError("client '" + hello.client_id +
                            "' expects a different P");
      }
    }
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        if (ids[i] == ids[j]) {
          throw ProtocolError("duplicate client id '" + ids[i] + "'");
        }
      }
    }

    // Round-0 broadcast: the shared run parameters every client fits with.
    Message global;
    global.type = "GLOBAL";
    global.round = 0;
    global.payload = {{"seed", config_.seed},
                      {"k", config_.k},
                      {"m", config_.fuzzifier_m},
                      {"rounds", config_.rounds},
                      {"p", p},
                      {"fraction_bits", config_.fraction_bits},
                      {"tolerance", config_.tolerance},
                      {"max_iter", config_.max_iter},
                      {"encrypted", config_.encrypted}};
    for (auto* t : clients) t->send(global);

    AggregatorSummary summary;
    summary.clients = p;
    const std::size_t cells = config_.k * static_cast<std::size_t>(cols);

    for (int round = 1; round <= config_.rounds; ++round) {
      // Barrier: collect every client's update for this round, then fold in
      // client-id order so the result is independent of arrival order.
      std::map<std::string, Message> updates;
      for (auto* t : clients) {
        Message u = t->recv();
        expect(u, "UPDATE", round);
        if (!updates.emplace(u.client_id, std::move(u)).second) {
          throw ProtocolError("duplicate UPDATE in round " +
                              std::to_string(round));
        }
      }

      Message sum;
      sum.type = "SUM";
      sum.round = round;
      if (config_.encrypted) {
        std::vector<Ciphertext> folded;
        for (auto& [id, u] : updates) {
          accumulate_encrypted(u, cells, folded);
        }
        nlohmann::json cipher = nlohmann::json::array();
        for (const auto& c : folded) cipher.push_back(c.value.get_str());
        sum.payload = {{"cipher", std::move(cipher)},
                       {"exponent", folded.empty() ? config_.fraction_bits
                                                   : folded[0].exponent}};
      } else {
        std::vector<double> folded;
        for (auto& [id, u] : updates) {
          accumulate_plain(u, cells, folded);
        }
        sum.payload = {{"plain", folded}};
      }
      for (auto* t : clients) t->send(sum);
      summary.rounds_completed = round;
    }

    for (auto* t : clients) {
      Message bye = t->recv();
      expect(bye, "BYE", config_.rounds);
    }
    Message bye;
    bye.type = "BYE";
    bye.round = config_.rounds;
    for (auto* t : clients) t->send(bye);
    return summary;
  }

 private:
  static void expect(const Message& m, const char* type, int round) {
    if (m.type != type) {
      throw ProtocolError(std::string("expected ") + type + ", got '" +
                          m.type + "'");
    }
    if (m.round != round) {
      throw ProtocolError(std::string(type) + " for round " +
                          std::to_string(m.round) + ", expected " +
                          std::to_string(round));
    }
  }

  void accumulate_encrypted(const Message& u, std::size_t cells,
                            std::vector<Ciphertext>& folded) const {
    if (!u.payload.contains("cipher") || !u.payload["cipher"].is_array() ||
        u.payload["cipher"].size() != cells) {
      throw ProtocolError("UPDATE ciphertext matrix has the wrong shape");
    }
    const int exponent = u.payload.value("exponent", -1);
    if (config_.encrypted && exponent != config_.fraction_bits) {
      throw ProtocolError("UPDATE uses an unexpected fixed-point scale");
    }
    std::vector<Ciphertext> cs;
    cs.reserve(cells);
    for (const auto& s : u.payload["cipher"]) {
      if (!s.is_string()) throw ProtocolError("ciphertext is not a string");
      try {
        cs.push_back(Ciphertext{mpz_class(s.get<std::string>(), 10), exponent});
      } catch (const std::invalid_argument&) {
        throw ProtocolError("ciphertext is not a base-10 integer");
      }
    }
    if (folded.empty()) {
      folded = std::move(cs);
      return;
    }
    for (std::size_t i = 0; i < cells; ++i) {
      folded[i] = he_add(pub_, folded[i], cs[i]);
    }
  }

  static void accumulate_plain(const Message& u, std::size_t cells,
                               std::vector<double>& folded) {
    if (!u.payload.contains("plain") || !u.payload["plain"].is_array() ||
        u.payload["plain"].size() != cells) {
      throw ProtocolError("UPDATE matrix has the wrong shape");
    }
    std::vector<double> xs = u.payload["plain"].get<std::vector<double>>();
    if (folded.empty()) {
      folded = std::move(xs);
      return;
    }
    for (std::size_t i = 0; i < cells; ++i) folded[i] += xs[i];
  }

  PaillierPublicKey pub_;
  FederationConfig config_;
};

// --- client side --------------------------------------------------------------

// Runs the client's half of the protocol: local fits, encrypted updates,
// decrypt-and-divide on each aggregated sum. Returns the final global model.
inline FuzzyModel run_client(const PaillierKeypair& keypair, const Matrix& data,
                             FrameTransport& server,
                             const std::string& client_id,
                             std::size_t expected_p) {
  Message hello;
  hello.type = "HELLO";
  hello.round = 0;
  hello.client_id = client_id;
  hello.payload = {{"cols", data.cols()}, {"p", expected_p}};
  server.send(hello);

  Message global = server.recv();
  if (global.type != "GLOBAL" || global.round != 0) {
    throw ProtocolError("expected the round-0 GLOBAL broadcast");
  }
  const auto seed = global.payload.value("seed", std::uint64_t{0});
  const auto k = global.payload.value("k", std::size_t{0});
  const double m = global.payload.value("m", 0.0);
  const int rounds = global.payload.value("rounds", 0);
  const auto p = global.payload.value("p", std::size_t{0});
  const int fraction_bits = global.payload.value("fraction_bits", kFractionBits);
  const double tolerance = global.payload.value("tolerance", 1e-6);
  const int max_iter = global.payload.value("max_iter", 300);
  const bool encrypted = global.payload.value("encrypted", true);
  if (k < 1 || m <= 1.0 || rounds < 1 || p < 1) {
    throw ProtocolError("GLOBAL broadcast carries invalid run parameters");
  }
  if (p != expected_p) {
    throw ProtocolError("server runs a different participant count");
  }

  Rng nonce_rng(derive_seed(seed, fnv1a64(client_id)));
  Matrix global_centers;
  FuzzyModel model;

  for (int round = 1; round <= rounds; ++round) {
    FcmResult fit =
        (round == 1)
            ? fcm_fit(data, k, m, seed, tolerance, max_iter)
            : fcm_fit_from_centers(data, global_centers, m, tolerance,
                                   max_iter);

    Message update;
    update.type = "UPDATE";
    update.round = round;
    update.client_id = client_id;
    const Matrix& centers = fit.model.centers;
    if (encrypted) {
      nlohmann::json cipher = nlohmann::json::array();
      for (std::size_t i = 0; i < centers.rows(); ++i) {
        for (std::size_t j = 0; j < centers.cols(); ++j) {
          const FixedEncoded fx =
              encode_fixed(keypair.pub, centers(i, j), fraction_bits);
          const Ciphertext c =
              encrypt(keypair.pub, fx.mantissa, nonce_rng, fx.exponent);
          cipher.push_back(c.value.get_str());
        }
      }
      update.payload = {{"cipher", std::move(cipher)},
                        {"exponent", fraction_bits},
                        {"shape", {centers.rows(), centers.cols()}}};
    } else {
      update.payload = {{"plain", centers.data()},
                        {"shape", {centers.rows(), centers.cols()}}};
    }
    server.send(update);

    Message sum = server.recv();
    if (sum.type != "SUM" || sum.round != round) {
      throw ProtocolError("expected SUM for round " + std::to_string(round));
    }
    global_centers = Matrix(k, data.cols());
    if (encrypted) {
      if (!sum.payload.contains("cipher") ||
          sum.payload["cipher"].size() != k * data.cols()) {
        throw ProtocolError("SUM shape mismatch");
      }
      const int exponent = sum.payload.value("exponent", fraction_bits);
      std::size_t idx = 0;
      for (const auto& s : sum.payload["cipher"]) {
        if (!s.is_string()) {
          throw ProtocolError("SUM ciphertext is not a string");
        }
        mpz_class value;
        try {
          value = mpz_class(s.get<std::string>(), 10);
        } catch (const std::invalid_argument&) {
          throw ProtocolError("SUM ciphertext is not a base-10 integer");
        }
        Ciphertext c{std::move(value), exponent};
        const mpz_class mantissa = decrypt(keypair, c);
        const double total = decode_fixed(keypair.pub, mantissa, exponent);
        global_centers.data()[idx++] = total / static_cast<double>(p);
      }
    } else {
      if (!sum.payload.contains("plain") ||
          sum.payload["plain"].size() != k * data.cols()) {
        throw ProtocolError("SUM shape mismatch");
      }
      std::size_t idx = 0;
      for (const auto& v : sum.payload["plain"]) {
        global_centers.data()[idx++] =
            v.get<double>() / static_cast<double>(p);
      }
    }
    model = fit.model;
  }

  Message bye;
  bye.type = "BYE";
  bye.round = rounds;
  bye.client_id = client_id;
  server.send(bye);
  Message reply = server.recv();
  if (reply.type != "BYE") throw ProtocolError("expected closing BYE");

  model.centers = std::move(global_centers);
  model.seed = seed;
  return model;
}

// --- in-process federation -----------------------------------------------------

// Spawns the aggregator and P clients on in-memory channels (same codec as
// TCP) and returns the final global model. A fresh keypair derives from the
// config seed unless one is supplied.
inline FuzzyModel run_federation(const FederationConfig& config,
                                 const std::vector<Matrix>& client_data,
                                 const PaillierKeypair* keypair = nullptr,
                                 std::ostream* warnings = nullptr) {
  if (client_data.empty() || client_data.size() != config.num_clients) {
    throw InputError("run_federation: data for exactly P clients required");
  }
  for (const auto& d : client_data) {
    if (d.cols() != client_data[0].cols()) {
      throw InputError("run_federation: clients disagree on feature width");
    }
    if (d.rows() < config.k) {
      throw InputError("run_federation: a client has fewer rows than k");
    }
  }
  PaillierKeypair generated;
  if (!keypair) {
    generated = keygen(config.key_bits,
                       derive_seed(config.seed, 0x6665646b6579ull), warnings);
    keypair = &generated;
  }

  const std::size_t p = config.num_clients;
  std::vector<std::unique_ptr<FrameTransport>> server_ends, client_ends;
  for (std::size_t i = 0; i < p; ++i) {
    auto [server_end, client_end] = make_duplex_pair();
    server_ends.push_back(std::move(server_end));
    client_ends.push_back(std::move(client_end));
  }

  std::vector<FuzzyModel> models(p);
  std::vector<std::exception_ptr> errors(p + 1);
  std::vector<std::thread> threads;
  threads.emplace_back([&] {
    try {
      std::vector<FrameTransport*> raw;
      for (auto& t : server_ends) raw.push_back(t.get());
      AggregatorSession(keypair->pub, config).run(raw);
    } catch (...) {
      errors[p] = std::current_exception();
      for (auto& t : server_ends) t->close();
    }
  });
  for (std::size_t i = 0; i < p; ++i) {
    threads.emplace_back([&, i] {
      try {
        char id[16];
        std::snprintf(id, sizeof(id), "client%04zu", i);
        models[i] = run_client(*keypair, client_data[i], *client_ends[i], id,
                               p);
      } catch (...) {
        errors[i] = std::current_exception();
        client_ends[i]->close();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return models[0];
}

// Federated cluster-count selection: run the whole protocol per candidate k
// and apply the same largest-drop rule as the local sweep. Candidates span
// 2..floor(sqrt(smallest client row count)).
inline KSelection federated_select_k(const FederationConfig& config,
                                     const std::vector<Matrix>& client_data,
                                     const PaillierKeypair* keypair = nullptr,
                                     std::ostream* warnings = nullptr) {
  if (client_data.empty()) {
    throw InputError("federated_select_k: no client data");
  }
  std::size_t n_min = client_data[0].rows();
  for (const auto& d : client_data) n_min = std::min(n_min, d.rows());
  const auto k_max = static_cast<std::size_t>(
      std::floor(std::sqrt(static_cast<double>(n_min))));
  if (n_min < 9 || k_max < 3) {
    throw InputError("federated_select_k: smallest client needs >= 9 rows");
  }
  PaillierKeypair generated;
  if (!keypair) {
    generated = keygen(config.key_bits,
                       derive_seed(config.seed, 0x6665646b6579ull), warnings);
    keypair = &generated;
  }
  KSelection sel;
  sel.mcd_curve.resize(k_max - 1);
  for (std::size_t k = 2; k <= k_max; ++k) {
    FederationConfig cfg = config;
    cfg.k = k;
    cfg.seed = derive_seed(config.seed, k);
    const FuzzyModel model = run_federation(cfg, client_data, keypair);
    sel.mcd_curve[k - 2] = mcd(model.centers);
  }
  sel.k_star = largest_drop_k(sel.mcd_curve, 2);
  return sel;
}

}  // namespace fedpat
