#include "peg/secure.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace peg::secure {

namespace {

void check_prime(std::uint64_t p) {
  if (p < 3 || p >= (1ull << 62))
    throw BoundViolation("field prime must lie in [3, 2^62)");
}

std::array<std::uint8_t, 32> sha256_bytes(const std::string& data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size())
    throw SubproblemFailure("digest computation failed");
  return out;
}

std::string to_hex(const std::array<std::uint8_t, 32>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::string canonical_vector(const Eigen::VectorXd& v) {
  std::string out;
  char buf[64];
  for (int i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v(i));
    if (i) out.push_back(';');
    out += buf;
  }
  return out;
}

std::string encode_report(const auction::DemandReport& report) {
  std::string out = "user " + std::to_string(report.user) + "\n";
  char buf[200];
  for (int t = 0; t < report.x.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", report.x_min(t),
                  report.x(t), report.x_max(t));
    out += buf;
  }
  return out;
}

bool same_payload(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return false;
  return true;
}

}  // namespace

std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  const unsigned __int128 s =
      static_cast<unsigned __int128>(a) + static_cast<unsigned __int128>(b);
  return static_cast<std::uint64_t>(s % p);
}

std::uint64_t sub_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  return a >= b ? a - b : a + (p - b);
}

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  return static_cast<std::uint64_t>(prod % p);
}

FieldElement make_element(std::uint64_t value, std::uint64_t prime) {
  check_prime(prime);
  return {value % prime, prime};
}

SharedValue share(const FieldElement& a, int parties, std::uint64_t alpha_key,
                  std::mt19937_64& rng) {
  check_prime(a.prime);
  if (parties < 1) throw BoundViolation("need at least one party");
  if (a.value >= a.prime) throw BoundViolation("value outside the field");
  const std::uint64_t p = a.prime;
  std::uniform_int_distribution<std::uint64_t> uniform(0, p - 1);

  SharedValue sv;
  sv.prime = p;
  sv.delta = 0;
  sv.shares.resize(parties);
  sv.mac_shares.resize(parties);
  std::uint64_t running = 0;
  for (int i = 0; i + 1 < parties; ++i) {
    sv.shares[i] = uniform(rng);
    running = add_mod(running, sv.shares[i], p);
  }
  sv.shares[parties - 1] = sub_mod(a.value, running, p);

  const std::uint64_t mac_total =
      mul_mod(alpha_key % p, add_mod(a.value, sv.delta, p), p);
  running = 0;
  for (int i = 0; i + 1 < parties; ++i) {
    sv.mac_shares[i] = uniform(rng);
    running = add_mod(running, sv.mac_shares[i], p);
  }
  sv.mac_shares[parties - 1] = sub_mod(mac_total, running, p);
  return sv;
}

FieldElement reconstruct(const SharedValue& sv) {
  check_prime(sv.prime);
  if (sv.shares.empty()) throw DimensionMismatch("no shares present");
  std::uint64_t total = 0;
  for (auto s : sv.shares) total = add_mod(total, s, sv.prime);
  return {total, sv.prime};
}

bool mac_check(const SharedValue& sv, std::uint64_t alpha_key,
               const FieldElement& opened) {
  if (opened.prime != sv.prime)
    throw DimensionMismatch("field prime mismatch");
  std::uint64_t total = 0;
  for (auto s : sv.mac_shares) total = add_mod(total, s, sv.prime);
  const std::uint64_t expected = mul_mod(
      alpha_key % sv.prime, add_mod(opened.value, sv.delta, sv.prime),
      sv.prime);
  return total == expected;
}

bool verify_conversion(const FieldElement& a, const SharedValue& sv,
                       std::uint64_t alpha_key) {
  if (a.prime != sv.prime) throw DimensionMismatch("field prime mismatch");
  return reconstruct(sv).value == a.value && mac_check(sv, alpha_key, a);
}

Commitment commit(const std::string& value,
                  const std::array<std::uint8_t, 32>& randomness) {
  std::string material = "commit-v1\x1f";
  material.append(reinterpret_cast<const char*>(randomness.data()),
                  randomness.size());
  material.push_back('\x1f');
  material += value;
  return {sha256_bytes(material)};
}

std::pair<Commitment, Opening> commit_random(const std::string& value,
                                             std::mt19937_64& rng) {
  Opening opening;
  opening.value = value;
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& b : opening.randomness)
    b = static_cast<std::uint8_t>(byte(rng));
  return {commit(value, opening.randomness), opening};
}

bool verify(const Commitment& commitment, const Opening& opening) {
  return commit(opening.value, opening.randomness).digest == commitment.digest;
}

std::string sha256_hex(const std::string& data) {
  return to_hex(sha256_bytes(data));
}

void save_transcript(const Transcript& transcript, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open transcript for writing");
  char buf[64];
  for (const auto& rec : transcript.records) {
    file << rec.round << " " << rec.sender << " " << rec.digest << " "
         << rec.payload.size();
    for (int i = 0; i < rec.payload.size(); ++i) {
      std::snprintf(buf, sizeof(buf), " %.17g", rec.payload(i));
      file << buf;
    }
    file << "\n";
  }
}

Transcript load_transcript(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw SchemaMismatch("cannot open transcript: " + path);
  Transcript out;
  TranscriptRecord rec;
  int count = 0;
  while (file >> rec.round >> rec.sender >> rec.digest >> count) {
    if (count < 0) throw SchemaMismatch("malformed transcript record");
    rec.payload.resize(count);
    for (int i = 0; i < count; ++i)
      if (!(file >> rec.payload(i)))
        throw SchemaMismatch("truncated transcript record");
    if (rec.digest != sha256_hex(canonical_vector(rec.payload)))
      throw SchemaMismatch("transcript digest mismatch");
    out.records.push_back(rec);
  }
  return out;
}

std::vector<Deviation> verify_transcript(
    const Transcript& transcript,
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints,
    const consensus::NetworkModel& net, double q, double sigma) {
  const int users = static_cast<int>(reports.size());
  const int slots = static_cast<int>(constraints.y_lo.size());
  std::map<std::pair<int, int>, const TranscriptRecord*> index;
  int last_round = 0;
  for (const auto& rec : transcript.records) {
    if (!index.emplace(std::make_pair(rec.round, rec.sender), &rec).second)
      throw SchemaMismatch("duplicate transcript record");
    if (rec.payload.size() != slots)
      throw SchemaMismatch("transcript payload has wrong slot count");
    last_round = std::max(last_round, rec.round);
  }
  const auto record_at = [&](int round, int sender) {
    const auto it = index.find({round, sender});
    if (it == index.end())
      throw SchemaMismatch("transcript missing an expected record");
    return it->second;
  };

  std::vector<consensus::ActiveSets> schedule(last_round + 1);
  for (int k = 1; k <= last_round; ++k)
    schedule[k] = sample_active_sets(net, k);

  std::vector<Deviation> deviations;

  {  // manager re-execution from the user messages it received
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(slots);
    Eigen::MatrixXd t_memory = Eigen::MatrixXd::Zero(users, slots);
    for (int k = 1; k <= last_round; ++k) {
      const Eigen::VectorXd t_sum = t_memory.colwise().sum().transpose();
      Eigen::VectorXd y(slots);
      for (int t = 0; t < slots; ++t) {
        const double quad = valuations.cost[t].k2 + 1.0 / (4 * q * users);
        const double lin = (mu(t) - 2 * q * t_sum(t)) / (2 * q * users);
        y(t) = std::clamp(-lin / (2 * quad), constraints.y_lo(t),
                          constraints.y_hi(t));
      }
      const Eigen::VectorXd expected =
          (-y - mu) / (2 * q * users) + t_sum / users;
      const TranscriptRecord* rec = record_at(k, -1);
      if (!same_payload(rec->payload, expected))
        deviations.push_back({-1, k});
      const Eigen::VectorXd lambda = rec->payload;  // what was actually sent
      for (int i = 0; i < users; ++i) {
        if (!schedule[k].edges[i]) continue;
        const Eigen::VectorXd wire = record_at(k, i)->payload;
        mu += q * (lambda - wire);
        t_memory.row(i) = 0.5 * (wire + lambda).transpose();
      }
    }
  }

  for (int i = 0; i < users; ++i) {  // each user from the manager broadcasts
    Eigen::VectorXd mu_i = Eigen::VectorXd::Zero(slots);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(slots);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(slots);
    Eigen::VectorXd lambda_i = Eigen::VectorXd::Zero(slots);
    Eigen::VectorXd t_memory = Eigen::VectorXd::Zero(slots);
    for (int k = 1; k <= last_round; ++k) {
      if (schedule[k].users[i]) {
        for (int t = 0; t < slots; ++t) {
          const auto [xv, rv] = consensus::proximal_allocation(
              mu_i(t), t_memory(t), reports[i].x_min(t), reports[i].x_max(t),
              z(t), sigma, valuations.user_slot[i][t].b,
              valuations.user_slot[i][t].c, q);
          x(t) = xv;
          z(t) += (xv + rv - reports[i].x_max(t)) / sigma;
        }
        lambda_i = (x - mu_i) / (2 * q) + t_memory;
      }
      if (schedule[k].edges[i]) {
        const TranscriptRecord* rec = record_at(k, i);
        if (!same_payload(rec->payload, lambda_i))
          deviations.push_back({i, k});
        const Eigen::VectorXd manager_lambda = record_at(k, -1)->payload;
        mu_i += q * (lambda_i - manager_lambda);
        t_memory = 0.5 * (lambda_i + manager_lambda);
      }
    }
  }

  std::sort(deviations.begin(), deviations.end(),
            [](const Deviation& a, const Deviation& b) {
              return a.round != b.round ? a.round < b.round : a.node < b.node;
            });
  return deviations;
}

CommittedRunResult committed_protocol_run(
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints,
    const consensus::NetworkModel& net, const CommittedRunOptions& options) {
  auction::validate_instance(reports, valuations, constraints);
  const int users = static_cast<int>(reports.size());

  CommittedRunResult out;
  auto commit_rng = substream(options.seed, "input-commitments");
  std::vector<Opening> openings;
  openings.reserve(users);
  for (const auto& report : reports) {
    auto [commitment, opening] = commit_random(encode_report(report),
                                               commit_rng);
    out.input_commitments.push_back(commitment);
    openings.push_back(std::move(opening));
  }

  auto share_rng = substream(options.seed, "input-shares");
  constexpr double kFixedPoint = 1048576.0;  // 2^20
  out.report.shares_ok = true;
  for (const auto& report : reports) {
    for (int t = 0; t < report.x.size(); ++t) {
      for (double v : {report.x_min(t), report.x(t), report.x_max(t)}) {
        const FieldElement element = make_element(
            static_cast<std::uint64_t>(std::llround(v * kFixedPoint)),
            options.prime);
        const SharedValue sv =
            share(element, users, options.alpha_key, share_rng);
        if (!verify_conversion(element, sv, options.alpha_key))
          out.report.shares_ok = false;
      }
    }
  }

  std::vector<auction::DemandReport> consumed = reports;
  if (options.swap_input_user >= 0) {
    auto& victim = consumed.at(options.swap_input_user);
    for (int t = 0; t < victim.x.size(); ++t)
      victim.x(t) = victim.x(t) == victim.x_min(t) ? victim.x_max(t)
                                                   : victim.x_min(t);
  }

  consensus::ConsensusHooks hooks;
  hooks.faults = options.faults;
  hooks.recorder = [&out](int round, int sender, const Eigen::VectorXd& msg) {
    out.transcript.records.push_back(
        {round, sender, sha256_hex(canonical_vector(msg)), msg});
  };

  const consensus::ProtocolResult protocol = consensus::run_protocol_one(
      consumed, valuations, constraints, net, options.q, options.sigma,
      options.eps1, options.eps2, options.max_iterations, hooks);
  out.outcome = protocol.outcome;
  out.diagnostics = protocol.diagnostics;

  for (int i = 0; i < users; ++i) {
    const Opening consumed_opening{encode_report(consumed[i]),
                                   openings[i].randomness};
    if (!verify(out.input_commitments[i], consumed_opening)) {
      out.report.commitments_ok = false;
      throw CommitmentMismatch("user " + std::to_string(i) +
                               " ran on an input differing from its "
                               "commitment");
    }
  }

  out.report.deviations = verify_transcript(
      out.transcript, consumed, valuations, constraints, net, options.q,
      options.sigma);
  return out;
}

void save_report_csv(const VerificationReport& report,
                     const std::string& path) {
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open report for writing");
  file << "kind,node,round,ok\n";
  file << "commitments,-1,-1," << (report.commitments_ok ? 1 : 0) << "\n";
  file << "shares,-1,-1," << (report.shares_ok ? 1 : 0) << "\n";
  for (const auto& d : report.deviations)
    file << "deviation," << d.node << "," << d.round << ",0\n";
}

}  // namespace peg::secure
