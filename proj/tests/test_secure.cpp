#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "peg/common.hpp"
#include "peg/consensus.hpp"
#include "peg/secure.hpp"

using namespace peg;
using namespace peg::secure;

namespace {

struct Instance {
  std::vector<auction::DemandReport> reports;
  auction::ValuationModel valuations;
  auction::AuctionConstraints constraints;
};

Instance protocol_instance(std::uint64_t seed, int users, int slots) {
  std::mt19937_64 rng = substream(seed, "secure-instance");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance inst;
  inst.reports.resize(users);
  inst.valuations.user_slot.resize(users);
  inst.constraints.y_lo = Eigen::VectorXd::Zero(slots);
  inst.constraints.y_hi = Eigen::VectorXd::Zero(slots);
  Eigen::VectorXd cap_sum = Eigen::VectorXd::Zero(slots);
  for (int i = 0; i < users; ++i) {
    auto& r = inst.reports[i];
    r.user = i;
    r.x_min = Eigen::VectorXd::Zero(slots);
    r.x = Eigen::VectorXd::Zero(slots);
    r.x_max = Eigen::VectorXd::Zero(slots);
    inst.valuations.user_slot[i].resize(slots);
    for (int t = 0; t < slots; ++t) {
      inst.valuations.user_slot[i][t] = auction::QuadraticValuation{
          0.0, 1.0 + 3.0 * unit(rng), 0.4 + 0.8 * unit(rng)};
      r.x_max(t) = 1.0 + 2.0 * unit(rng);
      r.x(t) = 0.5 * r.x_max(t);
      cap_sum(t) += r.x_max(t);
    }
  }
  inst.valuations.cost.resize(slots);
  for (int t = 0; t < slots; ++t) {
    inst.valuations.cost[t] =
        auction::SlotCost{0.1 * unit(rng), 0.2 + 0.4 * unit(rng)};
    inst.constraints.y_hi(t) = 0.9 * cap_sum(t);
  }
  return inst;
}

consensus::NetworkModel reliable_net(int users, std::uint64_t seed) {
  consensus::NetworkModel net;
  net.alpha = Eigen::VectorXd::Ones(users);
  net.p_e = 0.0;
  net.seed = seed;
  return net;
}

std::string encode_payload(const Eigen::VectorXd& v) {
  std::string out;
  char buf[64];
  for (int i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v(i));
    if (i) out.push_back(';');
    out += buf;
  }
  return out;
}

int bucket_of(std::uint64_t value, std::uint64_t p, int buckets) {
  return static_cast<int>(static_cast<unsigned __int128>(value) * buckets / p);
}

}  // namespace

TEST_CASE("modular arithmetic agrees with a wide-integer oracle") {
  const std::uint64_t p = kDefaultPrime;
  CHECK(add_mod(p - 1, 1, p) == 0);
  CHECK(sub_mod(0, 1, p) == p - 1);
  CHECK(mul_mod(p - 1, p - 1, p) == 1);  // (-1)^2

  std::mt19937_64 rng = substream(3, "mod-oracle");
  std::uniform_int_distribution<std::uint64_t> uniform(0, p - 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::uint64_t a = uniform(rng), b = uniform(rng);
    const auto wide_a = static_cast<unsigned __int128>(a);
    const auto wide_b = static_cast<unsigned __int128>(b);
    CHECK(add_mod(a, b, p) == static_cast<std::uint64_t>((wide_a + wide_b) % p));
    CHECK(mul_mod(a, b, p) == static_cast<std::uint64_t>((wide_a * wide_b) % p));
    CHECK(add_mod(sub_mod(a, b, p), b, p) == a);
  }

  CHECK(make_element(kDefaultPrime + 5).value == 5);
  CHECK_THROWS_AS(make_element(1, 2), BoundViolation);
  CHECK_THROWS_AS(make_element(1, 1ull << 62), BoundViolation);
}

TEST_CASE("sharing reconstructs the secret for every party count") {
  std::mt19937_64 rng = substream(11, "share-roundtrip");
  std::uniform_int_distribution<std::uint64_t> uniform(0, kDefaultPrime - 1);
  std::uniform_int_distribution<int> party_count(1, 8);
  const std::uint64_t alpha = 0x2b2b2b2bull;
  for (int trial = 0; trial < 10000; ++trial) {
    const FieldElement a = make_element(uniform(rng));
    const int m = party_count(rng);
    const SharedValue sv = share(a, m, alpha, rng);
    REQUIRE(sv.parties() == m);
    CHECK(reconstruct(sv).value == a.value);
    CHECK(mac_check(sv, alpha, a));
  }

  const FieldElement a = make_element(424242);
  const SharedValue solo = share(a, 1, alpha, rng);
  CHECK(solo.shares[0] == a.value);
  CHECK(solo.mac_shares[0] == mul_mod(alpha, a.value, kDefaultPrime));
  CHECK_THROWS_AS(share(a, 0, alpha, rng), BoundViolation);

  SharedValue manual;
  manual.shares = {0, 0, 0};
  manual.mac_shares = {0, 0, 0};
  CHECK(reconstruct(manual).value == 0);
  manual.shares = {kDefaultPrime - 1, 1};
  CHECK(reconstruct(manual).value == 0);

  std::uniform_int_distribution<std::uint64_t> any(0, ~0ull >> 2);
  for (int trial = 0; trial < 200; ++trial) {
    SharedValue sv;
    sv.shares.resize(5);
    unsigned __int128 total = 0;
    for (auto& s : sv.shares) {
      s = any(rng) % kDefaultPrime;
      total += s;
    }
    CHECK(reconstruct(sv).value ==
          static_cast<std::uint64_t>(total % kDefaultPrime));
  }
  SharedValue empty;
  CHECK_THROWS_AS(reconstruct(empty), DimensionMismatch);
}

TEST_CASE("share marginals are uniform and independent of the secret") {
  std::mt19937_64 rng = substream(13, "share-uniformity");
  const std::uint64_t alpha = 77;
  const int draws = 10000;
  const int buckets = 16;

  std::vector<double> counts(buckets, 0.0);
  const FieldElement secret = make_element(123456789);
  for (int d = 0; d < draws; ++d) {
    const SharedValue sv = share(secret, 3, alpha, rng);
    counts[bucket_of(sv.shares[0], kDefaultPrime, buckets)] += 1.0;
  }
  const double expected = static_cast<double>(draws) / buckets;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 37.697);  // chi-square(15) at 0.001

  // two-sample comparison of first-share views for two different secrets
  std::vector<double> view_a(8, 0.0), view_b(8, 0.0);
  const FieldElement sa = make_element(5);
  const FieldElement sb = make_element(987654321);
  for (int d = 0; d < draws; ++d) {
    view_a[bucket_of(share(sa, 2, alpha, rng).shares[0], kDefaultPrime, 8)] +=
        1.0;
    view_b[bucket_of(share(sb, 2, alpha, rng).shares[0], kDefaultPrime, 8)] +=
        1.0;
  }
  double chi2_two = 0;
  for (int k = 0; k < 8; ++k) {
    const double pooled = 0.5 * (view_a[k] + view_b[k]);
    if (pooled > 0)
      chi2_two += (view_a[k] - pooled) * (view_a[k] - pooled) / pooled +
                  (view_b[k] - pooled) * (view_b[k] - pooled) / pooled;
  }
  CHECK(chi2_two < 24.322);  // chi-square(7) at 0.001
}

TEST_CASE("tampered shares slip past the MAC at most negligibly") {
  std::mt19937_64 rng = substream(17, "mac-tamper");
  std::uniform_int_distribution<std::uint64_t> uniform(0, kDefaultPrime - 1);
  std::uniform_int_distribution<std::uint64_t> nonzero(1, kDefaultPrime - 1);
  std::uniform_int_distribution<int> pick(0, 2);
  const std::uint64_t alpha = uniform(rng);

  int accepted = 0;
  const int trials = 100000;
  for (int trial = 0; trial < trials; ++trial) {
    const FieldElement a = make_element(uniform(rng));
    SharedValue sv = share(a, 3, alpha, rng);
    const int j = pick(rng);
    sv.shares[j] = add_mod(sv.shares[j], nonzero(rng), sv.prime);
    sv.mac_shares[j] = add_mod(sv.mac_shares[j], uniform(rng), sv.prime);
    if (mac_check(sv, alpha, reconstruct(sv))) ++accepted;
  }
  CHECK(accepted == 0);

  // a party that knows the key can move delta and stay consistent
  const FieldElement a = make_element(31337);
  SharedValue sv = share(a, 4, alpha, rng);
  sv.delta = 999;
  const std::uint64_t mac_total =
      mul_mod(alpha, add_mod(a.value, sv.delta, sv.prime), sv.prime);
  std::uint64_t running = 0;
  for (int i = 0; i + 1 < 4; ++i) running = add_mod(running, sv.mac_shares[i], sv.prime);
  sv.mac_shares[3] = sub_mod(mac_total, running, sv.prime);
  CHECK(mac_check(sv, alpha, a));
}

TEST_CASE("conversion verification needs both the sum and the MACs") {
  std::mt19937_64 rng = substream(19, "conversion");
  std::uniform_int_distribution<std::uint64_t> uniform(0, kDefaultPrime - 1);
  const std::uint64_t alpha = 0xabcdull;

  for (int trial = 0; trial < 50; ++trial) {
    const FieldElement a = make_element(uniform(rng));
    const SharedValue honest = share(a, 4, alpha, rng);
    CHECK(verify_conversion(a, honest, alpha));

    SharedValue off_sum = honest;
    off_sum.shares[1] = add_mod(off_sum.shares[1], 1, off_sum.prime);
    CHECK_FALSE(verify_conversion(a, off_sum, alpha));

    for (int j = 0; j < 4; ++j) {
      for (std::uint64_t delta :
           std::vector<std::uint64_t>{1, 7, kDefaultPrime - 1}) {
        SharedValue bad_mac = honest;
        bad_mac.mac_shares[j] =
            add_mod(bad_mac.mac_shares[j], delta, bad_mac.prime);
        CHECK_FALSE(verify_conversion(a, bad_mac, alpha));
      }
    }
  }
}

TEST_CASE("commitments verify only with the exact opening") {
  std::mt19937_64 rng = substream(23, "commitments");
  auto [commitment, opening] = commit_random("manager issuance 4.25", rng);
  CHECK(verify(commitment, opening));

  Opening wrong_value = opening;
  wrong_value.value = "manager issuance 4.26";
  CHECK_FALSE(verify(commitment, wrong_value));

  Opening wrong_randomness = opening;
  wrong_randomness.randomness[31] ^= 1;
  CHECK_FALSE(verify(commitment, wrong_randomness));

  const Commitment again = commit(opening.value, opening.randomness);
  CHECK(again.digest == commitment.digest);

  auto [other, other_opening] = commit_random("manager issuance 4.25", rng);
  CHECK(other.digest != commitment.digest);  // fresh randomness
  CHECK(verify(other, other_opening));

  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("transcripts round trip and reject tampering") {
  Transcript transcript;
  std::mt19937_64 rng = substream(29, "transcript");
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int k = 1; k <= 5; ++k) {
    for (int sender = -1; sender < 2; ++sender) {
      TranscriptRecord rec;
      rec.round = k;
      rec.sender = sender;
      rec.payload.resize(3);
      for (int i = 0; i < 3; ++i) rec.payload(i) = unit(rng);
      rec.digest = sha256_hex(encode_payload(rec.payload));
      transcript.records.push_back(rec);
    }
  }

  const std::string path = "transcript_roundtrip.txt";
  save_transcript(transcript, path);
  const Transcript loaded = load_transcript(path);
  REQUIRE(loaded.records.size() == transcript.records.size());
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    CHECK(loaded.records[i].round == transcript.records[i].round);
    CHECK(loaded.records[i].sender == transcript.records[i].sender);
    CHECK(loaded.records[i].digest == transcript.records[i].digest);
    CHECK(loaded.records[i].payload == transcript.records[i].payload);
  }
  std::remove(path.c_str());

  std::ofstream tampered("transcript_tampered.txt");
  const auto& rec = transcript.records.front();
  tampered << rec.round << " " << rec.sender << " " << rec.digest << " 3 "
           << "0.5 0.5 0.5\n";
  tampered.close();
  CHECK_THROWS_AS(load_transcript("transcript_tampered.txt"), SchemaMismatch);
  std::remove("transcript_tampered.txt");

  std::ofstream malformed("transcript_malformed.txt");
  malformed << "1 0 deadbeef -2\n";
  malformed.close();
  CHECK_THROWS_AS(load_transcript("transcript_malformed.txt"), SchemaMismatch);
  std::remove("transcript_malformed.txt");
}

TEST_CASE("honest committed runs verify clean and match the plain protocol") {
  const Instance inst = protocol_instance(41, 3, 2);
  const consensus::NetworkModel net = reliable_net(3, 8);
  CommittedRunOptions options;
  options.seed = 101;

  const CommittedRunResult committed = committed_protocol_run(
      inst.reports, inst.valuations, inst.constraints, net, options);
  CHECK(committed.report.clean());
  CHECK(committed.report.commitments_ok);
  CHECK(committed.report.shares_ok);
  CHECK(committed.report.deviations.empty());
  CHECK(committed.input_commitments.size() == inst.reports.size());
  CHECK_FALSE(committed.transcript.records.empty());

  const consensus::ProtocolResult plain = consensus::run_protocol_one(
      inst.reports, inst.valuations, inst.constraints, net);
  CHECK(committed.outcome.allocation == plain.outcome.allocation);
  CHECK(committed.outcome.payments == plain.outcome.payments);
  CHECK(committed.outcome.issuance == plain.outcome.issuance);
  CHECK(committed.diagnostics.iterations == plain.diagnostics.iterations);

  const std::string path = "committed_transcript.txt";
  save_transcript(committed.transcript, path);
  const Transcript reloaded = load_transcript(path);
  const std::vector<Deviation> deviations =
      verify_transcript(reloaded, inst.reports, inst.valuations,
                        inst.constraints, net, options.q, options.sigma);
  CHECK(deviations.empty());
  std::remove(path.c_str());
}

TEST_CASE("wire faults are attributed to the node and round") {
  const Instance inst = protocol_instance(43, 3, 1);
  const consensus::NetworkModel net = reliable_net(3, 12);
  CommittedRunOptions options;
  options.seed = 7;
  options.faults = {consensus::WireFault{1, 0.25, 10}};

  const CommittedRunResult result = committed_protocol_run(
      inst.reports, inst.valuations, inst.constraints, net, options);
  REQUIRE(result.report.deviations.size() == 1);
  CHECK(result.report.deviations[0].node == 1);
  CHECK(result.report.deviations[0].round == 10);
  CHECK_FALSE(result.report.clean());
  CHECK(result.report.commitments_ok);
  CHECK(result.report.shares_ok);

  CommittedRunOptions two_faults;
  two_faults.seed = 7;
  two_faults.faults = {consensus::WireFault{0, 0.2, 5},
                       consensus::WireFault{2, -0.15, 9}};
  const CommittedRunResult pair = committed_protocol_run(
      inst.reports, inst.valuations, inst.constraints, net, two_faults);
  REQUIRE(pair.report.deviations.size() == 2);
  CHECK(pair.report.deviations[0].node == 0);
  CHECK(pair.report.deviations[0].round == 5);
  CHECK(pair.report.deviations[1].node == 2);
  CHECK(pair.report.deviations[1].round == 9);
}

TEST_CASE("running on an input that differs from its commitment is refused") {
  const Instance inst = protocol_instance(47, 3, 1);
  const consensus::NetworkModel net = reliable_net(3, 14);
  CommittedRunOptions options;
  options.seed = 3;
  options.swap_input_user = 1;
  CHECK_THROWS_AS(committed_protocol_run(inst.reports, inst.valuations,
                                         inst.constraints, net, options),
                  CommitmentMismatch);
}

TEST_CASE("verification reports export to CSV") {
  VerificationReport report;
  report.deviations = {{1, 10}, {2, 31}};
  const std::string path = "verification_report.csv";
  save_report_csv(report, path);

  std::ifstream file(path);
  REQUIRE(file.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(file, line))
    if (!line.empty()) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "kind,node,round,ok");
  CHECK(lines[1] == "commitments,-1,-1,1");
  CHECK(lines[2] == "shares,-1,-1,1");
  CHECK(lines[3] == "deviation,1,10,0");
  CHECK(lines[4] == "deviation,2,31,0");
  std::remove(path.c_str());
}
