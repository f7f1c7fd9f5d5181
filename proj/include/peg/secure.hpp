#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "peg/common.hpp"
#include "peg/consensus.hpp"

namespace peg::secure {

inline constexpr std::uint64_t kDefaultPrime = 2305843009213693951ull;  // 2^61-1

std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p);
std::uint64_t sub_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p);
std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p);

struct FieldElement {
  std::uint64_t value = 0;
  std::uint64_t prime = kDefaultPrime;
};

FieldElement make_element(std::uint64_t value,
                          std::uint64_t prime = kDefaultPrime);

struct SharedValue {
  std::uint64_t prime = kDefaultPrime;
  std::uint64_t delta = 0;
  std::vector<std::uint64_t> shares;
  std::vector<std::uint64_t> mac_shares;

  int parties() const { return static_cast<int>(shares.size()); }
};

SharedValue share(const FieldElement& a, int parties, std::uint64_t alpha_key,
                  std::mt19937_64& rng);

FieldElement reconstruct(const SharedValue& sv);

bool mac_check(const SharedValue& sv, std::uint64_t alpha_key,
               const FieldElement& opened);

bool verify_conversion(const FieldElement& a, const SharedValue& sv,
                       std::uint64_t alpha_key);

struct Opening {
  std::string value;
  std::array<std::uint8_t, 32> randomness{};
};

struct Commitment {
  std::array<std::uint8_t, 32> digest{};
};

Commitment commit(const std::string& value,
                  const std::array<std::uint8_t, 32>& randomness);
std::pair<Commitment, Opening> commit_random(const std::string& value,
                                             std::mt19937_64& rng);
bool verify(const Commitment& commitment, const Opening& opening);

std::string sha256_hex(const std::string& data);

struct TranscriptRecord {
  int round = 0;
  int sender = -1;  // -1 is the manager
  std::string digest;
  Eigen::VectorXd payload;
};

struct Transcript {
  std::vector<TranscriptRecord> records;
};

void save_transcript(const Transcript& transcript, const std::string& path);
Transcript load_transcript(const std::string& path);

struct Deviation {
  int node = 0;
  int round = 0;
};

struct VerificationReport {
  bool commitments_ok = true;
  bool shares_ok = true;
  std::vector<Deviation> deviations;

  bool clean() const {
    return commitments_ok && shares_ok && deviations.empty();
  }
};

// Re-executes every node's local updates from committed inputs and the
// messages that node received per the transcript; a node whose recorded
// broadcast differs from its recomputed one is named with the round.
std::vector<Deviation> verify_transcript(
    const Transcript& transcript,
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints,
    const consensus::NetworkModel& net, double q, double sigma);

struct CommittedRunOptions {
  std::uint64_t seed = 0;  // commitment and sharing randomness
  std::uint64_t alpha_key = 0x5eed5eed5eedull;
  std::uint64_t prime = kDefaultPrime;
  double q = 1.0;
  double sigma = 1.0;
  double eps1 = 1e-8;
  double eps2 = 1e-8;
  int max_iterations = 50000;
  std::vector<consensus::WireFault> faults;
  int swap_input_user = -1;  // alters that user's report after commitment
};

struct CommittedRunResult {
  auction::AuctionOutcome outcome;
  consensus::ConsensusDiagnostics diagnostics;
  Transcript transcript;
  VerificationReport report;
  std::vector<Commitment> input_commitments;
};

CommittedRunResult committed_protocol_run(
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints,
    const consensus::NetworkModel& net, const CommittedRunOptions& options);

void save_report_csv(const VerificationReport& report, const std::string& path);

}  // namespace peg::secure
