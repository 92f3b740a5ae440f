#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semcom {

// Binary LDPC code given by a sparse parity-check matrix H (m x n) with the
// parity bits in the last m columns. Encoding is systematic.
class LdpcCode {
 public:
  // Parses the quasi-cyclic base-matrix text format (see data/ieee80211n_648_r23.txt).
  static LdpcCode from_base_matrix(std::string_view text);

  int n() const { return n_; }
  int k() const { return n_ - m_; }
  int m() const { return m_; }
  double rate() const { return static_cast<double>(k()) / n_; }

  const std::vector<std::vector<int>>& check_vars() const { return check_vars_; }

  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info) const;
  bool parity_ok(std::span<const std::uint8_t> codeword) const;

 private:
  void build_encoder();

  int n_ = 0;
  int m_ = 0;
  std::vector<std::vector<int>> check_vars_;
  // Dense GF(2) inverse of the parity part, one bit row per parity bit.
  int words_ = 0;
  std::vector<std::uint64_t> parity_inverse_;
};

std::string_view ldpc_648_r23_text();
// The rate-2/3, n = 648 code used by the baseline.
const LdpcCode& ieee80211n_648_r23();

enum class LdpcAlgorithm { MinSum, SumProduct };
LdpcAlgorithm parse_ldpc_algorithm(const std::string& s);
std::string to_string(LdpcAlgorithm a);

struct LdpcDecodeResult {
  std::vector<std::uint8_t> info;
  std::vector<std::uint8_t> codeword;
  bool converged = false;
  int iterations = 0;
};

// Flooding belief propagation. LLR > 0 favours bit 0. Stops once H c = 0.
LdpcDecodeResult ldpc_decode(std::span<const double> llr, const LdpcCode& code, int max_iterations,
                             LdpcAlgorithm algorithm = LdpcAlgorithm::MinSum, double minsum_scale = 0.8);

// Block-wise helpers: info is zero-padded to a multiple of k.
std::vector<std::uint8_t> ldpc_encode_stream(std::span<const std::uint8_t> info, const LdpcCode& code);
struct StreamDecodeResult {
  std::vector<std::uint8_t> info;  // truncated to info_bits
  int blocks = 0;
  int failed_blocks = 0;
};
StreamDecodeResult ldpc_decode_stream(std::span<const double> llr, std::size_t info_bits, const LdpcCode& code,
                                      int max_iterations, LdpcAlgorithm algorithm, double minsum_scale);

}  // namespace semcom
