#include "semcom/ldpc.hpp"

#include "semcom/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

namespace semcom {

LdpcCode LdpcCode::from_base_matrix(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<long> values;
  int z = 0;
  int rows = 0;
  int cols = 0;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "z") {
      ls >> z;
    } else if (tok == "base") {
      ls >> rows >> cols;
    } else {
      values.push_back(std::stol(tok));
      long v = 0;
      while (ls >> v) values.push_back(v);
    }
  }
  if (z <= 0 || rows <= 0 || cols <= rows) throw DataError("LDPC table: missing or invalid z/base header");
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    throw DataError("LDPC table: expected " + std::to_string(rows * cols) + " entries, got " +
                    std::to_string(values.size()));
  }
  LdpcCode code;
  code.n_ = cols * z;
  code.m_ = rows * z;
  code.check_vars_.assign(code.m_, {});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const long s = values[static_cast<std::size_t>(r) * cols + c];
      if (s < 0) continue;
      if (s >= z) throw DataError("LDPC table: shift " + std::to_string(s) + " >= z");
      for (int i = 0; i < z; ++i) code.check_vars_[r * z + i].push_back(c * z + static_cast<int>((i + s) % z));
    }
  }
  for (auto& cv : code.check_vars_) std::sort(cv.begin(), cv.end());
  code.build_encoder();
  return code;
}

void LdpcCode::build_encoder() {
  const int m = m_;
  const int k = n_ - m_;
  const int words = (2 * m + 63) / 64;
  // Rows of [Hp | I] as bitsets.
  std::vector<std::vector<std::uint64_t>> a(m, std::vector<std::uint64_t>(words, 0));
  auto set = [](std::vector<std::uint64_t>& row, int bit) { row[bit / 64] ^= std::uint64_t{1} << (bit % 64); };
  auto get = [](const std::vector<std::uint64_t>& row, int bit) { return (row[bit / 64] >> (bit % 64)) & 1U; };
  for (int r = 0; r < m; ++r) {
    for (int v : check_vars_[r]) {
      if (v >= k) set(a[r], v - k);
    }
    set(a[r], m + r);
  }
  for (int col = 0; col < m; ++col) {
    int pivot = -1;
    for (int r = col; r < m; ++r) {
      if (get(a[r], col)) {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) throw DataError("LDPC table: parity part of H is singular");
    std::swap(a[col], a[pivot]);
    for (int r = 0; r < m; ++r) {
      if (r != col && get(a[r], col)) {
        for (int wi = 0; wi < words; ++wi) a[r][wi] ^= a[col][wi];
      }
    }
  }
  words_ = (m + 63) / 64;
  parity_inverse_.assign(static_cast<std::size_t>(m) * words_, 0);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      if (get(a[r], m + c)) parity_inverse_[static_cast<std::size_t>(r) * words_ + c / 64] |= std::uint64_t{1} << (c % 64);
    }
  }
}

std::vector<std::uint8_t> LdpcCode::encode(std::span<const std::uint8_t> info) const {
  const int k = this->k();
  if (static_cast<int>(info.size()) != k) throw ContractError("ldpc encode: expected " + std::to_string(k) + " bits");
  std::vector<std::uint64_t> syndrome(words_, 0);
  for (int r = 0; r < m_; ++r) {
    unsigned bit = 0;
    for (int v : check_vars_[r]) {
      if (v < k) bit ^= info[v] & 1U;
    }
    if (bit) syndrome[r / 64] |= std::uint64_t{1} << (r % 64);
  }
  std::vector<std::uint8_t> cw(info.begin(), info.end());
  cw.resize(n_, 0);
  for (int p = 0; p < m_; ++p) {
    const std::uint64_t* row = parity_inverse_.data() + static_cast<std::size_t>(p) * words_;
    std::uint64_t acc = 0;
    for (int wi = 0; wi < words_; ++wi) acc ^= row[wi] & syndrome[wi];
    cw[k + p] = static_cast<std::uint8_t>(std::popcount(acc) & 1);
  }
  return cw;
}

bool LdpcCode::parity_ok(std::span<const std::uint8_t> codeword) const {
  if (static_cast<int>(codeword.size()) != n_) return false;
  for (const auto& vars : check_vars_) {
    unsigned bit = 0;
    for (int v : vars) bit ^= codeword[v] & 1U;
    if (bit) return false;
  }
  return true;
}

const LdpcCode& ieee80211n_648_r23() {
  static const LdpcCode code = LdpcCode::from_base_matrix(ldpc_648_r23_text());
  return code;
}

LdpcAlgorithm parse_ldpc_algorithm(const std::string& s) {
  if (s == "min_sum") return LdpcAlgorithm::MinSum;
  if (s == "sum_product") return LdpcAlgorithm::SumProduct;
  throw ConfigError("unknown LDPC decoder '" + s + "' (min_sum | sum_product)");
}

std::string to_string(LdpcAlgorithm a) { return a == LdpcAlgorithm::MinSum ? "min_sum" : "sum_product"; }

LdpcDecodeResult ldpc_decode(std::span<const double> llr, const LdpcCode& code, int max_iterations,
                             LdpcAlgorithm algorithm, double minsum_scale) {
  const int n = code.n();
  if (static_cast<int>(llr.size()) != n) throw ContractError("ldpc decode: expected " + std::to_string(n) + " LLRs");
  const auto& checks = code.check_vars();

  std::vector<int> offsets(checks.size() + 1, 0);
  for (std::size_t c = 0; c < checks.size(); ++c) offsets[c + 1] = offsets[c] + static_cast<int>(checks[c].size());
  const int edges = offsets.back();
  std::vector<int> edge_var(edges);
  for (std::size_t c = 0; c < checks.size(); ++c) {
    std::copy(checks[c].begin(), checks[c].end(), edge_var.begin() + offsets[c]);
  }
  std::vector<double> v2c(edges);
  std::vector<double> c2v(edges, 0.0);
  std::vector<double> total(llr.begin(), llr.end());
  for (int e = 0; e < edges; ++e) v2c[e] = llr[edge_var[e]];

  LdpcDecodeResult res;
  res.codeword.resize(n);
  auto harden = [&] {
    for (int v = 0; v < n; ++v) res.codeword[v] = total[v] < 0.0 ? 1 : 0;
  };
  harden();
  res.converged = code.parity_ok(res.codeword);

  constexpr double kClip = 1e3;
  for (int it = 0; it < max_iterations && !res.converged; ++it) {
    for (std::size_t c = 0; c < checks.size(); ++c) {
      const int b = offsets[c];
      const int e_end = offsets[c + 1];
      if (algorithm == LdpcAlgorithm::MinSum) {
        double min1 = std::numeric_limits<double>::infinity();
        double min2 = min1;
        int arg = -1;
        int sign = 1;
        for (int e = b; e < e_end; ++e) {
          const double a = std::abs(v2c[e]);
          if (v2c[e] < 0) sign = -sign;
          if (a < min1) {
            min2 = min1;
            min1 = a;
            arg = e;
          } else if (a < min2) {
            min2 = a;
          }
        }
        for (int e = b; e < e_end; ++e) {
          const int s = v2c[e] < 0 ? -sign : sign;
          c2v[e] = minsum_scale * s * (e == arg ? min2 : min1);
        }
      } else {
        for (int e = b; e < e_end; ++e) {
          double prod = 1.0;
          for (int f = b; f < e_end; ++f) {
            if (f != e) prod *= std::tanh(std::clamp(v2c[f], -kClip, kClip) / 2.0);
          }
          prod = std::clamp(prod, -1.0 + 1e-15, 1.0 - 1e-15);
          c2v[e] = 2.0 * std::atanh(prod);
        }
      }
    }
    std::copy(llr.begin(), llr.end(), total.begin());
    for (int e = 0; e < edges; ++e) total[edge_var[e]] += c2v[e];
    for (int e = 0; e < edges; ++e) v2c[e] = total[edge_var[e]] - c2v[e];
    harden();
    res.iterations = it + 1;
    res.converged = code.parity_ok(res.codeword);
  }
  res.info.assign(res.codeword.begin(), res.codeword.begin() + code.k());
  return res;
}

std::vector<std::uint8_t> ldpc_encode_stream(std::span<const std::uint8_t> info, const LdpcCode& code) {
  const std::size_t k = code.k();
  const std::size_t blocks = (info.size() + k - 1) / k;
  std::vector<std::uint8_t> out;
  out.reserve(blocks * code.n());
  std::vector<std::uint8_t> block(k);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::fill(block.begin(), block.end(), 0);
    const std::size_t begin = b * k;
    const std::size_t end = std::min(info.size(), begin + k);
    std::copy(info.begin() + begin, info.begin() + end, block.begin());
    const auto cw = code.encode(block);
    out.insert(out.end(), cw.begin(), cw.end());
  }
  return out;
}

StreamDecodeResult ldpc_decode_stream(std::span<const double> llr, std::size_t info_bits, const LdpcCode& code,
                                      int max_iterations, LdpcAlgorithm algorithm, double minsum_scale) {
  const std::size_t n = code.n();
  if (llr.size() % n != 0) throw ContractError("ldpc stream: LLR count is not a multiple of n");
  StreamDecodeResult res;
  res.blocks = static_cast<int>(llr.size() / n);
  for (int b = 0; b < res.blocks; ++b) {
    const auto r = ldpc_decode(llr.subspan(b * n, n), code, max_iterations, algorithm, minsum_scale);
    if (!r.converged) ++res.failed_blocks;
    res.info.insert(res.info.end(), r.info.begin(), r.info.end());
  }
  if (res.info.size() < info_bits) throw ContractError("ldpc stream: fewer decoded bits than requested");
  res.info.resize(info_bits);
  return res;
}

}  // namespace semcom
