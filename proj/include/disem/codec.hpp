#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "disem/entropy.hpp"
#include "disem/quantizer.hpp"

namespace disem::codec {

/// Canonical Huffman code over symbols {0..num_symbols-1}. Symbols with zero
/// count get no codeword (length 0). A histogram with a single used symbol
/// gives that symbol the empty codeword: the stream is fully determined by its
/// length.
struct CodeTable {
  std::vector<int> lengths;
  std::vector<std::uint64_t> codes;
  int only_symbol = -1;  // set for the single-symbol case

  std::size_t num_symbols() const { return lengths.size(); }
  bool has(int symbol) const {
    if (symbol >= 0 && symbol == only_symbol) return true;
    return symbol >= 0 && static_cast<std::size_t>(symbol) < lengths.size() && lengths[symbol] > 0;
  }
  /// Sum over symbols of 2^-length.
  double kraft_sum() const;
};

CodeTable build_code(std::span<const std::int64_t> counts);
inline CodeTable build_code(const DigitHistogram& hist) { return build_code(hist.counts); }

struct BitStream {
  std::vector<std::uint8_t> bytes;
  std::size_t bits = 0;

  void push(bool bit);
  bool at(std::size_t i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1U; }
};

BitStream encode(std::span<const int> symbols, const CodeTable& table);
/// Decodes exactly `count` symbols. Throws on a truncated or invalid stream.
std::vector<int> decode(const BitStream& bits, std::size_t count, const CodeTable& table);

/// Expected code length in bits per symbol under the histogram's empirical
/// distribution.
double mean_code_length(const CodeTable& table, std::span<const std::int64_t> counts);

struct DigitReport {
  std::size_t digit = 0;
  std::size_t symbols = 0;
  double entropy_bits = 0.0;   // empirical, per symbol
  double mean_length = 0.0;    // L-bar, per symbol
  std::size_t coded_bits = 0;  // size of the encoded stream
  bool lossless = false;       // decode(encode(s)) == s
};

/// Bin-index streams per digit of a batch.
std::vector<std::vector<int>> symbol_streams(const MessageBatch& batch, const Quantizer& q);

/// Codes every digit of the batch independently and checks the round trip.
std::vector<DigitReport> report(const MessageBatch& batch, const Quantizer& q);

}  // namespace disem::codec
