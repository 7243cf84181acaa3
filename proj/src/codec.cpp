#include "disem/codec.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

namespace disem::codec {

double CodeTable::kraft_sum() const {
  if (only_symbol >= 0) return 1.0;
  double s = 0.0;
  for (int l : lengths)
    if (l > 0) s += std::ldexp(1.0, -l);
  return s;
}

CodeTable build_code(std::span<const std::int64_t> counts) {
  const std::size_t n = counts.size();
  CodeTable table{std::vector<int>(n, 0), std::vector<std::uint64_t>(n, 0)};

  // Tree nodes: leaves first, internal nodes appended. Ties break on node id
  // so the construction is deterministic.
  std::vector<int> parent;
  using Item = std::tuple<std::int64_t, std::size_t>;  // (weight, node id)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::vector<std::size_t> leaf_node(n, SIZE_MAX);
  for (std::size_t s = 0; s < n; ++s) {
    if (counts[s] < 0) throw std::invalid_argument("negative symbol count");
    if (counts[s] == 0) continue;
    leaf_node[s] = parent.size();
    heap.emplace(counts[s], parent.size());
    parent.push_back(-1);
  }
  if (heap.empty()) throw std::invalid_argument("cannot build a code from an empty histogram");
  if (heap.size() == 1) {
    const auto s = std::find_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) - counts.begin();
    table.only_symbol = static_cast<int>(s);
    return table;
  }
  while (heap.size() > 1) {
    auto [wa, a] = heap.top();
    heap.pop();
    auto [wb, b] = heap.top();
    heap.pop();
    const std::size_t id = parent.size();
    parent.push_back(-1);
    parent[a] = parent[b] = static_cast<int>(id);
    heap.emplace(wa + wb, id);
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (leaf_node[s] == SIZE_MAX) continue;
    int depth = 0;
    for (int v = static_cast<int>(leaf_node[s]); parent[v] >= 0; v = parent[v]) ++depth;
    table.lengths[s] = depth;
  }

  // Canonical assignment: shorter codes first, ties by symbol value.
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < n; ++s)
    if (table.lengths[s] > 0) order.push_back(s);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::pair(table.lengths[x], x) < std::pair(table.lengths[y], y);
  });
  std::uint64_t code = 0;
  int prev_len = table.lengths[order.front()];
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const int len = table.lengths[order[idx]];
    if (idx > 0) code = (code + 1) << (len - prev_len);
    table.codes[order[idx]] = code;
    prev_len = len;
  }
  return table;
}

void BitStream::push(bool bit) {
  if (bits % 8 == 0) bytes.push_back(0);
  if (bit) bytes.back() |= static_cast<std::uint8_t>(1U << (7 - bits % 8));
  ++bits;
}

BitStream encode(std::span<const int> symbols, const CodeTable& table) {
  BitStream out;
  for (int s : symbols) {
    if (!table.has(s)) throw std::invalid_argument("symbol " + std::to_string(s) + " has no codeword");
    const int len = table.lengths[s];
    for (int b = len - 1; b >= 0; --b) out.push((table.codes[s] >> b) & 1U);
  }
  return out;
}

std::vector<int> decode(const BitStream& bits, std::size_t count, const CodeTable& table) {
  if (table.only_symbol >= 0) return std::vector<int>(count, table.only_symbol);
  // Canonical decoding: per length, the first code and the symbols in order.
  int max_len = 0;
  for (int l : table.lengths) max_len = std::max(max_len, l);
  std::vector<std::vector<int>> by_len(max_len + 1);
  std::vector<std::uint64_t> first(max_len + 1, 0);
  std::vector<bool> seen(max_len + 1, false);
  for (std::size_t s = 0; s < table.num_symbols(); ++s) {
    const int l = table.lengths[s];
    if (l == 0) continue;
    if (!seen[l] || table.codes[s] < first[l]) first[l] = table.codes[s];
    seen[l] = true;
  }
  for (int l = 1; l <= max_len; ++l) {
    for (std::size_t s = 0; s < table.num_symbols(); ++s)
      if (table.lengths[s] == l) by_len[l].push_back(static_cast<int>(s));
    std::sort(by_len[l].begin(), by_len[l].end(),
              [&](int a, int b) { return table.codes[a] < table.codes[b]; });
  }

  std::vector<int> out;
  out.reserve(count);
  std::size_t pos = 0;
  while (out.size() < count) {
    std::uint64_t code = 0;
    int len = 0;
    for (;;) {
      if (pos >= bits.bits) throw std::runtime_error("truncated bitstream");
      code = (code << 1) | (bits.at(pos++) ? 1U : 0U);
      ++len;
      if (len > max_len) throw std::runtime_error("invalid codeword in bitstream");
      if (seen[len] && code >= first[len] && code - first[len] < by_len[len].size()) {
        out.push_back(by_len[len][code - first[len]]);
        break;
      }
    }
  }
  return out;
}

double mean_code_length(const CodeTable& table, std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  double bits = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    total += counts[s];
    bits += static_cast<double>(counts[s]) * table.lengths.at(s);
  }
  if (total == 0) throw std::invalid_argument("empty histogram");
  return bits / static_cast<double>(total);
}

std::vector<std::vector<int>> symbol_streams(const MessageBatch& batch, const Quantizer& q) {
  std::vector<std::vector<int>> streams(batch.length(), std::vector<int>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t d = 0; d < batch.length(); ++d) streams[d][i] = q.bin_index(batch.at(i, d));
  return streams;
}

std::vector<DigitReport> report(const MessageBatch& batch, const Quantizer& q) {
  const auto streams = symbol_streams(batch, q);
  std::vector<DigitReport> rows;
  for (std::size_t d = 0; d < batch.length(); ++d) {
    const DigitHistogram hist = histogram(batch, d, q, 0.0);
    const CodeTable table = build_code(hist);
    const BitStream bits = encode(streams[d], table);
    DigitReport r;
    r.digit = d;
    r.symbols = batch.size();
    r.entropy_bits = digit_entropy(hist, batch.size());
    r.mean_length = mean_code_length(table, hist.counts);
    r.coded_bits = bits.bits;
    r.lossless = decode(bits, streams[d].size(), table) == streams[d];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace disem::codec
