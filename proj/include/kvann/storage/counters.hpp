#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace kvann {

/// Per-operation counter sink; plain integers, one instance per logical
/// operation (search, insert, page, ...).
struct OpCounters {
  std::uint64_t quant_reads = 0;
  std::uint64_t adj_reads = 0;
  std::uint64_t fullprec_reads = 0;
  std::uint64_t hops = 0;
  std::uint64_t cmps = 0;
  std::uint64_t pages = 0;

  OpCounters& operator+=(const OpCounters& o) {
    quant_reads += o.quant_reads;
    adj_reads += o.adj_reads;
    fullprec_reads += o.fullprec_reads;
    hops += o.hops;
    cmps += o.cmps;
    pages += o.pages;
    return *this;
  }
};

/// Store-wide typed read counters. Every quant-term get/scan entry,
/// adjacency get, and document fetch lands here; these stand in for the
/// paper's RU charges.
struct ReadCounters {
  std::atomic<std::uint64_t> quant_reads{0};
  std::atomic<std::uint64_t> adj_reads{0};
  std::atomic<std::uint64_t> fullprec_reads{0};

  void reset() {
    quant_reads.store(0, std::memory_order_relaxed);
    adj_reads.store(0, std::memory_order_relaxed);
    fullprec_reads.store(0, std::memory_order_relaxed);
  }

  std::string to_csv() const {
    std::string out = "counter_name,value\n";
    out += "quant_reads," +
           std::to_string(quant_reads.load(std::memory_order_relaxed)) + "\n";
    out += "adj_reads," +
           std::to_string(adj_reads.load(std::memory_order_relaxed)) + "\n";
    out += "fullprec_reads," +
           std::to_string(fullprec_reads.load(std::memory_order_relaxed)) +
           "\n";
    return out;
  }
};

}  // namespace kvann
