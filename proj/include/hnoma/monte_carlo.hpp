#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "hnoma/config.hpp"
#include "hnoma/core_model.hpp"
#include "hnoma/estimate.hpp"

namespace hnoma {

struct SamplerSpec {
  std::uint64_t seed = 1;
  std::uint64_t n_samples = 1'000'000;
  std::uint64_t chunk_size = 1u << 16;
  unsigned workers = 0;  // 0: one per hardware thread

  void validate() const {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (chunk_size < 1) throw ConfigError("chunk_size must be >= 1");
  }
  std::uint64_t chunk_count() const { return (n_samples + chunk_size - 1) / chunk_size; }
};

struct ChannelRealization {
  std::vector<double> gains;  // ascending squared channel magnitudes
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline void insertion_sort(std::span<double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double key = v[i];
    std::size_t j = i;
    for (; j > 0 && v[j - 1] > key; --j) v[j] = v[j - 1];
    v[j] = key;
  }
}

}  // namespace detail

// Ordered unit-mean exponential gains for one chunk. The stream is a pure
// function of (seed, chunk index), so results do not depend on scheduling.
class OrderedGainSampler {
 public:
  OrderedGainSampler(std::uint64_t seed, std::uint64_t chunk_index)
      : engine_(detail::splitmix64(seed ^ detail::splitmix64(chunk_index))) {}

  void draw(std::span<double> gains) {
    for (double& g : gains) g = exp_(engine_);
    detail::insertion_sort(gains);
  }

 private:
  std::mt19937_64 engine_;
  std::exponential_distribution<double> exp_{1.0};
};

// Runs fn(chunk_index, first_sample, count) over every chunk on a worker pool
// and returns the per-chunk results in chunk order.
template <class Result, class ChunkFn>
std::vector<Result> run_chunks(const SamplerSpec& spec, ChunkFn&& fn) {
  spec.validate();
  const std::uint64_t chunks = spec.chunk_count();
  std::vector<Result> out(chunks);
  std::atomic<std::uint64_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) return;
      const std::uint64_t first = c * spec.chunk_size;
      out[c] = fn(c, first, std::min(spec.chunk_size, spec.n_samples - first));
    }
  };
  unsigned workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, chunks));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return out;
}

inline std::vector<ChannelRealization> sample_ordered_gains(int users, const SamplerSpec& spec) {
  if (users < 2) throw ConfigError("users must be >= 2");
  auto chunks = run_chunks<std::vector<ChannelRealization>>(
      spec, [&](std::uint64_t c, std::uint64_t, std::uint64_t count) {
        OrderedGainSampler sampler(spec.seed, c);
        std::vector<ChannelRealization> block(count);
        for (auto& r : block) {
          r.gains.resize(static_cast<std::size_t>(users));
          sampler.draw(r.gains);
        }
        return block;
      });
  std::vector<ChannelRealization> all;
  all.reserve(spec.n_samples);
  for (auto& block : chunks)
    for (auto& r : block) all.push_back(std::move(r));
  return all;
}

// Binomial plug-in standard error; an empty or full tally reports 3/N instead of 0.
inline ProbabilityEstimate binomial_estimate(std::uint64_t hits, std::uint64_t n) {
  ProbabilityEstimate e;
  e.method = Method::monte_carlo;
  e.n_samples = n;
  e.value = static_cast<double>(hits) / static_cast<double>(n);
  if (hits == 0 || hits == n) {
    e.std_error = 3.0 / static_cast<double>(n);
  } else {
    e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
  }
  return e;
}

// Calls visit(h_m_sq, h_n_sq) for every realization of a chunk and sums the
// returned tallies.
template <class Tally, class Visit>
Tally tally_chunks(const SystemConfig& cfg, const SamplerSpec& spec, Visit visit) {
  const auto users = static_cast<std::size_t>(cfg.users);
  const auto im = static_cast<std::size_t>(cfg.m - 1);
  const auto in = static_cast<std::size_t>(cfg.n - 1);
  auto per_chunk = run_chunks<Tally>(spec, [&](std::uint64_t c, std::uint64_t, std::uint64_t count) {
    OrderedGainSampler sampler(spec.seed, c);
    std::vector<double> gains(users);
    Tally t{};
    for (std::uint64_t i = 0; i < count; ++i) {
      sampler.draw(gains);
      t += visit(gains[im], gains[in]);
    }
    return t;
  });
  Tally total{};
  for (const auto& t : per_chunk) total += t;
  return total;
}

inline ProbabilityEstimate mc_probability(const SystemConfig& cfg, Scheme scheme,
                                          const SamplerSpec& spec) {
  cfg.validate();
  if (scheme == Scheme::oma) throw DomainError("Monte Carlo estimate needs a hybrid scheme");
  const auto hits = tally_chunks<std::uint64_t>(cfg, spec, [&](double hm, double hn) {
    return hybrid_vs_oma_indicator(scheme, cfg, hm, hn) ? std::uint64_t{1} : std::uint64_t{0};
  });
  return binomial_estimate(hits, spec.n_samples);
}

struct RegionTally {
  std::array<std::uint64_t, 4> counts{};  // P11, P12, P21, P22
  std::uint64_t hsic_hits = 0;            // indicator count on the same stream

  RegionTally& operator+=(const RegionTally& o) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    hsic_hits += o.hsic_hits;
    return *this;
  }
};

struct RegionDecomposition {
  RegionTally tally;
  std::uint64_t n_samples = 0;
  std::array<ProbabilityEstimate, 4> regions;  // P11, P12, P21, P22
  ProbabilityEstimate hsic;

  std::uint64_t region_hits() const {
    return tally.counts[0] + tally.counts[1] + tally.counts[2] + tally.counts[3];
  }
};

inline RegionDecomposition mc_region_decomposition(const SystemConfig& cfg, const SamplerSpec& spec) {
  cfg.validate();
  RegionDecomposition out;
  out.n_samples = spec.n_samples;
  out.tally = tally_chunks<RegionTally>(cfg, spec, [&](double hm, double hn) {
    RegionTally t;
    const Region r = lemma1_region(cfg, hm, hn);
    if (r != Region::none) t.counts[static_cast<std::size_t>(r)] = 1;
    t.hsic_hits = hybrid_vs_oma_indicator(Scheme::hsic_hybrid, cfg, hm, hn) ? 1 : 0;
    return t;
  });
  for (std::size_t i = 0; i < 4; ++i) out.regions[i] = binomial_estimate(out.tally.counts[i], spec.n_samples);
  out.hsic = binomial_estimate(out.tally.hsic_hits, spec.n_samples);
  return out;
}

}  // namespace hnoma
