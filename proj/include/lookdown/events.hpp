#pragma once

#include "measures.hpp"
#include "random.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

namespace lookdown {

enum class EventKind { Kingman, Jump };

// Levels are 1-based; block is strictly increasing with at least two entries.
struct ReproductionEvent {
  double time = 0.0;
  std::vector<long> block;
  EventKind kind = EventKind::Kingman;
  double frequency = 0.0;  // jump events only
};

struct EventStream {
  double horizon = 0.0;
  long N = 0;
  std::vector<ReproductionEvent> events;
};

// Given a frequency x, the Bernoulli(x) selection over {1..N} conditioned on
// at least two successes. Sampled directly: the second success j2 has
// pmf proportional to (k-1)(1-x)^(k-2), j1 is uniform below it, and the
// levels above j2 are free Bernoulli(x) draws.
inline void sample_conditioned_block(double x, long N, Rng& g, std::vector<long>& block) {
  block.clear();
  if (x >= 1.0) {
    for (long k = 1; k <= N; ++k) block.push_back(k);
    return;
  }
  const double q = 1.0 - x;
  const double total = p_two_or_more(N, x) / (x * x);
  const double target = uniform01(g) * total;
  double acc = 0.0, qpow = 1.0;
  long j2 = N;
  for (long k = 2; k <= N; ++k) {
    acc += static_cast<double>(k - 1) * qpow;
    if (acc >= target) {
      j2 = k;
      break;
    }
    qpow *= q;
  }
  block.push_back(uniform_int(g, 1, j2 - 1));
  block.push_back(j2);
  const double log_q = std::log1p(-x);
  long k = j2;
  for (;;) {
    const double skip = std::floor(std::log(uniform01(g)) / log_q);
    if (skip >= static_cast<double>(N - k)) break;
    k += 1 + static_cast<long>(skip);
    block.push_back(k);
  }
}

// Unconditioned Bernoulli(x) block; empty when fewer than two levels are hit.
inline void sample_free_block(double x, long N, Rng& g, std::vector<long>& block) {
  block.clear();
  if (bernoulli(g, p_two_or_more(N, x))) sample_conditioned_block(x, N, g, block);
}

// Appends each level of first..N independently with probability x.
inline void sample_bernoulli_levels(double x, long first, long N, Rng& g, std::vector<long>& block) {
  if (x <= 0.0 || first > N) return;
  if (x >= 1.0) {
    for (long k = first; k <= N; ++k) block.push_back(k);
    return;
  }
  const double lq = std::log1p(-x);
  for (long k = first - 1;;) {
    k += 1 + static_cast<long>(std::floor(std::log(uniform01(g)) / lq));
    if (k > N) return;
    block.push_back(k);
  }
}

// Lazy source of the events that touch at least two of the first N levels.
class EventSource {
 public:
  EventSource(const LambdaSpec& spec, long N) : N_(N) {
    spec.validate();
    if (N < 2) throw ConfigError("truncation level must be at least 2");
    rate_ = pushing_rate(spec, N);
    kingman_rate_ = spec.c * choose2(static_cast<double>(N));
    if (!spec.nu.is_null()) jump_.emplace(spec, N);
  }

  double rate() const { return rate_; }
  long N() const { return N_; }

  double next_time(double t, Rng& g) const {
    if (rate_ <= 0.0) return INFINITY;
    return t + exponential(g, rate_);
  }

  void sample_mark(Rng& g, ReproductionEvent& ev) const {
    if (!jump_ || uniform01(g) * rate_ < kingman_rate_) {
      ev.kind = EventKind::Kingman;
      ev.frequency = 0.0;
      long a = uniform_int(g, 1, N_);
      long b = uniform_int(g, 1, N_ - 1);
      if (b >= a) ++b;
      if (a > b) std::swap(a, b);
      ev.block.assign({a, b});
    } else {
      ev.kind = EventKind::Jump;
      ev.frequency = (*jump_)(g);
      sample_conditioned_block(ev.frequency, N_, g, ev.block);
    }
  }

 private:
  long N_;
  double rate_ = 0.0;
  double kingman_rate_ = 0.0;
  std::optional<JumpFrequencySampler> jump_;
};

inline EventStream sample_event_stream(const LambdaSpec& spec, long N, double horizon, Rng& g) {
  EventSource src(spec, N);
  EventStream s{horizon, N, {}};
  for (double t = src.next_time(0.0, g); t <= horizon; t = src.next_time(t, g)) {
    ReproductionEvent ev;
    ev.time = t;
    src.sample_mark(g, ev);
    s.events.push_back(std::move(ev));
  }
  return s;
}

// True when the event touches at least two of the first K levels.
inline bool touches_two_of(const ReproductionEvent& ev, long K) {
  return ev.block.size() >= 2 && ev.block[1] <= K;
}

inline EventStream restrict_stream(const EventStream& s, long K) {
  if (K < 1 || K > s.N) throw DomainError("restriction level must lie in 1..N");
  EventStream out{s.horizon, s.N, {}};
  for (const auto& ev : s.events)
    if (!touches_two_of(ev, K)) out.events.push_back(ev);
  return out;
}

// Events seen by the first M levels of an N-level stream.
inline EventStream truncate_stream(const EventStream& s, long M) {
  if (M < 2 || M > s.N) throw DomainError("window must lie in 2..N");
  EventStream out{s.horizon, M, {}};
  for (const auto& ev : s.events) {
    if (!touches_two_of(ev, M)) continue;
    ReproductionEvent e = ev;
    while (!e.block.empty() && e.block.back() > M) e.block.pop_back();
    out.events.push_back(std::move(e));
  }
  return out;
}

// New level of the occupant of old_level after the event.
inline long relabel_level(long old_level, const std::vector<long>& block) {
  if (old_level < 1) throw DomainError("level must be positive");
  if (!block.empty() && old_level == block.front()) return old_level;
  long k = old_level;
  for (std::size_t i = 1; i < block.size(); ++i)
    if (block[i] <= k) ++k;
  return k;
}

inline void write_stream_csv(std::ostream& os, const EventStream& s) {
  os << "time,kind,frequency,block\n";
  for (const auto& ev : s.events) {
    os << ev.time << ',' << (ev.kind == EventKind::Kingman ? "kingman" : "jump") << ','
       << ev.frequency << ',';
    for (std::size_t i = 0; i < ev.block.size(); ++i) os << (i ? ";" : "") << ev.block[i];
    os << '\n';
  }
}

}  // namespace lookdown
