#pragma once

// Executor pool and dynamic work-aggregation regions: many small compatible
// kernel launches are fused into fewer large launches, guided by the load of
// the executor the region is pinned to. Slices are packed contiguously at
// offset index*slice_size, so a fused launch is bitwise equivalent to the
// same slices launched solo.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "taskmesh/bufferpool.hpp"
#include "taskmesh/taskgraph.hpp"

namespace taskmesh::agg {

class AggError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ExecutorPool;

/// RAII in-flight slot on one executor: acquired from the least-loaded
/// executor, released when the launched work settles. Tests also hold these
/// to pin executors busy.
class ExecutorLease {
 public:
  ExecutorLease() = default;
  ExecutorLease(ExecutorLease&& o) noexcept
      : pool_(std::exchange(o.pool_, nullptr)), index_(o.index_) {}
  ExecutorLease& operator=(ExecutorLease&& o) noexcept;
  ExecutorLease(const ExecutorLease&) = delete;
  ExecutorLease& operator=(const ExecutorLease&) = delete;
  ~ExecutorLease() { reset(); }

  std::size_t index() const { return index_; }
  void reset();

 private:
  friend class ExecutorPool;
  ExecutorLease(ExecutorPool* p, std::size_t i) : pool_(p), index_(i) {}
  ExecutorPool* pool_ = nullptr;
  std::size_t index_ = 0;
};

/// Pre-allocated pool of executors with per-executor in-flight counters.
/// Acquisition always picks a minimal-counter executor, ties broken by a
/// round-robin cursor, and never fails.
class ExecutorPool {
 public:
  explicit ExecutorPool(std::size_t count);

  std::size_t size() const { return in_flight_.size(); }

  /// Least-loaded selection; increments the chosen in-flight counter for
  /// the lease's lifetime.
  ExecutorLease acquire();

  /// Same selection rule without taking a slot. Aggregation regions use
  /// this to pin the executor their next launch will run on.
  std::size_t pick_index();

  /// Takes a slot on a specific executor (a region launching on the
  /// executor it is pinned to).
  ExecutorLease acquire_at(std::size_t index);

  std::uint64_t in_flight(std::size_t index) const;

 private:
  friend class ExecutorLease;
  std::size_t select_locked();
  void release_slot(std::size_t index);

  mutable std::mutex mu_;
  std::vector<std::uint64_t> in_flight_;
  std::size_t next_ = 0;
};

/// Counters shared by every region of one locality.
struct AggCounters {
  std::atomic<std::uint64_t> launches{0};
  std::atomic<std::uint64_t> fused_slices{0};
  std::atomic<std::uint64_t> solo_launches{0};
};

/// A fused launch body: one call processes slice_count slices packed at
/// offsets index*slice elements in both buffers.
using KernelFn = std::function<void(const double* in, double* out,
                                    std::size_t in_slice,
                                    std::size_t out_slice,
                                    std::size_t slice_count)>;

struct KernelSpec {
  std::uint32_t id = 0;
  std::size_t in_slice = 0;   // elements per input slice
  std::size_t out_slice = 0;  // elements per output slice
  KernelFn fn;
};

/// Per-locality table of fusable kernels keyed by id.
class KernelRegistry {
 public:
  void add(KernelSpec spec);
  const KernelSpec& at(std::uint32_t id) const;

 private:
  std::map<std::uint32_t, KernelSpec> kernels_;
};

namespace detail {
struct RegionBuffers {
  mem::BufferLease in;
  mem::BufferLease out;
  std::size_t in_slice = 0;
  std::size_t out_slice = 0;
};
}  // namespace detail

/// View of one slice's results; keeps the launch arena alive.
struct SliceOutput {
  std::shared_ptr<const detail::RegionBuffers> buffers;
  std::size_t index = 0;

  std::span<const double> values() const {
    return buffers->out.as<double>().subspan(index * buffers->out_slice,
                                             buffers->out_slice);
  }
};

/// Work-aggregation region for one kernel. Slices accumulate until either
/// max_slices are queued or the pinned executor is idle at submit time, in
/// which case whatever is queued launches immediately. flush() launches the
/// remainder and finalizes the region (idempotent; submitting afterwards is
/// a contract error).
class AggregationRegion {
 public:
  AggregationRegion(task::Scheduler& sched, ExecutorPool& execs,
                    mem::BufferPool& mem, KernelSpec kernel,
                    std::size_t max_slices, std::size_t capacity_slices,
                    AggCounters* counters = nullptr);

  task::Future<SliceOutput> submit_slice(std::span<const double> input);
  void flush();

  std::size_t submitted() const;

 private:
  void launch_pending_locked();

  task::Scheduler& sched_;
  ExecutorPool& execs_;
  KernelSpec kernel_;
  std::size_t max_slices_;
  std::size_t capacity_;
  AggCounters* counters_;

  mutable std::mutex mu_;
  std::shared_ptr<detail::RegionBuffers> buffers_;
  std::size_t pinned_ = 0;
  std::size_t total_ = 0;          // slices submitted so far
  std::size_t batch_first_ = 0;    // start of the open batch
  std::vector<task::Promise<SliceOutput>> batch_promises_;
  bool launched_ = false;          // final flush happened
};

}  // namespace taskmesh::agg
