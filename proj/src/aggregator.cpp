#include "taskmesh/aggregator.hpp"

#include <cstring>

namespace taskmesh::agg {

ExecutorLease& ExecutorLease::operator=(ExecutorLease&& o) noexcept {
  if (this != &o) {
    reset();
    pool_ = std::exchange(o.pool_, nullptr);
    index_ = o.index_;
  }
  return *this;
}

void ExecutorLease::reset() {
  if (pool_) std::exchange(pool_, nullptr)->release_slot(index_);
}

ExecutorPool::ExecutorPool(std::size_t count) : in_flight_(count, 0) {
  if (count == 0) throw AggError("executor pool must be non-empty");
}

std::size_t ExecutorPool::select_locked() {
  std::uint64_t best = in_flight_[next_ % in_flight_.size()];
  for (std::uint64_t v : in_flight_) best = std::min(best, v);
  // Ties break round-robin: first minimal counter at or after the cursor.
  const std::size_t n = in_flight_.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t i = (next_ + k) % n;
    if (in_flight_[i] == best) {
      next_ = i + 1;
      return i;
    }
  }
  return 0;  // unreachable
}

ExecutorLease ExecutorPool::acquire() {
  std::lock_guard lk(mu_);
  std::size_t i = select_locked();
  in_flight_[i] += 1;
  return ExecutorLease(this, i);
}

std::size_t ExecutorPool::pick_index() {
  std::lock_guard lk(mu_);
  return select_locked();
}

ExecutorLease ExecutorPool::acquire_at(std::size_t index) {
  std::lock_guard lk(mu_);
  in_flight_.at(index) += 1;
  return ExecutorLease(this, index);
}

std::uint64_t ExecutorPool::in_flight(std::size_t index) const {
  std::lock_guard lk(mu_);
  return in_flight_.at(index);
}

void ExecutorPool::release_slot(std::size_t index) {
  std::lock_guard lk(mu_);
  in_flight_[index] -= 1;
}

void KernelRegistry::add(KernelSpec spec) {
  if (!kernels_.emplace(spec.id, spec).second)
    throw AggError("kernel id registered twice");
}

const KernelSpec& KernelRegistry::at(std::uint32_t id) const {
  auto it = kernels_.find(id);
  if (it == kernels_.end()) throw AggError("unknown kernel id");
  return it->second;
}

AggregationRegion::AggregationRegion(task::Scheduler& sched,
                                     ExecutorPool& execs, mem::BufferPool& mem,
                                     KernelSpec kernel, std::size_t max_slices,
                                     std::size_t capacity_slices,
                                     AggCounters* counters)
    : sched_(sched),
      execs_(execs),
      kernel_(std::move(kernel)),
      max_slices_(max_slices),
      capacity_(capacity_slices),
      counters_(counters) {
  if (max_slices_ == 0) throw AggError("max_slices must be positive");
  if (capacity_ == 0) throw AggError("region capacity must be positive");
  buffers_ = std::make_shared<detail::RegionBuffers>();
  buffers_->in_slice = kernel_.in_slice;
  buffers_->out_slice = kernel_.out_slice;
  buffers_->in = mem.acquire(capacity_ * kernel_.in_slice * sizeof(double),
                             "agg.pack.in");
  buffers_->out = mem.acquire(capacity_ * kernel_.out_slice * sizeof(double),
                              "agg.pack.out");
  pinned_ = execs_.pick_index();
}

std::size_t AggregationRegion::submitted() const {
  std::lock_guard lk(mu_);
  return total_;
}

task::Future<SliceOutput> AggregationRegion::submit_slice(
    std::span<const double> input) {
  std::lock_guard lk(mu_);
  if (launched_) throw AggError("submit_slice after final flush");
  if (input.size() != kernel_.in_slice)
    throw AggError("slice length does not match the region's slice size");
  if (total_ == capacity_) throw AggError("region capacity exhausted");

  std::size_t idx = total_++;
  double* dst = buffers_->in.as<double>().data() + idx * kernel_.in_slice;
  std::memcpy(dst, input.data(), input.size() * sizeof(double));
  batch_promises_.emplace_back(sched_);
  auto fut = batch_promises_.back().future();

  bool full = batch_promises_.size() == max_slices_;
  bool idle = execs_.in_flight(pinned_) == 0;
  if (full || idle) launch_pending_locked();
  return fut;
}

void AggregationRegion::flush() {
  std::lock_guard lk(mu_);
  if (!batch_promises_.empty()) launch_pending_locked();
  launched_ = true;
}

void AggregationRegion::launch_pending_locked() {
  std::size_t first = batch_first_;
  std::size_t count = batch_promises_.size();
  auto promises = std::make_shared<std::vector<task::Promise<SliceOutput>>>(
      std::move(batch_promises_));
  batch_promises_.clear();
  batch_first_ = first + count;

  if (counters_) {
    counters_->launches.fetch_add(1, std::memory_order_relaxed);
    counters_->fused_slices.fetch_add(count, std::memory_order_relaxed);
    if (count == 1)
      counters_->solo_launches.fetch_add(1, std::memory_order_relaxed);
  }

  auto lease = std::make_shared<ExecutorLease>(execs_.acquire_at(pinned_));
  auto buffers = buffers_;
  auto kernel = kernel_;
  sched_.enqueue([buffers, kernel, first, count, promises,
                  lease = std::move(lease)]() mutable {
    const double* in =
        buffers->in.as<double>().data() + first * kernel.in_slice;
    double* out = buffers->out.as<double>().data() + first * kernel.out_slice;
    try {
      kernel.fn(in, out, kernel.in_slice, kernel.out_slice, count);
      lease->reset();  // launched work settles before results are handed out
      for (std::size_t s = 0; s < count; ++s) {
        SliceOutput r;
        r.buffers = buffers;
        r.index = first + s;
        (*promises)[s].set_value(std::move(r));
      }
    } catch (...) {
      lease->reset();
      for (auto& p : *promises) p.set_error(std::current_exception());
    }
  });

  // Launches rebalance: pin the next batch to the now-least-loaded executor.
  pinned_ = execs_.pick_index();
}

}  // namespace taskmesh::agg
