#include "taskmesh/taskgraph.hpp"

#include <algorithm>
#include <cstdlib>

namespace taskmesh::task {

namespace {

// Identifies the worker executing the current thread, if any.
struct ThreadSlot {
  Scheduler* sched = nullptr;
  unsigned index = 0;
};
thread_local ThreadSlot tl_slot;

unsigned resolve_worker_count(unsigned requested) {
  if (const char* env = std::getenv("TASKMESH_WORKERS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace

struct Scheduler::Worker {
  std::mutex mu;
  std::deque<std::function<void()>> high;
  std::deque<std::function<void()>> normal;
  std::uint64_t max_depth = 0;

  // Owner takes the newest task; thieves take the oldest.
  bool pop_local(std::function<void()>& out) {
    std::lock_guard lk(mu);
    if (!high.empty()) {
      out = std::move(high.back());
      high.pop_back();
      return true;
    }
    if (!normal.empty()) {
      out = std::move(normal.back());
      normal.pop_back();
      return true;
    }
    return false;
  }

  bool pop_stolen(std::function<void()>& out) {
    std::lock_guard lk(mu);
    if (!high.empty()) {
      out = std::move(high.front());
      high.pop_front();
      return true;
    }
    if (!normal.empty()) {
      out = std::move(normal.front());
      normal.pop_front();
      return true;
    }
    return false;
  }

  void push(std::function<void()> body, Priority pri) {
    std::lock_guard lk(mu);
    (pri == Priority::high ? high : normal).push_back(std::move(body));
    max_depth = std::max<std::uint64_t>(max_depth, high.size() + normal.size());
  }
};

Scheduler::Scheduler(unsigned workers) {
  unsigned n = resolve_worker_count(workers);
  workers_.reserve(n);
  for (unsigned i = 0; i < n; ++i) workers_.push_back(std::make_unique<Worker>());
  threads_.reserve(n);
  for (unsigned i = 0; i < n; ++i)
    threads_.emplace_back([this, i] { worker_loop(i); });
}

Scheduler::~Scheduler() { shutdown(); }

void Scheduler::shutdown() {
  bool expected = false;
  if (!stop_.compare_exchange_strong(expected, true)) return;
  {
    std::lock_guard lk(sleep_mu_);
    wake_epoch_.fetch_add(1, std::memory_order_seq_cst);
    sleep_cv_.notify_all();
  }
  for (auto& t : threads_)
    if (t.joinable()) t.join();
}

bool Scheduler::on_worker_thread() { return tl_slot.sched != nullptr; }

void Scheduler::enqueue(std::function<void()> body, Priority pri) {
  if (stop_.load(std::memory_order_acquire))
    throw SpawnRejected("spawn after scheduler shutdown");
  outstanding_.fetch_add(1, std::memory_order_acq_rel);
  tasks_spawned_.fetch_add(1, std::memory_order_relaxed);
  if (tl_slot.sched == this) {
    workers_[tl_slot.index]->push(std::move(body), pri);
  } else {
    std::lock_guard lk(inject_mu_);
    (pri == Priority::high ? inject_high_ : inject_normal_)
        .push_back(std::move(body));
    std::uint64_t depth = inject_high_.size() + inject_normal_.size();
    std::uint64_t seen = max_queue_depth_.load(std::memory_order_relaxed);
    while (depth > seen &&
           !max_queue_depth_.compare_exchange_weak(seen, depth,
                                                   std::memory_order_relaxed)) {
    }
  }
  note_enqueued();
}

void Scheduler::note_enqueued() {
  wake_epoch_.fetch_add(1, std::memory_order_seq_cst);
  if (sleepers_.load(std::memory_order_seq_cst) > 0) {
    std::lock_guard lk(sleep_mu_);
    sleep_cv_.notify_one();
  }
}

bool Scheduler::try_pop(unsigned self, std::function<void()>& out) {
  if (workers_[self]->pop_local(out)) return true;
  {
    std::lock_guard lk(inject_mu_);
    if (!inject_high_.empty()) {
      out = std::move(inject_high_.front());
      inject_high_.pop_front();
      return true;
    }
    if (!inject_normal_.empty()) {
      out = std::move(inject_normal_.front());
      inject_normal_.pop_front();
      return true;
    }
  }
  const unsigned n = static_cast<unsigned>(workers_.size());
  for (unsigned k = 1; k < n; ++k) {
    unsigned victim = (self + k) % n;
    if (workers_[victim]->pop_stolen(out)) {
      steals_.fetch_add(1, std::memory_order_relaxed);
      return true;
    }
  }
  return false;
}

void Scheduler::worker_loop(unsigned index) {
  tl_slot.sched = this;
  tl_slot.index = index;
  std::function<void()> task;
  while (true) {
    if (try_pop(index, task)) {
      task();
      task = nullptr;
      if (outstanding_.fetch_sub(1, std::memory_order_acq_rel) == 1)
        maybe_notify_quiescent();
      continue;
    }
    std::uint64_t epoch = wake_epoch_.load(std::memory_order_seq_cst);
    if (stop_.load(std::memory_order_acquire)) break;
    // One more scan after reading the epoch closes the race with enqueue.
    if (try_pop(index, task)) {
      task();
      task = nullptr;
      if (outstanding_.fetch_sub(1, std::memory_order_acq_rel) == 1)
        maybe_notify_quiescent();
      continue;
    }
    std::unique_lock lk(sleep_mu_);
    sleepers_.fetch_add(1, std::memory_order_seq_cst);
    sleep_cv_.wait(lk, [&] {
      return wake_epoch_.load(std::memory_order_seq_cst) != epoch ||
             stop_.load(std::memory_order_acquire);
    });
    sleepers_.fetch_sub(1, std::memory_order_seq_cst);
  }
  tl_slot.sched = nullptr;
}

void Scheduler::maybe_notify_quiescent() {
  if (outstanding_.load(std::memory_order_acquire) != 0) return;
  if (tokens_.load(std::memory_order_acquire) != 0) return;
  std::lock_guard lk(driver_mu_);
  driver_cv_.notify_all();
}

void Scheduler::wait_settled(detail::StateBase& st) {
  if (on_worker_thread())
    throw ContractError("run_until called from inside a task");
  auto settled = std::make_shared<bool>(false);
  st.subscribe([this, settled] {
    std::lock_guard lk(driver_mu_);
    *settled = true;
    driver_cv_.notify_all();
  });
  std::unique_lock lk(driver_mu_);
  driver_cv_.wait(lk, [&] {
    if (*settled) return true;
    return outstanding_.load(std::memory_order_acquire) == 0 &&
           tokens_.load(std::memory_order_acquire) == 0;
  });
  if (!*settled)
    throw DeadlockError(
        "scheduler quiescent while awaited future is still pending");
}

Scheduler::Counters Scheduler::counters() const {
  Counters c;
  c.tasks_spawned = tasks_spawned_.load(std::memory_order_relaxed);
  c.steals = steals_.load(std::memory_order_relaxed);
  c.max_queue_depth = max_queue_depth_.load(std::memory_order_relaxed);
  for (auto& w : workers_) {
    std::lock_guard lk(w->mu);
    c.max_queue_depth = std::max(c.max_queue_depth, w->max_depth);
  }
  return c;
}

}  // namespace taskmesh::task
