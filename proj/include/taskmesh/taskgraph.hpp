#pragma once

// Dynamic task-graph runtime: futures with continuations, joins, and a
// work-stealing worker pool. Everything else in taskmesh schedules through
// this module.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

namespace taskmesh::task {

class Scheduler;

/// Raised when an API precondition is violated (double-settle, run_until
/// from inside a task, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised by run_until when the scheduler went quiescent while the awaited
/// future is still pending: nothing left in the system can ever resolve it.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by spawn after shutdown.
class SpawnRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Priority : std::uint8_t { normal = 0, high = 1 };

/// Value carried by futures of tasks that return nothing.
struct Unit {};

namespace detail {

// Type-erased part of a future's shared state. Continuation callbacks run
// synchronously inside the settling thread and must only enqueue work.
struct StateBase {
  explicit StateBase(Scheduler* s) : sched(s) {}
  virtual ~StateBase() = default;

  enum class Status : std::uint8_t { pending, ready, failed };

  Scheduler* sched;
  mutable std::mutex mu;
  Status status = Status::pending;
  std::exception_ptr error;
  std::vector<std::function<void()>> on_settle;

  bool settled_relaxed() const {
    std::lock_guard lk(mu);
    return status != Status::pending;
  }

  // Registers cb to run exactly once, after the state settles. If the state
  // is already settled the callback runs immediately on this thread.
  void subscribe(std::function<void()> cb) {
    {
      std::lock_guard lk(mu);
      if (status == Status::pending) {
        on_settle.push_back(std::move(cb));
        return;
      }
    }
    cb();
  }

  void fail(std::exception_ptr ep) {
    std::vector<std::function<void()>> cbs;
    {
      std::lock_guard lk(mu);
      if (status != Status::pending)
        throw ContractError("future settled twice");
      status = Status::failed;
      error = std::move(ep);
      cbs.swap(on_settle);
    }
    for (auto& cb : cbs) cb();
  }
};

template <class T>
struct State : StateBase {
  using StateBase::StateBase;
  std::optional<T> value;

  void fulfill(T v) {
    std::vector<std::function<void()>> cbs;
    {
      std::lock_guard lk(mu);
      if (status != Status::pending)
        throw ContractError("future settled twice");
      value.emplace(std::move(v));
      status = Status::ready;
      cbs.swap(on_settle);
    }
    for (auto& cb : cbs) cb();
  }
};

template <class F>
using SpawnValue =
    std::conditional_t<std::is_void_v<std::invoke_result_t<F&>>, Unit,
                       std::invoke_result_t<F&>>;

template <class F, class T>
using ThenValue =
    std::conditional_t<std::is_void_v<std::invoke_result_t<F&, const T&>>,
                       Unit, std::invoke_result_t<F&, const T&>>;

}  // namespace detail

template <class T>
class Promise;

/// Handle to an eventual value; the composition point of the task graph.
/// Copyable and transferable between threads. State transitions pending ->
/// ready or pending -> failed exactly once.
template <class T>
class Future {
 public:
  Future() = default;

  bool valid() const { return st_ != nullptr; }
  bool is_pending() const { return !st_->settled_relaxed(); }

  bool is_ready() const {
    std::lock_guard lk(st_->mu);
    return st_->status == detail::StateBase::Status::ready;
  }
  bool is_failed() const {
    std::lock_guard lk(st_->mu);
    return st_->status == detail::StateBase::Status::failed;
  }

  /// Value of a settled future; rethrows its error. Contract error if still
  /// pending (use run_until or then to wait).
  const T& get() const {
    std::lock_guard lk(st_->mu);
    if (st_->status == detail::StateBase::Status::pending)
      throw ContractError("get() on pending future");
    if (st_->status == detail::StateBase::Status::failed)
      std::rethrow_exception(st_->error);
    return *st_->value;
  }

  /// Chains a continuation: cont runs exactly once with this future's value
  /// after it becomes ready. If this future fails, cont is skipped and the
  /// failure propagates to the returned future. The continuation is always
  /// enqueued as an ordinary task, never run inline, so arbitrarily long
  /// then-chains execute in bounded stack space.
  template <class F>
  Future<detail::ThenValue<F, T>> then(F cont,
                                       Priority pri = Priority::normal) const;

  /// Registers a callback run synchronously when this future settles. The
  /// callback must only enqueue work (internal composition hook).
  void subscribe(std::function<void()> cb) const { st_->subscribe(std::move(cb)); }

  Scheduler& scheduler() const { return *st_->sched; }

 private:
  friend class Promise<T>;
  friend class Scheduler;
  template <class U>
  friend class Future;
  template <class U>
  friend Future<std::vector<U>> when_all(Scheduler&, std::vector<Future<U>>);
  template <class U>
  friend Future<U> flatten(Future<Future<U>>);

  explicit Future(std::shared_ptr<detail::State<T>> st) : st_(std::move(st)) {}

  std::shared_ptr<detail::State<T>> st_;
};

/// Producer side of a future, for settling from outside the task graph
/// (transports, tests). Settling is thread-safe; double settle is a
/// contract error.
template <class T>
class Promise {
 public:
  explicit Promise(Scheduler& sched)
      : st_(std::make_shared<detail::State<T>>(&sched)) {}

  Future<T> future() const { return Future<T>(st_); }
  void set_value(T v) { st_->fulfill(std::move(v)); }
  void set_error(std::exception_ptr ep) { st_->fail(std::move(ep)); }

 private:
  std::shared_ptr<detail::State<T>> st_;
};

/// RAII guard telling the scheduler that work outside the task graph (an
/// in-flight network operation, typically) may still inject tasks; blocks
/// run_until's quiescence-based deadlock verdict while held.
class WorkToken {
 public:
  WorkToken() = default;
  explicit WorkToken(Scheduler* s);
  WorkToken(WorkToken&& o) noexcept : sched_(std::exchange(o.sched_, nullptr)) {}
  WorkToken& operator=(WorkToken&& o) noexcept {
    reset();
    sched_ = std::exchange(o.sched_, nullptr);
    return *this;
  }
  WorkToken(const WorkToken&) = delete;
  WorkToken& operator=(const WorkToken&) = delete;
  ~WorkToken() { reset(); }
  void reset();

 private:
  Scheduler* sched_ = nullptr;
};

/// Work-stealing scheduler. Each worker owns a double-ended queue (newest
/// first locally, oldest first when stolen); a global injection queue admits
/// work from non-worker threads. High-priority tasks are dequeued before
/// normal ones from the same queue.
class Scheduler {
 public:
  struct Counters {
    std::uint64_t tasks_spawned = 0;
    std::uint64_t steals = 0;
    std::uint64_t max_queue_depth = 0;
  };

  /// workers == 0 resolves to TASKMESH_WORKERS if set, else 1.
  explicit Scheduler(unsigned workers = 0);
  ~Scheduler();

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  unsigned worker_count() const { return static_cast<unsigned>(workers_.size()); }

  /// Spawns a nullary computation as a task; the returned future becomes
  /// ready with its result or failed with its error.
  template <class F>
  Future<detail::SpawnValue<F>> spawn(F fn, Priority pri = Priority::normal) {
    using V = detail::SpawnValue<F>;
    auto st = std::make_shared<detail::State<V>>(this);
    enqueue(
        [st, fn = std::move(fn)]() mutable {
          try {
            if constexpr (std::is_void_v<std::invoke_result_t<F&>>) {
              fn();
              st->fulfill(Unit{});
            } else {
              st->fulfill(fn());
            }
          } catch (...) {
            st->fail(std::current_exception());
          }
        },
        pri);
    return Future<V>(std::move(st));
  }

  Future<Unit> ready_future() { return make_ready(Unit{}); }

  template <class T>
  Future<T> make_ready(T v) {
    auto st = std::make_shared<detail::State<T>>(this);
    st->value.emplace(std::move(v));
    st->status = detail::StateBase::Status::ready;
    return Future<T>(std::move(st));
  }

  template <class T>
  Future<T> make_failed(std::exception_ptr ep) {
    auto st = std::make_shared<detail::State<T>>(this);
    st->error = std::move(ep);
    st->status = detail::StateBase::Status::failed;
    return Future<T>(std::move(st));
  }

  /// Drives the pool until f settles; returns its value or rethrows its
  /// error. May only be called from outside the task graph. If the scheduler
  /// goes quiescent (no task queued or running, no work token held) while f
  /// is pending, nothing can ever resolve it: DeadlockError.
  template <class T>
  T run_until(Future<T> f) {
    wait_settled(*f.st_);
    return f.get();
  }

  /// Enqueues a raw counted task. Used by future composition; prefer spawn.
  void enqueue(std::function<void()> body, Priority pri = Priority::normal);

  /// True when called from inside a worker-executed task.
  static bool on_worker_thread();

  void shutdown();
  bool is_shut_down() const { return stop_.load(std::memory_order_acquire); }

  Counters counters() const;

  std::uint64_t outstanding() const {
    return outstanding_.load(std::memory_order_acquire);
  }

 private:
  friend class WorkToken;
  struct Worker;

  void worker_loop(unsigned index);
  bool try_pop(unsigned self, std::function<void()>& out);
  void wait_settled(detail::StateBase& st);
  void note_enqueued();
  void maybe_notify_quiescent();

  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::thread> threads_;

  std::mutex inject_mu_;
  std::deque<std::function<void()>> inject_high_;
  std::deque<std::function<void()>> inject_normal_;

  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> outstanding_{0};
  std::atomic<std::uint64_t> tokens_{0};

  std::mutex sleep_mu_;
  std::condition_variable sleep_cv_;
  std::atomic<std::uint64_t> wake_epoch_{0};
  std::atomic<unsigned> sleepers_{0};

  std::mutex driver_mu_;
  std::condition_variable driver_cv_;

  std::atomic<std::uint64_t> tasks_spawned_{0};
  std::atomic<std::uint64_t> steals_{0};
  std::atomic<std::uint64_t> max_queue_depth_{0};
};

inline WorkToken::WorkToken(Scheduler* s) : sched_(s) {
  if (sched_) sched_->tokens_.fetch_add(1, std::memory_order_acq_rel);
}

inline void WorkToken::reset() {
  if (!sched_) return;
  Scheduler* s = std::exchange(sched_, nullptr);
  if (s->tokens_.fetch_sub(1, std::memory_order_acq_rel) == 1)
    s->maybe_notify_quiescent();
}

template <class T>
template <class F>
Future<detail::ThenValue<F, T>> Future<T>::then(F cont, Priority pri) const {
  using V = detail::ThenValue<F, T>;
  auto child = std::make_shared<detail::State<V>>(st_->sched);
  auto parent = st_;
  Scheduler* sched = st_->sched;
  parent->subscribe([parent, child, cont = std::move(cont), sched, pri]() mutable {
    sched->enqueue(
        [parent, child, cont = std::move(cont)]() mutable {
          if (parent->status == detail::StateBase::Status::failed) {
            child->fail(parent->error);
            return;
          }
          try {
            if constexpr (std::is_void_v<std::invoke_result_t<F&, const T&>>) {
              cont(*parent->value);
              child->fulfill(Unit{});
            } else {
              child->fulfill(cont(*parent->value));
            }
          } catch (...) {
            child->fail(std::current_exception());
          }
        },
        pri);
  });
  return Future<V>(std::move(child));
}

/// Joins a list of futures: ready with all values in input order once every
/// input is ready; failed with the first (by input order) failure if any
/// input fails. when_all of the empty list is immediately ready.
template <class T>
Future<std::vector<T>> when_all(Scheduler& sched, std::vector<Future<T>> fs) {
  auto child = std::make_shared<detail::State<std::vector<T>>>(&sched);
  if (fs.empty()) {
    child->value.emplace();
    child->status = detail::StateBase::Status::ready;
    return Future<std::vector<T>>(std::move(child));
  }
  struct Join {
    std::atomic<std::size_t> remaining;
    std::vector<Future<T>> inputs;
  };
  auto join = std::make_shared<Join>();
  join->remaining.store(fs.size(), std::memory_order_relaxed);
  join->inputs = std::move(fs);
  Scheduler* sp = &sched;
  for (auto& f : join->inputs) {
    f.subscribe([join, child, sp] {
      if (join->remaining.fetch_sub(1, std::memory_order_acq_rel) != 1) return;
      // Last settle: finalize as a task so deep join chains stay bounded.
      sp->enqueue([join, child] {
        for (auto& in : join->inputs) {
          if (in.st_->status == detail::StateBase::Status::failed) {
            child->fail(in.st_->error);
            return;
          }
        }
        std::vector<T> values;
        values.reserve(join->inputs.size());
        for (auto& in : join->inputs) values.push_back(*in.st_->value);
        child->fulfill(std::move(values));
      });
    });
  }
  return Future<std::vector<T>>(std::move(child));
}

/// Collapses Future<Future<T>> into Future<T>.
template <class T>
Future<T> flatten(Future<Future<T>> outer) {
  auto child = std::make_shared<detail::State<T>>(outer.st_->sched);
  auto ost = outer.st_;
  ost->subscribe([ost, child] {
    if (ost->status == detail::StateBase::Status::failed) {
      ost->sched->enqueue([ost, child] { child->fail(ost->error); });
      return;
    }
    auto inner = ost->value->st_;
    inner->subscribe([inner, child] {
      inner->sched->enqueue([inner, child] {
        if (inner->status == detail::StateBase::Status::failed)
          child->fail(inner->error);
        else
          child->fulfill(*static_cast<detail::State<T>*>(inner.get())->value);
      });
    });
  });
  return Future<T>(std::move(child));
}

}  // namespace taskmesh::task
