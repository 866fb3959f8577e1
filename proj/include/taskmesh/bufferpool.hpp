#pragma once

// Recycling pool for scratch buffers. Released buffers stay allocated and go
// back to a per-tag free list, so steady-state timesteps allocate nothing.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace taskmesh::mem {

class PoolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class LeaseOrigin : std::uint8_t { fresh, recycled };

struct PoolStats {
  std::uint64_t total_created = 0;  // buffers currently in existence
  std::uint64_t live = 0;           // leased out
  std::uint64_t free_count = 0;     // parked in free lists
  std::uint64_t reused = 0;         // cumulative recycled acquires
  std::uint64_t fresh_allocations = 0;  // cumulative allocations
};

class BufferPool;

/// Single-owner handle to a pooled buffer. Contents are zeroed on acquire.
/// capacity() may exceed the requested size when a larger free buffer was
/// recycled. Explicit release() twice is a contract error; the destructor
/// releases automatically if still live.
class BufferLease {
 public:
  BufferLease() = default;
  BufferLease(BufferLease&&) noexcept;
  BufferLease& operator=(BufferLease&&) noexcept;
  BufferLease(const BufferLease&) = delete;
  BufferLease& operator=(const BufferLease&) = delete;
  ~BufferLease();

  std::span<std::byte> bytes() { return {data_, size_}; }
  std::span<const std::byte> bytes() const { return {data_, size_}; }

  template <class T>
  std::span<T> as() {
    return {reinterpret_cast<T*>(data_), size_ / sizeof(T)};
  }
  template <class T>
  std::span<const T> as() const {
    return {reinterpret_cast<const T*>(data_), size_ / sizeof(T)};
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  LeaseOrigin origin() const { return origin_; }
  bool live() const { return pool_ != nullptr || owned_ != nullptr; }

  void release();

 private:
  friend class BufferPool;
  BufferPool* pool_ = nullptr;          // null for pool-disabled leases
  std::byte* data_ = nullptr;
  std::unique_ptr<std::byte[]> owned_;  // storage travels with the lease
  std::size_t size_ = 0;                // requested bytes
  std::size_t capacity_ = 0;
  LeaseOrigin origin_ = LeaseOrigin::fresh;
  std::string tag_;
  bool released_ = false;
};

/// Thread-safe recycling pool. acquire returns the smallest free buffer of
/// sufficient capacity under the same tag (first-fit-smallest), creating a
/// fresh one only when none fits. With enabled=false every acquire is a
/// fresh allocation and release deallocates (A/B benchmarking mode).
class BufferPool {
 public:
  explicit BufferPool(bool enabled = true) : enabled_(enabled) {}

  BufferLease acquire(std::size_t bytes, std::string_view tag);
  PoolStats stats() const;

  /// Frees every parked buffer; live leases are unaffected.
  void drain();

  bool enabled() const { return enabled_; }

 private:
  friend class BufferLease;
  void give_back(std::unique_ptr<std::byte[]> data, std::size_t capacity,
                 const std::string& tag);
  void note_disabled_release();

  bool enabled_;
  mutable std::mutex mu_;
  std::map<std::string, std::multimap<std::size_t, std::unique_ptr<std::byte[]>>,
           std::less<>>
      free_;
  PoolStats stats_;
};

}  // namespace taskmesh::mem
