#include "taskmesh/bufferpool.hpp"

#include <cstring>
#include <utility>

namespace taskmesh::mem {

BufferLease::BufferLease(BufferLease&& o) noexcept
    : pool_(std::exchange(o.pool_, nullptr)),
      data_(std::exchange(o.data_, nullptr)),
      owned_(std::move(o.owned_)),
      size_(o.size_),
      capacity_(o.capacity_),
      origin_(o.origin_),
      tag_(std::move(o.tag_)),
      released_(std::exchange(o.released_, true)) {}

BufferLease& BufferLease::operator=(BufferLease&& o) noexcept {
  if (this == &o) return *this;
  if (!released_ && owned_) {
    // Returning the old buffer can't throw: release() only throws on
    // double-release, which released_ rules out here.
    release();
  }
  pool_ = std::exchange(o.pool_, nullptr);
  data_ = std::exchange(o.data_, nullptr);
  owned_ = std::move(o.owned_);
  size_ = o.size_;
  capacity_ = o.capacity_;
  origin_ = o.origin_;
  tag_ = std::move(o.tag_);
  released_ = std::exchange(o.released_, true);
  return *this;
}

BufferLease::~BufferLease() {
  if (!released_ && owned_) release();
}

void BufferLease::release() {
  if (released_) throw PoolError("buffer released twice");
  released_ = true;
  if (pool_) {
    pool_->give_back(std::move(owned_), capacity_, tag_);
  } else {
    owned_.reset();  // pool disabled: deallocate outright
  }
  data_ = nullptr;
  pool_ = nullptr;
}

BufferLease BufferPool::acquire(std::size_t bytes, std::string_view tag) {
  if (bytes == 0) throw PoolError("acquire of zero bytes");
  BufferLease lease;
  lease.size_ = bytes;
  lease.tag_.assign(tag);
  lease.released_ = false;

  if (!enabled_) {
    lease.owned_ = std::make_unique<std::byte[]>(bytes);
    lease.capacity_ = bytes;
    lease.origin_ = LeaseOrigin::fresh;
    lease.data_ = lease.owned_.get();
    std::memset(lease.data_, 0, lease.capacity_);
    std::lock_guard lk(mu_);
    stats_.fresh_allocations += 1;
    return lease;
  }

  {
    std::lock_guard lk(mu_);
    auto per_tag = free_.find(tag);
    if (per_tag != free_.end()) {
      auto it = per_tag->second.lower_bound(bytes);
      if (it != per_tag->second.end()) {
        lease.owned_ = std::move(it->second);
        lease.capacity_ = it->first;
        lease.origin_ = LeaseOrigin::recycled;
        per_tag->second.erase(it);
        stats_.free_count -= 1;
        stats_.live += 1;
        stats_.reused += 1;
      }
    }
    if (!lease.owned_) {
      stats_.total_created += 1;
      stats_.fresh_allocations += 1;
      stats_.live += 1;
    }
  }
  if (!lease.owned_) {
    lease.owned_ = std::make_unique<std::byte[]>(bytes);
    lease.capacity_ = bytes;
    lease.origin_ = LeaseOrigin::fresh;
  }
  lease.pool_ = this;
  lease.data_ = lease.owned_.get();
  std::memset(lease.data_, 0, lease.capacity_);
  return lease;
}

void BufferPool::give_back(std::unique_ptr<std::byte[]> data,
                           std::size_t capacity, const std::string& tag) {
  std::lock_guard lk(mu_);
  free_[tag].emplace(capacity, std::move(data));
  stats_.live -= 1;
  stats_.free_count += 1;
}

PoolStats BufferPool::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

void BufferPool::drain() {
  std::lock_guard lk(mu_);
  std::uint64_t freed = 0;
  for (auto& [tag, buffers] : free_) freed += buffers.size();
  free_.clear();
  stats_.free_count = 0;
  stats_.total_created -= freed;
}

}  // namespace taskmesh::mem
