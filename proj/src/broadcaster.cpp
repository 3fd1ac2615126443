#include "mandm/broadcaster.hpp"

#include "mandm/error.hpp"

namespace mandm {

Broadcaster::Broadcaster(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ValidationError("stream buffer must hold at least one message");
}

Broadcaster::Subscription::Next Broadcaster::Subscription::next(std::string& out, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    ready_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    // Drain queued messages before reporting a close.
    if (!queue_.empty()) {
        out = std::move(queue_.front());
        queue_.pop_front();
        return Next::Message;
    }
    return closed_ ? Next::Closed : Next::Timeout;
}

std::string Broadcaster::Subscription::close_reason() const {
    std::lock_guard lock(mutex_);
    return reason_;
}

bool Broadcaster::enqueue(Subscription& sub, const std::string& msg, std::size_t capacity) {
    std::lock_guard lock(sub.mutex_);
    if (sub.closed_) return false;
    if (sub.queue_.size() >= capacity) return false;
    sub.queue_.push_back(msg);
    sub.ready_.notify_all();
    return true;
}

void Broadcaster::close(Subscription& sub, const std::string& reason) {
    std::lock_guard lock(sub.mutex_);
    if (sub.closed_) return;
    sub.closed_ = true;
    // An overflowed subscriber must not see a gap followed by more data.
    if (reason == kOverflowReason) sub.queue_.clear();
    sub.reason_ = reason;
    sub.ready_.notify_all();
}

std::shared_ptr<Broadcaster::Subscription> Broadcaster::subscribe() {
    std::lock_guard lock(mutex_);
    auto sub = std::shared_ptr<Subscription>(new Subscription(next_id_++));
    bool base = false;
    if (last_full_) base = enqueue(*sub, *last_full_, capacity_);
    subs_.emplace(sub->id(), sub);
    has_base_.emplace(sub->id(), base);
    return sub;
}

void Broadcaster::unsubscribe(const std::shared_ptr<Subscription>& sub) {
    if (!sub) return;
    std::lock_guard lock(mutex_);
    subs_.erase(sub->id());
    has_base_.erase(sub->id());
    close(*sub, "unsubscribed");
}

void Broadcaster::publish(const std::string& full, const std::optional<std::string>& delta) {
    std::lock_guard lock(mutex_);
    last_full_ = full;
    for (auto it = subs_.begin(); it != subs_.end();) {
        auto& base = has_base_[it->first];
        const std::string& msg = (base && delta) ? *delta : full;
        if (!enqueue(*it->second, msg, capacity_)) {
            close(*it->second, std::string(kOverflowReason));
            has_base_.erase(it->first);
            it = subs_.erase(it);
            ++dropped_;
            continue;
        }
        base = true;
        ++it;
    }
}

void Broadcaster::close_all(const std::string& reason) {
    std::lock_guard lock(mutex_);
    for (auto& [id, sub] : subs_) close(*sub, reason);
    subs_.clear();
    has_base_.clear();
}

std::size_t Broadcaster::subscriber_count() const {
    std::lock_guard lock(mutex_);
    return subs_.size();
}

std::uint64_t Broadcaster::dropped_count() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

}  // namespace mandm
