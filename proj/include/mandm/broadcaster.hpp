#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace mandm {

inline constexpr std::string_view kOverflowReason = "backpressure: subscriber buffer overflow";

/// Fan-out of serialized stream messages to live subscribers.
///
/// Each subscriber owns a bounded queue. publish() never waits on a
/// subscriber: one whose queue is full is closed with kOverflowReason and
/// dropped, and the others are untouched. A subscriber that joins after the
/// first publish starts with the most recent full message.
class Broadcaster {
public:
    class Subscription {
    public:
        enum class Next : std::uint8_t { Message, Timeout, Closed };

        /// Waits up to `timeout` for the next message.
        Next next(std::string& out, std::chrono::milliseconds timeout);
        std::string close_reason() const;
        std::uint64_t id() const noexcept { return id_; }

    private:
        friend class Broadcaster;
        explicit Subscription(std::uint64_t id) : id_(id) {}

        std::uint64_t id_;
        mutable std::mutex mutex_;
        std::condition_variable ready_;
        std::deque<std::string> queue_;
        bool closed_ = false;
        std::string reason_;
    };

    explicit Broadcaster(std::size_t capacity);

    std::shared_ptr<Subscription> subscribe();
    void unsubscribe(const std::shared_ptr<Subscription>& sub);

    /// `full` is queued for subscribers without a base yet and remembered
    /// for later joiners; everyone else gets `delta` when given, else `full`.
    void publish(const std::string& full, const std::optional<std::string>& delta = std::nullopt);

    void close_all(const std::string& reason);
    std::size_t subscriber_count() const;
    std::uint64_t dropped_count() const;

private:
    static bool enqueue(Subscription& sub, const std::string& msg, std::size_t capacity);
    static void close(Subscription& sub, const std::string& reason);

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::map<std::uint64_t, std::shared_ptr<Subscription>> subs_;
    std::map<std::uint64_t, bool> has_base_;
    std::optional<std::string> last_full_;
    std::uint64_t next_id_ = 1;
    std::uint64_t dropped_ = 0;
};

}  // namespace mandm
