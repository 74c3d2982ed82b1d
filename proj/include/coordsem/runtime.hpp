#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coordsem/ids.hpp"

namespace coordsem::runtime {

enum class Mode { Deterministic, Concurrent };

struct Config {
    Mode mode = Mode::Deterministic;
    std::uint64_t seed = 1;
    unsigned workers = 0;  // 0 = hardware concurrency
    std::chrono::milliseconds timeout{30000};
    bool log = false;
};

// Resolves once the receiving unit has finished servicing the message.
class Handle {
public:
    [[nodiscard]] bool done() const { return s_->done.load(std::memory_order_acquire); }
    [[nodiscard]] bool ok() const { return done() && s_->error.empty(); }
    [[nodiscard]] const std::string& error() const { return s_->error; }

private:
    friend class Runtime;
    struct State {
        std::atomic<bool> done{false};
        std::string error;
    };
    std::shared_ptr<State> s_ = std::make_shared<State>();
};

struct LogEntry {
    std::uint64_t seq;
    UnitId from;
    UnitId to;
    std::string label;
};

struct QuiescenceTimeout : std::runtime_error {
    std::string dump;
    QuiescenceTimeout(const std::string& what, std::string d) : std::runtime_error(what), dump(std::move(d)) {}
};

// Isolated units with FIFO mailboxes. A message is a closure that may only
// touch the receiving unit's state; a unit services one message at a time.
class Runtime {
public:
    explicit Runtime(Config c = {});
    ~Runtime();
    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    UnitId spawn(std::string name);
    // Messages to a retired unit resolve with a routing error.
    void retire(UnitId u);

    Handle send(UnitId from, UnitId to, std::string label, std::function<void()> fn);

    // Blocks until no message is queued or in service. Rethrows the first
    // exception that escaped a message handler.
    void await_quiescence();

    [[nodiscard]] Mode mode() const { return cfg_.mode; }
    [[nodiscard]] std::vector<LogEntry> log() const;
    [[nodiscard]] std::size_t units() const;
    [[nodiscard]] std::uint64_t delivered() const { return delivered_; }
    [[nodiscard]] std::string dump() const;

    static constexpr UnitId client{0u};

private:
    struct Message {
        UnitId from;
        std::string label;
        std::function<void()> fn;
        std::shared_ptr<Handle::State> handle;
    };
    struct Unit {
        std::string name;
        std::deque<Message> mailbox;
        bool retired = false;
        bool scheduled = false;  // concurrent mode: queued or in service
    };

    void service(UnitId u, Message m);
    void run_deterministic();
    void worker();
    void fail(std::exception_ptr e);

    Config cfg_;
    mutable std::mutex mu_;
    std::condition_variable work_cv_;
    std::condition_variable idle_cv_;
    std::deque<Unit> units_;
    std::vector<std::uint32_t> ready_;   // deterministic mode: units with mail
    std::deque<std::uint32_t> runq_;     // concurrent mode
    std::size_t in_flight_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t delivered_ = 0;
    std::vector<LogEntry> log_;
    std::exception_ptr failure_;
    std::mt19937_64 rng_;
    bool stop_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace coordsem::runtime
