#include "coordsem/runtime.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace coordsem::runtime {

Runtime::Runtime(Config c) : cfg_(c), rng_(c.seed) {
    units_.push_back({"client", {}, false, false});
    if (cfg_.mode == Mode::Concurrent) {
        unsigned n = cfg_.workers ? cfg_.workers : std::max(2u, std::thread::hardware_concurrency());
        for (unsigned i = 0; i < n; ++i) workers_.emplace_back([this] { worker(); });
    }
}

Runtime::~Runtime() {
    {
        std::lock_guard lk(mu_);
        stop_ = true;
    }
    work_cv_.notify_all();
    for (auto& t : workers_) t.join();
}

UnitId Runtime::spawn(std::string name) {
    std::lock_guard lk(mu_);
    UnitId id(units_.size());
    units_.push_back({std::move(name), {}, false, false});
    return id;
}

void Runtime::retire(UnitId u) {
    std::lock_guard lk(mu_);
    units_.at(u.idx()).retired = true;
}

std::size_t Runtime::units() const {
    std::lock_guard lk(mu_);
    return units_.size();
}

Handle Runtime::send(UnitId from, UnitId to, std::string label, std::function<void()> fn) {
    Handle h;
    std::unique_lock lk(mu_);
    if (!to.valid() || to.idx() >= units_.size() || units_[to.idx()].retired || to == client) {
        h.s_->error = fmt::format("no route to unit {}", to.v);
        h.s_->done.store(true, std::memory_order_release);
        return h;
    }
    auto& u = units_[to.idx()];
    u.mailbox.push_back({from, std::move(label), std::move(fn), h.s_});
    ++in_flight_;
    if (cfg_.mode == Mode::Deterministic) {
        if (u.mailbox.size() == 1) ready_.push_back(to.v);
    } else if (!u.scheduled) {
        u.scheduled = true;
        runq_.push_back(to.v);
        lk.unlock();
        work_cv_.notify_one();
    }
    return h;
}

void Runtime::fail(std::exception_ptr e) {
    if (!failure_) failure_ = e;
}

// Runs one message outside the lock. Handlers may send.
void Runtime::service(UnitId u, Message m) {
    bool retired;
    {
        std::lock_guard lk(mu_);
        retired = units_[u.idx()].retired;
        if (cfg_.log && !retired) log_.push_back({++seq_, m.from, u, m.label});
    }
    if (retired) {
        m.handle->error = fmt::format("unit {} retired", u.v);
    } else {
        try {
            m.fn();
        } catch (const std::exception& e) {
            m.handle->error = e.what();
            std::lock_guard lk(mu_);
            fail(std::current_exception());
        }
    }
    m.handle->done.store(true, std::memory_order_release);
}

void Runtime::run_deterministic() {
    auto start = std::chrono::steady_clock::now();
    for (std::uint64_t n = 0;; ++n) {
        if ((n & 1023) == 1023 && std::chrono::steady_clock::now() - start > cfg_.timeout)
            throw QuiescenceTimeout("quiescence not reached", dump());
        Message m;
        UnitId u;
        {
            std::lock_guard lk(mu_);
            if (ready_.empty()) return;
            std::size_t i = rng_() % ready_.size();
            u = UnitId(ready_[i]);
            auto& box = units_[u.idx()].mailbox;
            m = std::move(box.front());
            box.pop_front();
            if (box.empty()) {
                ready_[i] = ready_.back();
                ready_.pop_back();
            }
        }
        service(u, std::move(m));
        std::lock_guard lk(mu_);
        --in_flight_;
        ++delivered_;
    }
}

void Runtime::worker() {
    std::unique_lock lk(mu_);
    for (;;) {
        work_cv_.wait(lk, [&] { return stop_ || !runq_.empty(); });
        if (stop_) return;
        UnitId u(runq_.front());
        runq_.pop_front();
        auto& box = units_[u.idx()].mailbox;
        Message m = std::move(box.front());
        box.pop_front();
        lk.unlock();
        service(u, std::move(m));
        lk.lock();
        --in_flight_;
        ++delivered_;
        auto& unit = units_[u.idx()];
        if (!unit.mailbox.empty()) {
            runq_.push_back(u.v);
            work_cv_.notify_one();
        } else {
            unit.scheduled = false;
        }
        if (in_flight_ == 0) idle_cv_.notify_all();
    }
}

void Runtime::await_quiescence() {
    if (cfg_.mode == Mode::Deterministic) {
        run_deterministic();
    } else {
        std::unique_lock lk(mu_);
        if (!idle_cv_.wait_for(lk, cfg_.timeout, [&] { return in_flight_ == 0; })) {
            lk.unlock();
            throw QuiescenceTimeout("quiescence not reached", dump());
        }
    }
    std::exception_ptr e;
    {
        std::lock_guard lk(mu_);
        std::swap(e, failure_);
    }
    if (e) std::rethrow_exception(e);
}

std::vector<LogEntry> Runtime::log() const {
    std::lock_guard lk(mu_);
    return log_;
}

std::string Runtime::dump() const {
    std::lock_guard lk(mu_);
    std::string out = fmt::format("in flight: {}\n", in_flight_);
    for (std::size_t i = 0; i < units_.size(); ++i) {
        const auto& u = units_[i];
        if (u.mailbox.empty()) continue;
        out += fmt::format("unit {} '{}': {} queued, head '{}'\n", i, u.name, u.mailbox.size(), u.mailbox.front().label);
    }
    return out;
}

}  // namespace coordsem::runtime
