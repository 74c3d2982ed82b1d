#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>

#include "coordsem/runtime.hpp"

using namespace coordsem;
using namespace coordsem::runtime;

namespace {

Config mode(Mode m, std::uint64_t seed = 1) {
    Config c;
    c.mode = m;
    c.seed = seed;
    c.workers = 4;
    c.log = true;
    return c;
}

}  // namespace

TEST_CASE("per sender-receiver pair delivery is FIFO in both modes") {
    for (Mode m : {Mode::Deterministic, Mode::Concurrent}) {
        Runtime rt(mode(m, 3));
        std::vector<UnitId> senders, receivers;
        for (int i = 0; i < 4; ++i) senders.push_back(rt.spawn("s"));
        for (int i = 0; i < 3; ++i) receivers.push_back(rt.spawn("r"));
        std::mutex mu;
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<int>> seen;
        for (UnitId s : senders)
            rt.send(Runtime::client, s, "go", [&, s] {
                for (int k = 0; k < 50; ++k)
                    for (UnitId r : receivers)
                        rt.send(s, r, "n", [&, s, r, k] {
                            std::lock_guard lk(mu);
                            seen[{s.v, r.v}].push_back(k);
                        });
            });
        rt.await_quiescence();
        CHECK(seen.size() == senders.size() * receivers.size());
        for (const auto& [pair, ks] : seen) {
            REQUIRE(ks.size() == 50);
            for (int k = 0; k < 50; ++k) CHECK(ks[k] == k);
        }
    }
}

TEST_CASE("a unit services one message at a time") {
    Runtime rt(mode(Mode::Concurrent));
    UnitId u = rt.spawn("u");
    std::atomic<int> inside{0};
    std::atomic<bool> overlap{false};
    for (int i = 0; i < 200; ++i)
        rt.send(Runtime::client, u, "m", [&] {
            if (inside.fetch_add(1) != 0) overlap = true;
            inside.fetch_sub(1);
        });
    rt.await_quiescence();
    CHECK_FALSE(overlap.load());
    CHECK(rt.delivered() == 200);
}

TEST_CASE("handles resolve after servicing, routing errors for retired units") {
    Runtime rt(mode(Mode::Deterministic));
    UnitId u = rt.spawn("u");
    int x = 0;
    auto h = rt.send(Runtime::client, u, "inc", [&] { ++x; });
    CHECK_FALSE(h.done());
    rt.await_quiescence();
    CHECK(h.ok());
    CHECK(x == 1);
    rt.retire(u);
    auto r = rt.send(Runtime::client, u, "inc", [&] { ++x; });
    CHECK(r.done());
    CHECK_FALSE(r.ok());
    CHECK(r.error().find("no route") != std::string::npos);
    auto unknown = rt.send(Runtime::client, UnitId(77u), "x", [] {});
    CHECK_FALSE(unknown.ok());
    rt.await_quiescence();
    CHECK(x == 1);
}

TEST_CASE("messages queued before retirement are refused at service") {
    Runtime rt(mode(Mode::Deterministic));
    UnitId a = rt.spawn("a");
    UnitId b = rt.spawn("b");
    int ran = 0;
    Handle late;
    rt.send(Runtime::client, a, "retire b", [&] {
        late = rt.send(a, b, "late", [&] { ++ran; });
        rt.retire(b);
    });
    rt.await_quiescence();
    CHECK(ran == 0);
    CHECK(late.done());
    CHECK_FALSE(late.ok());
}

TEST_CASE("the first handler exception surfaces at quiescence") {
    for (Mode m : {Mode::Deterministic, Mode::Concurrent}) {
        Runtime rt(mode(m));
        UnitId u = rt.spawn("u");
        auto h = rt.send(Runtime::client, u, "boom", [] { throw std::runtime_error("boom"); });
        CHECK_THROWS_WITH_AS(rt.await_quiescence(), "boom", std::runtime_error);
        CHECK(h.error() == "boom");
        rt.send(Runtime::client, u, "fine", [] {});
        CHECK_NOTHROW(rt.await_quiescence());
    }
}

TEST_CASE("deterministic schedules replay exactly per seed") {
    auto run = [](std::uint64_t seed) {
        Runtime rt(mode(Mode::Deterministic, seed));
        std::vector<UnitId> us;
        for (int i = 0; i < 5; ++i) us.push_back(rt.spawn("u"));
        for (UnitId u : us)
            rt.send(Runtime::client, u, "fan", [&rt, &us, u] {
                for (UnitId v : us)
                    if (v != u) rt.send(u, v, "ping", [] {});
            });
        rt.await_quiescence();
        std::vector<std::tuple<std::uint64_t, std::uint32_t, std::uint32_t, std::string>> out;
        for (const auto& e : rt.log()) out.emplace_back(e.seq, e.from.v, e.to.v, e.label);
        return out;
    };
    CHECK(run(5) == run(5));
    bool differs = false;
    for (std::uint64_t s = 6; s < 12 && !differs; ++s) differs = run(s) != run(5);
    CHECK(differs);
}

TEST_CASE("endless ping-pong times out with a dump") {
    Config c = mode(Mode::Deterministic);
    c.timeout = std::chrono::milliseconds(50);
    c.log = false;
    Runtime rt(c);
    UnitId a = rt.spawn("a"), b = rt.spawn("b");
    std::function<void(UnitId, UnitId)> bounce = [&](UnitId from, UnitId to) { rt.send(from, to, "ball", [&, from, to] { bounce(to, from); }); };
    bounce(a, b);
    try {
        rt.await_quiescence();
        FAIL("expected a timeout");
    } catch (const QuiescenceTimeout& e) {
        CHECK(e.dump.find("ball") != std::string::npos);
    }
}
