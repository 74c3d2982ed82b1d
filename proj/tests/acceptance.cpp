// One PASS/FAIL line per acceptance criterion. Criteria backed by unit test
// cases run those cases through doctest; performance is measured here.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <fmt/core.h>

#include <algorithm>
#include <sstream>

#include "coordsem/harness.hpp"
#include "support.hpp"

using namespace coordsem;

namespace {

std::size_t cases_started = 0;

struct Counter : doctest::IReporter {
    explicit Counter(const doctest::ContextOptions&) {}
    void report_query(const doctest::QueryData&) override {}
    void test_run_start() override {}
    void test_run_end(const doctest::TestRunStats&) override {}
    void test_case_start(const doctest::TestCaseData&) override { ++cases_started; }
    void test_case_reenter(const doctest::TestCaseData&) override {}
    void test_case_end(const doctest::CurrentTestCaseStats&) override {}
    void test_case_exception(const doctest::TestCaseException&) override {}
    void subcase_start(const doctest::SubcaseSignature&) override {}
    void subcase_end() override {}
    void log_assert(const doctest::AssertData&) override {}
    void log_message(const doctest::MessageData&) override {}
    void test_case_skipped(const doctest::TestCaseData&) override {}
};

DOCTEST_REGISTER_LISTENER("counter", 1, Counter);

struct Verdict {
    bool pass = false;
    std::string detail;
};

Verdict run_cases(const std::vector<std::string>& names) {
    std::string filter;
    for (const auto& n : names) filter += (filter.empty() ? "" : ",") + n;
    std::ostringstream sink;
    doctest::Context ctx;
    ctx.setOption("test-case", filter.c_str());
    ctx.setCout(&sink);
    cases_started = 0;
    int rc = ctx.run();
    Verdict v{rc == 0 && cases_started >= names.size(), fmt::format("{} test cases", cases_started)};
    if (rc != 0) {
        std::string out = sink.str();
        v.detail += "\n" + out.substr(0, std::min<std::size_t>(out.size(), 2000));
    }
    return v;
}

Verdict performance() {
    auto m = testkit::load("recruitment.model");
    auto s = harness::load_sequence(testkit::source_dir() + "/scenarios/recruitment-1.json");
    auto r = harness::measure(m, s);
    double worst = 0, slowest_total = 0;
    for (double x : r.with.action_ms) worst = std::max(worst, x);
    for (double x : r.with.totals) slowest_total = std::max(slowest_total, x);
    double factor = r.overhead();
    bool ok = r.failures == 0 && worst < 100 && slowest_total < 10'000 && factor <= 3;
    return {ok, fmt::format("{} runs, slowest action {:.3f} ms (< 100), slowest total {:.2f} ms (< 10000), overhead {:.2f}x (<= 3), failures {}",
                            r.with.runs(), worst, slowest_total, factor, r.failures)};
}

}  // namespace

int main() {
    struct Criterion {
        int n;
        std::string what;
        std::vector<std::string> cases;
    };
    const std::vector<Criterion> criteria = {
        {1, "golden staged cascade", {"staged fragment reproduces the golden marking sequences"}},
        {2,
         "constraints 1-7 enforced",
         {"constraint 1:*", "constraint 2:*", "constraint 3:*", "constraint 4:*", "constraint 5: acceptance*", "constraint 5: unfavourable*",
          "constraint 6: only one*", "constraint 6 holds*", "constraint 7:*", "a regressing review*"}},
        {3, "single-application recruitment end to end", {"the single-application recruitment fills the position"}},
        {4,
         "components equal the brute-force evaluator",
         {"component markings equal the brute-force evaluator on random structures", "random structures keep maintained membership equal to the oracle"}},
        {5, "L/H maintenance", {"maintained L and H survive a thousand random structural operations", "random link and unlink keep L and H equal to the traversal"}},
        {6,
         "cascade soundness",
         {"bundled scenarios stay sound after every action", "component markings equal the brute-force evaluator on random structures",
          "unlinking the only path drops the member"}},
        {7, "elimination round trip", {"eliminate then restore returns to the earlier snapshot", "eliminated entities return only through Inactive"}},
        {8,
         "determinism and concurrency",
         {"deterministic replay is bit-identical", "concurrent schedules of commuting actions are marking-equivalent", "deterministic schedules replay exactly per seed"}},
        {9, "desk-scale performance", {}},
        {10, "exercise submission pattern", {"submissions wait for the deadline and advance through Submit"}},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Verdict v = c.cases.empty() ? performance() : run_cases(c.cases);
        failed += !v.pass;
        fmt::print("{} criterion {}: {} ({})\n", v.pass ? "PASS" : "FAIL", c.n, c.what, v.detail);
    }
    return failed == 0 ? 0 : 1;
}
