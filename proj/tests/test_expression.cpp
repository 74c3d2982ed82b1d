#include <doctest.h>

#include <map>

#include "coordsem/expression.hpp"

using namespace coordsem::expr;

namespace {

struct Fixed : Counter {
    std::map<std::pair<CountFn, int>, std::int64_t> v;
    std::int64_t count(CountFn fn, int state) const override {
        auto it = v.find({fn, state});
        return it == v.end() ? 0 : it->second;
    }
};

bool eval(const std::string& text, const Fixed& c) { return Expr::parse(text).evaluate(c); }

}  // namespace

TEST_CASE("counting expressions") {
    Fixed c;
    c.v[{CountFn::SourceIn, -1}] = 2;
    c.v[{CountFn::SourceAfter, -1}] = 1;
    c.v[{CountFn::SourceTotal, -1}] = 3;
    CHECK(eval("#SourceIn + #SourceAfter >= 1", c));
    CHECK(eval("#SourceIn + #SourceAfter = #SourceTotal", c));
    CHECK_FALSE(eval("#SourceIn > #SourceTotal", c));
    CHECK(eval("#SourceTotal - #SourceIn = 1", c));
    CHECK(eval("#TargetActive = 0", c));
    CHECK(eval("#SourceBefore < 1", c));
}

TEST_CASE("boolean connectives and precedence") {
    Fixed c;
    c.v[{CountFn::SourceIn, -1}] = 3;
    CHECK(eval("#SourceIn >= 3 or #SourceIn > 10 and #SourceIn < 0", c));
    CHECK_FALSE(eval("(#SourceIn >= 3 or #SourceIn > 10) and #SourceIn < 0", c));
    CHECK(eval("not (#SourceIn = 2)", c));
    CHECK(eval("#SourceIn >= 1 && !(#SourceIn = 0) || #SourceIn < 0", c));
    CHECK(eval("#SourceIn != 2", c));
    CHECK(eval("#SourceIn <= 3", c));
}

TEST_CASE("named states reach the counter as their index") {
    auto e = Expr::parse("#SourceIn(\"Reject Proposed\") + #SourceAfter >= 2");
    auto nodes = e.counting_nodes();
    REQUIRE(nodes.size() == 2);
    CHECK(nodes[0]->state == "Reject Proposed");
    CHECK(nodes[1]->state.empty());
    nodes[0]->state_index = 4;
    Fixed c;
    c.v[{CountFn::SourceIn, 4}] = 1;
    c.v[{CountFn::SourceAfter, -1}] = 1;
    CHECK(e.evaluate(c));
    c.v[{CountFn::SourceIn, 4}] = 0;
    CHECK_FALSE(e.evaluate(c));
}

TEST_CASE("copies are independent") {
    auto a = Expr::parse("#SourceIn(\"X\") >= 1");
    Expr b = a;
    b.counting_nodes()[0]->state_index = 7;
    CHECK(a.counting_nodes()[0]->state_index == -1);
}

TEST_CASE("canonical form parses back to itself") {
    for (const char* t : {"#SourceIn + #SourceAfter >= 1", "not (#SourceIn >= 3 or #SourceIn(\"A b\") > #SourceTotal)", "#TargetActive = 0 and 1 < 2"}) {
        auto c = Expr::parse(t).to_canonical();
        CHECK(Expr::parse(c).to_canonical() == c);
    }
}

TEST_CASE("parse errors report a column") {
    for (const char* t : {"", "#SourceIn >=", "#Nope >= 1", "(#SourceIn >= 1", "#SourceIn >= 1 )", "#SourceIn + >= 2", "#SourceIn(\"open >= 1"}) {
        CAPTURE(t);
        CHECK_THROWS_AS(Expr::parse(t), ParseError);
    }
    try {
        (void)Expr::parse("#SourceIn >= 1 )");
    } catch (const ParseError& e) {
        CHECK(e.column > 0);
    }
}
