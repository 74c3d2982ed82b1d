#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "coordsem/engine.hpp"
#include "coordsem/rules.hpp"
#include "support.hpp"

using namespace coordsem;
using namespace coordsem::rules;
using coordgraph::CoordGraph;

namespace {

// A coordination graph driven directly, without units: the test plays the
// part of the structure and process units.
struct Standalone {
    model::ModelPtr m;
    InstanceId jo{1u};
    CoordGraph g;
    RuleEngine re;
    std::uint32_t next = 2, rel = 1;
    std::map<std::string, std::uint32_t> per_type;

    explicit Standalone(Options o = {}) : m(testkit::load("recruitment.model")), g(m, CpTypeIdx(0u), jo), re(g, o) {
        join(entry(jo, "Job Offer"), std::nullopt);
        re.run_cascade();
    }

    coordgraph::InstanceEntry entry(InstanceId id, const std::string& type) {
        TypeIdx t = *m->type_index(type);
        return {id, t, type + " " + std::to_string(++per_type[type]), lifecycle::StateView(m->type(t)).markings(), 0};
    }
    void join(coordgraph::InstanceEntry e, std::optional<InstanceId> parent) {
        std::vector<coordgraph::RelationEntry> rs;
        if (parent) rs.push_back({RelationId(rel++), e.id, *parent});
        InstanceId id = e.id;
        auto d = g.add_instances({std::move(e)}, rs);
        re.raise_structure(EventType::ProcessCreated, {EntityKind::Instance, id.v}, d);
    }
    InstanceId add(const std::string& type, InstanceId parent) {
        InstanceId id(next++);
        join(entry(id, type), parent);
        re.run_cascade();
        return id;
    }
    // Stands in for a process unit whose view changed; no cascade.
    void set(InstanceId w, const std::string& state) {
        auto& v = g.view_mut(w);
        v.commit(*v.type().state(state), false);
    }
    void commit(InstanceId w, const std::string& state) {
        set(w, state);
        re.raise_state_changed(w);
        re.run_cascade();
    }
    std::vector<Marking> markings() const {
        std::vector<Marking> out;
        for (std::size_t i = 0; i < g.step_count(); ++i) out.push_back(g.step(StepId(i)).m);
        for (std::size_t i = 0; i < g.port_count(); ++i) out.push_back(g.port(PortId(i)).m);
        for (std::size_t i = 0; i < g.comp_count(); ++i) out.push_back(g.comp(CompId(i)).m);
        return out;
    }
    StepId step(InstanceId w, const std::string& state) const {
        for (StepId s : g.steps_of(w))
            if (g.step_name(s).ends_with(":" + state)) return s;
        FAIL("no step " << state);
        return {};
    }
    PortId port(InstanceId w, const std::string& state, const std::string& p) const { return g.step(step(w, state)).ports.at(port_slot(state, p)); }
    std::size_t port_slot(const std::string& state, const std::string& p) const {
        for (const auto& st : g.type().steps)
            if (st.id.ends_with(":" + state))
                for (std::size_t i = 0; i < st.ports.size(); ++i)
                    if (g.type().ports[st.ports[i].idx()].id.ends_with("#" + p)) return i;
        FAIL("no port " << p);
        return 0;
    }
    CompId comp_into(PortId p, const std::string& trans) const {
        for (CompId c : g.port(p).in)
            if (g.type().transitions[g.comp(c).trans.idx()].id == trans) return c;
        FAIL("no component " << trans);
        return {};
    }
};

engine::Engine traced(const char* model) {
    engine::Config c;
    c.rules.trace = true;
    return engine::Engine(testkit::load(model), c);
}

}  // namespace

TEST_CASE("rule catalog names are unique and documented") {
    const auto& c = catalog();
    REQUIRE(c.size() > 10);
    std::set<std::string> names;
    for (const auto& r : c) {
        CHECK(names.insert(r.name).second);
        CHECK_FALSE(r.effects.empty());
    }
    for (const char* n : {"step-completed-and-split", "port-notify-step", "comp-notify-ports", "state-changed-notify", "step-revive", "comp-activate-and-evaluate"})
        CHECK(names.count(n));
    auto text = catalog_text();
    for (const auto& r : c) CHECK(text.find(r.name) != std::string::npos);
    // per trigger and context, notification rules come first
    std::set<std::pair<EventType, EntityKind>> has_update;
    for (const auto& r : c) {
        auto key = std::pair{r.trigger, r.context};
        if (r.cls == RuleClass::Update)
            has_update.insert(key);
        else
            CHECK_MESSAGE(!has_update.count(key), r.name);
    }
}

TEST_CASE("start step completes and the published port activates") {
    Standalone s;
    auto& g = s.g;
    CHECK(g.step(s.step(s.jo, "Preparation")).m == Marking::Completed);
    PortId pub = s.port(s.jo, "Published", "a");
    CHECK(g.port(pub).m == Marking::Active);
    CHECK(g.step(s.step(s.jo, "Published")).m == Marking::Active);
    CHECK(g.step(s.step(s.jo, "Closed")).m == Marking::Inactive);
    CHECK(s.re.self_consistency_violations().empty());
}

TEST_CASE("sole incoming component completed activates port then step") {
    Options o;
    o.trace = true;
    Standalone s(o);
    s.commit(s.jo, "Published");
    auto app = s.add("Application", s.jo);
    PortId p = s.port(app, "Creation", "a");
    CHECK(s.g.comp(s.comp_into(p, "apply")).m == Marking::Completed);
    auto seq = testkit::marking_sequences(s.re.trace());
    CHECK(seq.at("port Application 1:Creation#a") == std::vector<std::string>{"Inactive", "Active", "Completed"});
    CHECK(seq.at("step Application 1:Creation") == std::vector<std::string>{"Inactive", "Completed"});
    // Creation is the active state, so the step goes on to Completed
    CHECK(s.g.step(s.step(app, "Creation")).m == Marking::Completed);
    CHECK(s.g.step(s.step(app, "Sent")).m == Marking::Active);
}

TEST_CASE("empty source set leaves the bottom-up condition false") {
    Standalone s;
    PortId closed = s.port(s.jo, "Closed", "a");
    CompId c = s.comp_into(closed, "close");
    CHECK_FALSE(s.re.condition(c));
    CHECK(s.re.count(c, expr::CountFn::SourceTotal, -1) == 0);
    CHECK(s.g.comp(c).m == Marking::Inactive);
    CHECK(s.g.port(closed).m == Marking::Inactive);
}

TEST_CASE("bottom-up counts read the mirrored views") {
    Standalone s;
    s.commit(s.jo, "Published");
    auto a1 = s.add("Application", s.jo);
    auto a2 = s.add("Application", s.jo);
    s.add("Application", s.jo);
    CompId c = s.comp_into(s.port(s.jo, "Closed", "a"), "close");
    s.commit(a1, "Sent");
    s.commit(a2, "Sent");
    s.commit(a2, "Checked");
    using expr::CountFn;
    CHECK(s.re.count(c, CountFn::SourceTotal, -1) == 3);
    CHECK(s.re.count(c, CountFn::SourceIn, -1) == 1);
    CHECK(s.re.count(c, CountFn::SourceAfter, -1) == 1);
    CHECK(s.re.count(c, CountFn::SourceBefore, -1) == 1);
    CHECK(s.re.condition(c));
    CHECK(s.g.comp(c).m == Marking::Completed);
}

TEST_CASE("a skipped state eliminates its step") {
    Standalone s;
    s.commit(s.jo, "Published");
    auto app = s.add("Application", s.jo);
    s.commit(app, "Sent");
    auto rev = s.add("Review", app);
    for (const char* st : {"Preparation", "Applicant Assessment", "Invite Proposed"}) s.commit(rev, st);
    CHECK(s.g.step(s.step(rev, "Reject Proposed")).m == Marking::Eliminated);
    CHECK(s.g.step(s.step(rev, "Invite Proposed")).m == Marking::Completed);
    CHECK(s.re.self_consistency_violations().empty());
}

TEST_CASE("a second Update request raises no second event") {
    Standalone s;
    EntityRef st{EntityKind::Step, s.step(s.jo, "Closed").v};
    s.re.mark_update(st);
    auto q = s.re.snapshot().pending;
    CHECK(s.re.marking(st) == Marking::Update);
    s.re.mark_update(st);
    CHECK(s.re.snapshot().pending == q);
    s.re.run_cascade();
    CHECK(s.re.marking(st) == Marking::Inactive);
    CHECK(s.re.snapshot().stable());
}

TEST_CASE("events addressed to removed entities are dropped") {
    Standalone s;
    s.commit(s.jo, "Published");
    auto app = s.add("Application", s.jo);
    StepId dead = s.step(app, "Sent");
    auto d = s.g.remove_instances({app});
    s.re.raise_structure(EventType::ProcessRemoved, {EntityKind::Instance, app.v}, d);
    s.re.run_cascade();
    auto before = s.re.dropped_events();
    s.re.raise({EventType::MarkingChanged, Origin::Int, {EntityKind::Step, dead.v}, Marking::Active, 0, {}});
    s.re.run_cascade();
    CHECK(s.re.dropped_events() == before + 1);
    CHECK(s.re.self_consistency_violations().empty());
}

TEST_CASE("cascades beyond the budget abort with a dump") {
    Options o;
    o.budget_factor = 0;
    Standalone s(o);
    s.commit(s.jo, "Published");
    std::vector<coordgraph::InstanceEntry> many;
    std::vector<coordgraph::RelationEntry> rels;
    for (int i = 0; i < 200; ++i) {
        InstanceId id(s.next++);
        many.push_back(s.entry(id, "Application"));
        rels.push_back({RelationId(s.rel++), id, s.jo});
    }
    auto d = s.g.add_instances(many, rels);
    s.re.raise_structure(EventType::ProcessCreated, {EntityKind::Instance, many.front().id.v}, d);
    try {
        s.re.run_cascade();
        FAIL("budget not enforced");
    } catch (const BudgetExceeded& e) {
        CHECK(e.dump.find("Application 1:Sent") != std::string::npos);
    }
}

TEST_CASE("commuting state changes reach the same markings in any order") {
    auto build = [](Standalone& s, std::vector<InstanceId>& apps) {
        s.commit(s.jo, "Published");
        for (int i = 0; i < 4; ++i) apps.push_back(s.add("Application", s.jo));
        s.add("Review", apps[0]);
        s.add("Review", apps[1]);
    };
    Standalone ref;
    std::vector<InstanceId> ra;
    build(ref, ra);
    for (InstanceId a : ra) ref.commit(a, "Sent");
    auto expected = ref.markings();

    std::vector<int> order{0, 1, 2, 3};
    int perms = 0;
    do {
        CAPTURE(perms);
        for (bool batched : {false, true}) {
            Standalone s;
            std::vector<InstanceId> apps;
            build(s, apps);
            for (int i : order) {
                s.set(apps[i], "Sent");
                s.re.raise_state_changed(apps[i]);
                if (!batched) s.re.run_cascade();
            }
            s.re.run_cascade();
            CHECK(s.markings() == expected);
            CHECK(s.re.self_consistency_violations().empty());
        }
        ++perms;
    } while (std::next_permutation(order.begin(), order.end()));
    CHECK(perms == 24);
}

TEST_CASE("trace records name rule, context and effects") {
    auto e = traced("recruitment.model");
    auto jo = e.instantiate("Job Offer");
    e.clear_trace();
    e.commit(jo, "Published");
    auto t = e.trace();
    REQUIRE_FALSE(t.empty());
    auto line = format(t.front());
    CHECK(line.front() == '(');
    CHECK(line.back() == ')');
    CHECK(line.find(t.front().rule) != std::string::npos);
    CHECK(line.find(t.front().context) != std::string::npos);
    auto seq = testkit::marking_sequences(t);
    CHECK(seq.at("step Job Offer 1:Published") == std::vector<std::string>{"Active", "Completed"});
    CHECK(seq.at("comp apply@Job Offer 1:Published") == std::vector<std::string>{"Inactive", "Active", "Completed"});
}

TEST_CASE("step completion activates every outgoing component first") {
    auto e = traced("recruitment.model");
    auto jo = e.instantiate("Job Offer");
    e.commit(jo, "Published");
    auto app = e.instantiate("Application");
    e.link(app, jo);
    e.clear_trace();
    e.commit(app, "Sent");
    auto seq = testkit::marking_sequences(e.trace());
    // outgoing: close (bottom-up at Job Offer 1:Closed#a) and review (top-down)
    CHECK(seq.at("comp review@Application 1:Sent") == std::vector<std::string>{"Inactive", "Active", "Completed"});
    CHECK(seq.at("comp close@Job Offer 1:Closed#a") == std::vector<std::string>{"Inactive", "Active", "Completed"});
}

TEST_CASE("dead path elimination stops at a step with another port") {
    engine::Engine e(testkit::load("recruitment.model"));
    auto jo = e.instantiate("Job Offer");
    e.commit(jo, "Published");
    auto app = e.instantiate("Application");
    e.link(app, jo);
    e.commit(app, "Sent");
    for (int i = 0; i < 3; ++i) {
        auto r = e.instantiate("Review");
        e.link(r, app);
        for (const char* st : {"Preparation", "Applicant Assessment", "Invite Proposed"}) e.commit(r, st);
    }
    auto snap = testkit::snapshot(e);
    const std::string cp = "step Job Offer 1/";
    CHECK(snap.at("step Job Offer 1/Review 1:Reject Proposed") == "Eliminated");
    CHECK(snap.at("comp Job Offer 1/reject-after-review@Application 1:Rejected#review") == "Eliminated");
    CHECK(snap.at("port Job Offer 1/Application 1:Rejected#review") == "Eliminated");
    CHECK(snap.at("port Job Offer 1/Application 1:Rejected#interview") == "Inactive");
    CHECK(snap.at(cp + "Application 1:Rejected") == "Inactive");
    CHECK(snap.at("comp Job Offer 1/checked-reject@Application 1:Checked#reject") == "Eliminated");
    CHECK(snap.at(cp + "Application 1:Checked") == "Active");
    CHECK(testkit::soundness_violations(e).empty());
}

TEST_CASE("eliminate then restore returns to the earlier snapshot") {
    engine::Engine e(testkit::load("recruitment.model"));
    auto jo = e.instantiate("Job Offer");
    e.commit(jo, "Published");
    auto app = e.instantiate("Application");
    e.link(app, jo);
    e.commit(app, "Sent");
    std::vector<InstanceId> revs;
    for (int i = 0; i < 3; ++i) {
        revs.push_back(e.instantiate("Review"));
        e.link(revs.back(), app);
        for (const char* st : {"Preparation", "Applicant Assessment"}) e.commit(revs.back(), st);
    }
    e.commit(revs[0], "Invite Proposed");
    auto before = testkit::snapshot(e);
    REQUIRE(before.at("step Job Offer 1/Review 2:Reject Proposed") == "Active");

    SUBCASE("a single branch") {
        e.commit(revs[1], "Invite Proposed");
        auto mid = testkit::snapshot(e);
        CHECK(mid.at("step Job Offer 1/Review 2:Reject Proposed") == "Eliminated");
        CHECK(mid != before);
        e.backwards(revs[1], "Applicant Assessment");
    }
    SUBCASE("a whole component") {
        e.commit(revs[1], "Invite Proposed");
        e.commit(revs[2], "Invite Proposed");
        auto mid = testkit::snapshot(e);
        CHECK(mid.at("comp Job Offer 1/checked-reject@Application 1:Checked#reject") == "Eliminated");
        CHECK(mid.at("port Job Offer 1/Application 1:Rejected#review") == "Eliminated");
        e.backwards(revs[2], "Applicant Assessment");
        e.backwards(revs[1], "Applicant Assessment");
    }
    CHECK(testkit::snapshot(e) == before);
    CHECK(testkit::soundness_violations(e).empty());
}

TEST_CASE("a new member revives an eliminated component") {
    engine::Engine e(testkit::load("recruitment.model"));
    auto jo = e.instantiate("Job Offer");
    e.commit(jo, "Published");
    auto app = e.instantiate("Application");
    e.link(app, jo);
    e.commit(app, "Sent");
    auto r = e.instantiate("Review");
    e.link(r, app);
    for (const char* st : {"Preparation", "Applicant Assessment", "Invite Proposed"}) e.commit(r, st);
    const std::string c = "comp Job Offer 1/checked-reject@Application 1:Checked#reject";
    CHECK(testkit::snapshot(e).at(c) == "Eliminated");
    auto r2 = e.instantiate("Review");
    e.link(r2, app);
    auto snap = testkit::snapshot(e);
    CHECK(snap.at(c) == "Inactive");
    CHECK(snap.at("port Job Offer 1/Application 1:Checked#reject") == "Inactive");
    CHECK(testkit::soundness_violations(e).empty());
}

TEST_CASE("backwards on a path never eliminated changes nothing else") {
    engine::Engine e(testkit::load("recruitment.model"));
    auto jo = e.instantiate("Job Offer");
    e.commit(jo, "Published");
    auto before = testkit::snapshot(e);
    e.backwards(jo, "Preparation");
    e.commit(jo, "Published");
    CHECK(testkit::snapshot(e) == before);
}

TEST_CASE("eliminated entities return only through Inactive") {
    auto m = testkit::load("recruitment.model");
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        engine::Config c;
        c.rules.trace = true;
        engine::Engine e(m, c);
        testkit::RandomDriver d(seed);
        for (int i = 0; i < 120; ++i) d.step(e);
        for (const auto& [entity, seq] : testkit::marking_sequences(e.trace()))
            for (std::size_t i = 0; i + 1 < seq.size(); ++i)
                if (seq[i] == "Eliminated") {
                    CAPTURE(seed);
                    CAPTURE(entity);
                    CHECK(seq[i + 1] == "Inactive");
                }
    }
}
