#!/usr/bin/env python3
"""Writes the bundled execution sequences and the insurance stand-in model.

Orderings are reconstructions: instance and action counts are fixed, the
concrete interleavings are chosen so that no action is held by coordination.
"""
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


class Seq:
    def __init__(self, name):
        self.name = name
        self.actions = []
        self.counter = {}

    def new(self, ptype, prefix):
        n = self.counter.get(prefix, 0) + 1
        self.counter[prefix] = n
        name = f"{prefix}{n}"
        self.actions.append({"new": ptype, "as": name})
        return name

    def link(self, a, b):
        self.actions.append({"link": [a, b]})

    def arrange(self, a, b):
        self.actions.append({"arrange": [a, b]})

    def commit(self, a, state):
        self.actions.append({"commit": a, "state": state})

    def back(self, a, state):
        self.actions.append({"back": a, "state": state})

    def set(self, a, attr, value):
        self.actions.append({"set": a, "attribute": attr, "value": value})

    def write(self, path):
        doc = {"name": self.name, "actions": self.actions}
        path.write_text(json.dumps(doc, indent=1) + "\n")

    def counts(self):
        news = sum(1 for a in self.actions if "new" in a)
        return news, len(self.actions)


REVIEW_PATH = ["Preparation", "Applicant Assessment"]
INTERVIEW_PATH = ["Preparation", "Conducted"]


def review(s, r, verdict):
    for st in REVIEW_PATH:
        s.commit(r, st)
    s.commit(r, verdict)


def interview(s, i, verdict):
    for st in INTERVIEW_PATH:
        s.commit(i, st)
    s.commit(i, verdict)


def scenario2():
    # one application, accepted; idle reviews and interviews stay in Creation
    s = Seq("recruitment-2")
    jo = s.new("Job Offer", "jo")
    s.commit(jo, "Published")
    app = s.new("Application", "app")
    s.link(app, jo)
    s.set(app, "cv", "cv-1.pdf")
    s.commit(app, "Sent")
    reviews = []
    for _ in range(20):
        r = s.new("Review", "rev")
        s.link(r, app)
        reviews.append(r)
    interviews = []
    for _ in range(10):
        i = s.new("Interview", "int")
        s.link(i, app)
        interviews.append(i)
    s.commit(jo, "Closed")
    for r in reviews[:3]:
        review(s, r, "Invite Proposed")
    s.commit(app, "Checked")
    interview(s, interviews[0], "Hire Proposed")
    s.commit(app, "Accepted")
    s.commit(jo, "Position Filled")
    assert s.counts() == (32, 82), s.counts()
    return s


def scenario1():
    # five applications with 3-5 reviews each; exactly one accepted
    s = Seq("recruitment-1")
    rnd = random.Random(7)
    jo = s.new("Job Offer", "jo")
    s.set(jo, "title", "Software Engineer")
    s.commit(jo, "Published")
    plan = [
        ("Invite Proposed",) * 3,
        ("Invite Proposed", "Reject Proposed", "Reject Proposed", "Reject Proposed"),
        ("Invite Proposed",) * 3 + ("Reject Proposed",) * 2,
        ("Reject Proposed",) * 4,
        ("Invite Proposed",) * 3 + ("Reject Proposed",),
    ]
    # interview verdict per application, None = rejected on reviews alone
    outcome = ["Hire Proposed", None, "Reject Proposed", None, "Reject Proposed"]
    idle = [14, 13, 13, 13, 14]
    apps, reviews, interviews = [], [], []
    for k in range(5):
        a = s.new("Application", "app")
        s.link(a, jo)
        s.set(a, "cv", f"cv-{k + 1}.pdf")
        s.commit(a, "Sent")
        apps.append(a)
    s.commit(jo, "Closed")
    for k, a in enumerate(apps):
        rs = []
        for _ in plan[k]:
            r = s.new("Review", "rev")
            s.link(r, a)
            rs.append(r)
        reviews.append(rs)
        ints = []
        n = idle[k] + (1 if outcome[k] else 0)
        for _ in range(n):
            i = s.new("Interview", "int")
            s.link(i, a)
            ints.append(i)
        interviews.append(ints)
    sets_left = 11 - 6
    for k, a in enumerate(apps):
        order = list(zip(reviews[k], plan[k]))
        rnd.shuffle(order)
        for r, v in order:
            review(s, r, v)
        if sets_left > 0:
            s.set(reviews[k][0], "assessment", "done")
            sets_left -= 1
        s.commit(a, "Checked")
        if outcome[k]:
            interview(s, interviews[k][0], outcome[k])
    for k, a in enumerate(apps):
        s.commit(a, "Accepted" if outcome[k] == "Hire Proposed" else "Rejected")
    s.commit(jo, "Position Filled")
    assert s.counts() == (96, 289), s.counts()
    return s


def golden():
    s = Seq("stages")
    jo = s.new("Job Offer", "jo")
    app = s.new("Application", "app")
    s.arrange(app, jo)
    s.commit(app, "Sent")
    s.commit(jo, "Published")
    return s


# ---------------------------------------------------------------------------
# insurance stand-in

TREE = {
    "Insurer": None,
    "Branch": "Insurer",
    "Agent": "Branch",
    "Customer": "Branch",
    "Contract": "Customer",
    "Premium Invoice": "Contract",
    "Payment": "Contract",
    "Endorsement": "Contract",
    "Claim": "Customer",
    "Damage Report": "Claim",
    "Expert Assessment": "Claim",
    "Repair Order": "Claim",
    "Settlement": "Claim",
    "Fraud Check": "Claim",
    "Product Line": "Insurer",
    "Tariff": "Product Line",
    "Audit": "Insurer",
    "Audit Finding": "Audit",
}
STATES = ["Created", "Open", "In Progress", "Review", "Closed"]
ALL = "#SourceIn + #SourceAfter = #SourceTotal"
ANY = "#SourceIn + #SourceAfter >= 1"


def insurance_model():
    types = []
    for t in TREE:
        types.append({
            "name": t,
            "attributes": ["owner", "note", "amount"],
            "states": STATES,
            "start": "Created",
            "end": ["Closed"],
            "transitions": [[a, b] for a, b in zip(STATES, STATES[1:])],
            "backwards": [["Review", "In Progress"]],
        })
    rels = [{"name": f"{t} of {p}", "source": t, "target": p, "m_lower": 1, "m_upper": 1} for t, p in TREE.items() if p]
    steps = [
        ("Insurer:Created", []), ("Insurer:Open", ["a"]), ("Insurer:Closed", ["a"]),
        ("Branch:Created", ["a"]),
        ("Contract:Open", ["a"]), ("Premium Invoice:Open", ["a"]), ("Payment:Open", ["a"]),
        ("Claim:Open", ["a"]), ("Expert Assessment:Closed", ["a"]),
        ("Settlement:Open", ["a"]), ("Settlement:Closed", ["a"]), ("Claim:Closed", ["a"]),
        ("Customer:Closed", ["a"]), ("Audit:Open", ["a"]), ("Audit Finding:Open", ["a"]),
    ]
    tr = [
        ("open", "Insurer:Created", "Insurer:Open#a", "self", {}),
        ("branch", "Insurer:Open", "Branch:Created#a", "top-down", {"valid_states": ["Open", "In Progress", "Review"]}),
        ("contract", "Insurer:Open", "Contract:Open#a", "top-down", {}),
        ("invoice", "Contract:Open", "Premium Invoice:Open#a", "top-down", {}),
        ("pay", "Premium Invoice:Open", "Payment:Open#a", "transverse", {"common_ancestor": "Contract", "expression": ANY}),
        ("claim", "Contract:Open", "Claim:Open#a", "transverse", {"common_ancestor": "Customer", "expression": ANY}),
        ("assess", "Claim:Open", "Expert Assessment:Closed#a", "top-down", {}),
        ("settle", "Expert Assessment:Closed", "Settlement:Open#a", "transverse", {"common_ancestor": "Claim", "expression": ANY}),
        ("settled", "Settlement:Open", "Settlement:Closed#a", "self", {}),
        ("claim-done", "Settlement:Closed", "Claim:Closed#a", "bottom-up", {"expression": ALL}),
        ("customer-done", "Claim:Closed", "Customer:Closed#a", "bottom-up", {"expression": ALL}),
        ("insurer-done", "Customer:Closed", "Insurer:Closed#a", "bottom-up", {"expression": ANY}),
        ("insurer-after-open", "Insurer:Open", "Insurer:Closed#a", "self", {}),
        ("audit", "Insurer:Open", "Audit:Open#a", "top-down", {}),
        ("finding", "Audit:Open", "Audit Finding:Open#a", "top-down", {}),
    ]
    cp = {
        "name": "Insurance Operations",
        "coordinating_type": "Insurer",
        "steps": [{"step": s, "ports": p} if p else {"step": s} for s, p in steps],
        "transitions": [dict({"id": i, "from": f, "to": t, "kind": k}, **x) for i, f, t, k, x in tr],
    }
    return {"structure": {"name": "Insurance", "process_types": types, "relation_types": rels}, "coordination_processes": [cp]}


def reached(level, inst, state):
    return level[inst] >= STATES.index(state)


def allowed(inst, state, level, kids):
    """Mirrors the stand-in constraints so the generated order never waits."""
    t = inst
    parent = TREE[t]
    if t == "Contract" and state == "Open":
        return reached(level, "Insurer", "Open")
    if t == "Premium Invoice" and state == "Open":
        return reached(level, "Contract", "Open")
    if t == "Payment" and state == "Open":
        return reached(level, "Premium Invoice", "Open")
    if t == "Claim" and state == "Open":
        return reached(level, "Contract", "Open")
    if t == "Expert Assessment" and state == "Closed":
        return reached(level, "Claim", "Open")
    if t == "Settlement" and state == "Open":
        return reached(level, "Expert Assessment", "Closed")
    if t == "Claim" and state == "Closed":
        return reached(level, "Settlement", "Closed")
    if t == "Customer" and state == "Closed":
        return reached(level, "Claim", "Closed")
    if t == "Insurer" and state == "Closed":
        return reached(level, "Customer", "Closed")
    if t == "Audit Finding" and state == "Open":
        return reached(level, "Audit", "Open")
    del parent, kids
    return True


def scenario3():
    s = Seq("insurance-3")
    names = {}
    for t in TREE:
        names[t] = s.new(t, t.lower().replace(" ", "-"))
        if TREE[t]:
            s.link(names[t], names[TREE[t]])
        else:
            s.commit(names[t], "Open")
    level = {t: 0 for t in TREE}
    level["Insurer"] = 1
    rnd = random.Random(3)
    sets = 61
    commits = 72 - 1
    while commits:
        progressed = False
        for t in TREE:
            if level[t] + 1 >= len(STATES):
                continue
            st = STATES[level[t] + 1]
            if not allowed(t, st, level, None):
                continue
            s.commit(names[t], st)
            level[t] += 1
            commits -= 1
            progressed = True
            if sets and rnd.random() < 0.9:
                s.set(names[t], rnd.choice(["owner", "note", "amount"]), str(rnd.randint(1, 9999)))
                sets -= 1
        assert progressed
    while sets:
        t = rnd.choice(list(TREE))
        s.set(names[t], "note", str(rnd.randint(1, 9999)))
        sets -= 1
    assert s.counts() == (18, 168), s.counts()
    return s


def main():
    (ROOT / "models" / "insurance.model").write_text(json.dumps(insurance_model(), indent=2) + "\n")
    out = ROOT / "scenarios"
    out.mkdir(exist_ok=True)
    scenario1().write(out / "recruitment-1.json")
    scenario2().write(out / "recruitment-2.json")
    scenario3().write(out / "insurance-3.json")
    golden().write(out / "stages.json")


if __name__ == "__main__":
    main()
