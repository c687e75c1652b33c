"""Writes the transition-based HOA fixtures for the bundled scenarios."""

from itertools import product


def minterm(bits, n):
    return " & ".join(str(i) if b else f"!{i}" for i, b in enumerate(bits[:n]))


def header(name, aps, states, sets):
    quoted = " ".join(f'"{a}"' for a in aps)
    acc = "&".join(f"Inf({i})" for i in range(sets))
    return [
        "HOA: v1",
        f'name: "{name}"',
        f"States: {states}",
        "Start: 0",
        f"AP: {len(aps)} {quoted}",
        f"acc-name: generalized-Buchi {sets}",
        f"Acceptance: {sets} {acc}",
        "properties: trans-labels explicit-labels trans-acc deterministic complete",
        "--BODY--",
    ]


def marks(ms):
    return " {" + " ".join(map(str, ms)) + "}" if ms else ""


def surveillance(name, rooms, obs_name="Obs"):
    """G F r_1 & ... & G F r_k & G !Obs: one state plus a sink."""
    aps = rooms + [obs_name]
    k = len(rooms)
    lines = header(name, aps, 2, k)
    lines.append('State: 0 "patrol"')
    lines.append(f"[{k}] 1")
    for bits in product([0, 1], repeat=k):
        bits = bits[::-1]
        ms = [i for i in range(k) if bits[i]]
        lines.append(f"[{minterm(bits, k)} & !{k}] 0{marks(ms)}")
    lines.append('State: 1 "crashed"')
    lines.append("[t] 1")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def obligation(name, trigger, discharge):
    """Surveillance of three bases, no obstacles, plus an obligation: after
    a letter satisfying `trigger`, `discharge` must hold before `trigger`
    holds again (strictly later). Leaving an obligation pending forever rules
    out further base visits, so the three base sets suffice."""
    aps = ["Base1", "Base2", "Base3", "Obs", "Sply"]
    lines = header(name, aps, 3, 3)
    for pending in (0, 1):
        lines.append(f'State: {pending} "{"pending" if pending else "free"}"')
        lines.append("[3] 2")
        for bits in product([0, 1], repeat=5):
            bits = bits[::-1]
            if bits[3]:
                continue
            letter = {"Base1": bits[0], "Base2": bits[1], "Base3": bits[2], "Sply": bits[4]}
            one = letter["Base1"] or letter["Base2"] or letter["Base3"]
            trig = trigger(letter, one)
            dis = discharge(letter, one)
            if not pending or dis:
                target = int(trig)
            elif trig:
                target = 2
            else:
                target = 1
            ms = [i for i in range(3) if bits[i]] if target != 2 else []
            lines.append(f"[{minterm(bits, 5)}] {target}{marks(ms)}")
    lines.append('State: 2 "violated"')
    lines.append("[t] 2")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


GFA_GFB = """HOA: v1
name: "GF a & GF b"
States: 1
Start: 0
AP: 2 "a" "b"
acc-name: generalized-Buchi 2
Acceptance: 2 Inf(0)&Inf(1)
properties: trans-labels explicit-labels trans-acc deterministic complete
--BODY--
State: 0
[0 & 1] 0 {0 1}
[0 & !1] 0 {0}
[!0 & 1] 0 {1}
[!0 & !1] 0
--END--
"""

if __name__ == "__main__":
    files = {
        "gfa_gfb.hoa": GFA_GFB,
        "case1.hoa": surveillance("case1", ["Base1", "Base2", "Base3"]),
        "case2.hoa": obligation("case2", lambda l, one: l["Sply"], lambda l, one: one),
        "case3.hoa": obligation("case3", lambda l, one: one, lambda l, one: l["Sply"]),
        "office.hoa": surveillance("office", ["S0", "S2", "S3", "S5", "S9", "S10"]),
    }
    for path, text in files.items():
        with open(path, "w") as f:
            f.write(text)


def grid_scenario(name, rows, cols, initial, props, labels, automaton, reward, episodes):
    """labels: {(r, c): [(props, p), ...]}"""
    out = [f'name = "{name}"', "version = 1", "props = [" + ", ".join(f'"{p}"' for p in props) + "]", ""]
    out += ["[workspace]", 'kind = "grid"', f"rows = {rows}", f"cols = {cols}", f'initial = "r{initial[0]}c{initial[1]}"', ""]
    for (r, c), dist in sorted(labels.items()):
        entries = ", ".join("{ props = [" + ", ".join(f'"{x}"' for x in ps) + f"], p = {p} }}" for ps, p in dist)
        out += ["[[labels]]", f'cell = "r{r}c{c}"', f"dist = [{entries}]", ""]
    out += ["[automaton]", f'file = "{automaton}"', ""]
    out += ["[reward]", f"r_acc = {reward[0]}", f"beta = {reward[1]}", f"gamma = {reward[2]}", ""]
    out += ["[episodes]", f"episodes = {episodes[0]}", f"tau = {episodes[1]}", ""]
    return "\n".join(out)


def region_scenario(name, open_doors):
    rooms = ["S0", "S2", "S3", "S5", "S9", "S10"]
    regions = ["S0", "S1", "S2", "S3", "S4", "S5", "S7", "S8", "S9", "S10", "S12", "Obs"]
    links = [("S1", "S4"), ("S4", "S8"), ("S8", "S12"), ("S12", "S1"), ("S4", "S7"), ("S7", "S8"),
             ("S0", "S1"), ("S2", "S1"), ("S3", "S4"), ("S5", "S4"), ("S9", "S8"), ("S10", "S12"), ("Obs", "S7")]
    if not open_doors:
        links = [l for l in links if "S5" not in l and "S10" not in l]
    out = [f'name = "{name}"', "version = 1", "props = [" + ", ".join(f'"{p}"' for p in rooms + ["Obs"]) + "]", ""]
    out += ["[workspace]", 'kind = "regions"', "regions = [" + ", ".join(f'"{r}"' for r in regions) + "]"]
    out += ["links = ["] + [f'  ["{a}", "{b}"],' for a, b in links] + ["]", "success = 0.9", 'initial = "S1"', ""]
    for r in rooms + ["Obs"]:
        out += ["[[labels]]", f'cell = "{r}"', f'dist = [{{ props = ["{r}"], p = 1.0 }}]', ""]
    out += ["[automaton]", 'file = "office.hoa"', ""]
    out += ["[reward]", "r_acc = 10.0", "beta = 4.0", "gamma = 0.999", ""]
    out += ["[episodes]", "episodes = 20000", "tau = 150", ""]
    return "\n".join(out)


SURVEILLANCE = ["Base1", "Base2", "Base3", "Obs"]
OBLIGATION = ["Base1", "Base2", "Base3", "Obs", "Sply"]


def case1():
    labels = {(0, 0): [(["Obs"], 0.2)], (0, 4): [(["Obs"], 0.3)], (4, 4): [(["Obs"], 0.2)]}
    for r in range(5):
        for j in range(3):
            labels[(r, j + 1)] = [([f"Base{j + 1}"], 1.0)]
    return grid_scenario("case1", 5, 5, (2, 1), SURVEILLANCE, labels, "case1.hoa", (10.0, 8.0, 0.999), (100000, 100))


def case2():
    labels = {(0, 0): [(["Obs"], 0.2)], (0, 4): [(["Obs"], 0.3)],
              (2, 0): [(["Base1"], 1.0)], (0, 2): [(["Base2"], 1.0)], (2, 4): [(["Base3"], 1.0)],
              (2, 2): [(["Sply"], 1.0)]}
    return grid_scenario("case2", 5, 5, (4, 0), OBLIGATION, labels, "case2.hoa", (10.0, 5.0, 0.999), (20000, 1000))


def case3(risk, p):
    labels = {(2, 0): [(["Base1"], 1.0)], (1, 2): [(["Base2"], 1.0)], (2, 4): [(["Base3"], 1.0)],
              (4, 2): [(["Sply"], 1.0)]}
    for cell in [(0, 1), (0, 2), (0, 3), (1, 1), (1, 3), (2, 1), (2, 2), (2, 3)]:
        labels[cell] = [(["Obs"], p)]
    return grid_scenario(f"case3-{risk}", 5, 5, (4, 0), OBLIGATION, labels, "case3.hoa", (10.0, 12.0, 0.999), (20000, 1000))


def write_scenarios():
    files = {
        "case1.toml": case1(),
        "case2.toml": case2(),
        "case3-low.toml": case3("low", 0.05),
        "case3-high.toml": case3("high", 0.6),
        "office-open.toml": region_scenario("office-open", True),
        "office-closed.toml": region_scenario("office-closed", False),
    }
    for path, text in files.items():
        with open(path, "w") as f:
            f.write(text)


if __name__ == "__main__":
    write_scenarios()
