#!/usr/bin/env python3
"""Generate the 37-state Rabin automaton for the traffic-control objective.

The objective over AP = [sv2, x1le30, x2le30, x3le10, x4le10] is

    FG(x1le30 & x2le30)  &  GF x3le10  &  GF x4le10
    &  G((sv2 & X !sv2) -> (XX !sv2 & XXX !sv2))

The automaton is the product of three small monitors (4 x 3 x 3 = 36 live
states, all reachable because the monitors read disjoint atoms) plus one
absorbing violation sink:

  * min-green monitor (sv2):  IDLE, ON, OFF1, OFF2; switching off commits
    to two more off steps, any early re-actuation falls into the sink,
  * round counter (x3le10, x4le10): waiting-3, waiting-4, round-complete,
  * stability watcher (x1le30 & x2le30): ok, bad-once, bad-long.

One Rabin pair: Fin = sink + watcher-bad states, Inf = round-complete & ok.

This script is intentionally self-contained (it does not import the main
package) so the emitted automaton is an independent artifact the test suite
can cross-validate against the built-in fragment translation.
"""

import sys

AP = ["sv2", "x1le30", "x2le30", "x3le10", "x4le10"]
SV2, X1, X2, X3, X4 = range(5)

IDLE, ON, OFF1, OFF2 = range(4)          # min-green monitor
WAIT3, WAIT4, ROUND = range(3)           # round counter
OK, BAD1, BAD2 = range(3)                # stability watcher
SINK = "sink"


def bit(letter, i):
    return (letter >> i) & 1


def step_min_green(m, letter):
    s = bit(letter, SV2)
    if m == IDLE:
        return ON if s else IDLE
    if m == ON:
        return ON if s else OFF1
    if m == OFF1:
        return SINK if s else OFF2
    return SINK if s else IDLE           # OFF2


def step_counter(c, letter):
    c = WAIT3 if c == ROUND else c
    goal = X3 if c == WAIT3 else X4
    if bit(letter, goal):
        return c + 1
    return c


def step_watcher(w, letter):
    if bit(letter, X1) and bit(letter, X2):
        return OK
    return BAD1 if w == OK else BAD2


def build():
    start = (IDLE, WAIT3, BAD2)
    order = [start]
    index = {start: 0}
    rows = []
    queue = [start]
    while queue:
        st = queue.pop(0)
        row = []
        for letter in range(1 << len(AP)):
            if st == SINK:
                nxt = SINK
            else:
                m2 = step_min_green(st[0], letter)
                if m2 == SINK:
                    nxt = SINK
                else:
                    nxt = (m2, step_counter(st[1], letter),
                           step_watcher(st[2], letter))
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(index[nxt])
        rows.append(row)
    return order, rows


def emit(order, rows):
    fin = {i for i, st in enumerate(order)
           if st == SINK or st[2] in (BAD1, BAD2)}
    inf = {i for i, st in enumerate(order)
           if st != SINK and st[1] == ROUND and st[2] == OK}
    lines = [
        "HOA: v1",
        "name: \"traffic objective: stability, recurrence, min-green\"",
        f"States: {len(order)}",
        "Start: 0",
        f"AP: {len(AP)} " + " ".join(f'"{a}"' for a in AP),
        "acc-name: Rabin 1",
        "Acceptance: 2 Fin(0) & Inf(1)",
        "--BODY--",
    ]
    for i, st in enumerate(order):
        sets = []
        if i in fin:
            sets.append("0")
        if i in inf:
            sets.append("1")
        ann = f" {{{' '.join(sets)}}}" if sets else ""
        lines.append(f"State: {i}{ann}")
        for letter in range(1 << len(AP)):
            term = "&".join(
                (f"{b}" if bit(letter, b) else f"!{b}") for b in range(len(AP))
            )
            lines.append(f"[{term}] {rows[i][letter]}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def main():
    order, rows = build()
    n_live = sum(1 for st in order if st != SINK)
    assert len(order) == 37, f"expected 37 states, got {len(order)}"
    assert n_live == 36
    text = emit(order, rows)
    out = sys.argv[1] if len(sys.argv) > 1 else "traffic_min_green_37.hoa"
    with open(out, "w") as fh:
        fh.write(text)
    print(f"{len(order)} states -> {out}")


if __name__ == "__main__":
    main()
