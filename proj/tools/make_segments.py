#!/usr/bin/env python3
# Copyright 2026 The spotrl Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled segment fixtures in data/traces.

Each segment is a 7200 s availability trace with a fixed initial population,
a given number of allocations and preemptions (events at t=0 are the initial
population and are not counted) and a target average instance count. The
last event is a preemption at exactly 7200 s so the summary duration is the
full segment.
"""

import argparse
import json
import pathlib
import random

DURATION = 7200.0

SEGMENTS = {
    # name: (initial, allocations, preemptions, avg, replacement spikes, seed)
    "segment_a": (4, 13, 8, 6.53, 3, 11),
    "segment_b": (6, 8, 9, 4.58, 3, 23),
    "segment_c": (4, 6, 2, 6.06, 0, 37),
}


def average(events):
    alive, last, area = 0, 0.0, 0.0
    for at, kind, *_ in events:
        area += alive * (at - last)
        last = at
        alive += 1 if kind == "allocate" else -1
    return area / DURATION


def build(initial, allocs, preempts, spikes, rng):
    """Random event structure; times are adjusted by fit() afterwards."""
    events = [[0.0, "allocate", f"spot-{i:04d}", False] for i in range(initial)]
    alive = [e[2] for e in events]
    next_id = initial
    # Interior preemptions; the final preemption is pinned to DURATION.
    p_times = sorted(rng.uniform(300, DURATION - 300) for _ in range(preempts - 1))
    spike_at = set(rng.sample(range(len(p_times)), min(spikes, len(p_times))))
    a_times = [rng.uniform(300, DURATION - 300) for _ in range(allocs - len(spike_at))]
    timeline = sorted([(t, "preempt", k) for k, t in enumerate(p_times)] +
                      [(t, "allocate", None) for t in a_times])
    for at, kind, k in timeline:
        if kind == "allocate":
            alive.append(f"spot-{next_id:04d}")
            events.append([at, "allocate", alive[-1], True])
            next_id += 1
            continue
        if len(alive) <= 1:
            return None
        victim = alive.pop(rng.randrange(len(alive)))
        if k in spike_at:
            events.append([at, "preempt", victim, False])
            alive.append(f"spot-{next_id:04d}")
            events.append([at, "allocate", alive[-1], False])
            next_id += 1
        else:
            events.append([at, "preempt", victim, True])
    events.append([DURATION, "preempt", alive.pop(rng.randrange(len(alive))), False])
    return events


def fit(events, target):
    """Slides movable events inside their neighbour gaps to hit the target."""
    gap = target * DURATION - average(events) * DURATION
    for i in range(len(events) - 2, 0, -1):
        at, kind, _, movable = events[i]
        if not movable or abs(gap) < 1.0:
            continue
        lo = events[i - 1][0] + 1.0
        hi = events[i + 1][0] - 1.0
        # Earlier allocations and later preemptions add area.
        sign = -1.0 if kind == "allocate" else 1.0
        want = at + sign * gap
        new = min(max(want, lo), hi)
        gap -= sign * (new - at)
        events[i][0] = new
    for e in events:
        e[0] = round(e[0], 1)
    return events if abs(average(events) - target) < 0.004 else None


def solve(initial, allocs, preempts, target, spikes, seed):
    rng = random.Random(seed)
    for _ in range(10000):
        ev = build(initial, allocs, preempts, spikes, rng)
        if ev is not None:
            ev = fit(ev, target)
        if ev is not None:
            return [(at, kind, iid) for at, kind, iid, _ in ev]
    raise SystemExit("no fixture matched the targets")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "traces"))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (initial, allocs, preempts, avg, spikes, seed) in SEGMENTS.items():
        events = solve(initial, allocs, preempts, avg, spikes, seed)
        with open(out / f"{name}.trace.jsonl", "w") as f:
            for at, kind, iid in events:
                f.write(json.dumps({"at": at, "kind": kind, "instance_id": iid}) + "\n")
        print(f"{name}: avg={average(events):.4f} events={len(events)}")


if __name__ == "__main__":
    main()
