#!/usr/bin/env python3
"""Writes the small two-type order/item log used by the tests and the README."""

import argparse
import json
from datetime import datetime, timedelta, timezone

VARIANTS = {
    "standard": [("Place Order", 0), ("Confirm Order", 60), ("Pick Item", 120), ("Pack", 30), ("Ship", 240)],
    "express": [("Express Order", 0), ("Pick Item", 30), ("Ship", 60), ("Deliver", 180)],
}
ORDER_ONLY = {"Place Order", "Confirm Order", "Express Order"}


def build(cases_per_variant: int) -> dict:
    events, objects = {}, {}
    start = datetime(2024, 1, 1, 8, 0, tzinfo=timezone.utc)
    eid = 0
    case = 0
    for name, steps in VARIANTS.items():
        for _ in range(cases_per_variant):
            order = f"o{case:03d}"
            items = [f"i{case:03d}-{k}" for k in range(1 + case % 2)]
            objects[order] = {"ocel:type": "order", "ocel:ovmap": {"variant": name}}
            for item in items:
                objects[item] = {"ocel:type": "item", "ocel:ovmap": {}}
            t = start + timedelta(days=case, minutes=17 * case)
            for activity, gap in steps:
                t += timedelta(minutes=gap)
                omap = [order] if activity in ORDER_ONLY else [order, *items]
                events[f"e{eid:04d}"] = {
                    "ocel:activity": activity,
                    "ocel:timestamp": t.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "ocel:omap": omap,
                    "ocel:vmap": {},
                }
                eid += 1
            case += 1
    return {
        "ocel:global-event": {"ocel:activity": "__INVALID__"},
        "ocel:global-object": {"ocel:type": "__INVALID__"},
        "ocel:global-log": {
            "ocel:version": "1.0",
            "ocel:ordering": "timestamp",
            "ocel:attribute-names": ["variant"],
            "ocel:object-types": ["item", "order"],
        },
        "ocel:events": events,
        "ocel:objects": objects,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output")
    parser.add_argument("--cases", type=int, default=10, help="cases per variant")
    args = parser.parse_args()
    with open(args.output, "w", encoding="utf-8") as f:
        json.dump(build(args.cases), f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
