#!/usr/bin/env python3
"""Regenerate the bundled grid case files and profile tables.

This is the documented converter from the tabular reliability-test-system
data into the repo case schema.  Network topology (bus loads, line
reactances and ratings) follows the published 24-bus single-area tables;
generator economic parameters follow the updated parameter style of the
Seattle unit-commitment dataset (capacities, min output, ramp limits, min
up/down times, block price curves, hot/cold start-up costs).  Wind fleet
placement and the three-area interconnection numbering are assumptions and
are flagged in each file's comment field.

Run from the repo root:  python scripts/build_cases.py
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "gridsched" / "data"

# bus id -> peak load MW (24-bus system, total 2850 MW)
RTS_LOADS = {
    1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175,
    10: 195, 11: 0, 12: 0, 13: 265, 14: 194, 15: 317, 16: 100, 17: 0,
    18: 333, 19: 181, 20: 128, 21: 0, 22: 0, 23: 0, 24: 0,
}

# line id, from, to, reactance pu, continuous rating MW
RTS_LINES = [
    (1, 1, 2, 0.0139, 175), (2, 1, 3, 0.2112, 175), (3, 1, 5, 0.0845, 175),
    (4, 2, 4, 0.1267, 175), (5, 2, 6, 0.1920, 175), (6, 3, 9, 0.1190, 175),
    (7, 3, 24, 0.0839, 400), (8, 4, 9, 0.1037, 175), (9, 5, 10, 0.0883, 175),
    (10, 6, 10, 0.0605, 175), (11, 7, 8, 0.0614, 175), (12, 8, 9, 0.1651, 175),
    (13, 8, 10, 0.1651, 175), (14, 9, 11, 0.0839, 400), (15, 9, 12, 0.0839, 400),
    (16, 10, 11, 0.0839, 400), (17, 10, 12, 0.0839, 400), (18, 11, 13, 0.0476, 500),
    (19, 11, 14, 0.0418, 500), (20, 12, 13, 0.0476, 500), (21, 12, 23, 0.0966, 500),
    (22, 13, 23, 0.0865, 500), (23, 14, 16, 0.0389, 500), (24, 15, 16, 0.0173, 500),
    (25, 15, 21, 0.0490, 500), (26, 15, 21, 0.0490, 500), (27, 15, 24, 0.0519, 500),
    (28, 16, 17, 0.0259, 500), (29, 16, 19, 0.0231, 500), (30, 17, 18, 0.0144, 500),
    (31, 17, 22, 0.1053, 500), (32, 18, 21, 0.0259, 500), (33, 18, 21, 0.0259, 500),
    (34, 19, 20, 0.0396, 500), (35, 19, 20, 0.0396, 500), (36, 20, 23, 0.0216, 500),
    (37, 20, 23, 0.0216, 500), (38, 21, 22, 0.0678, 500),
]

# unit type -> (p_min, p_max, ramp, min_up, min_down,
#               [(to_MW, $/MWh)...], [(hours_off, $)...])
UNIT_TYPES = {
    "U12": (2.4, 12, 48, 4, 2,
            [(5, 25.5), (8, 28.0), (10, 30.0), (12, 32.0)], [(1, 60), (4, 120)]),
    "U20": (8.0, 20, 90, 1, 1,
            [(12, 37.0), (16, 40.0), (20, 43.0)], [(1, 25), (2, 50)]),
    "U50": (0.0, 50, 200, 1, 1,
            [(50, 1.0)], [(1, 0)]),
    "U76": (15.2, 76, 120, 8, 4,
            [(30, 11.0), (50, 13.5), (65, 15.0), (76, 17.0)], [(1, 250), (8, 500)]),
    "U100": (25.0, 100, 140, 8, 8,
             [(40, 18.0), (65, 20.0), (85, 22.0), (100, 24.0)], [(1, 300), (8, 600)]),
    "U155": (54.25, 155, 180, 8, 8,
             [(70, 9.7), (105, 10.8), (135, 11.8), (155, 13.0)], [(1, 400), (10, 800)]),
    "U197": (68.95, 197, 180, 12, 10,
             [(90, 19.0), (130, 21.0), (170, 23.0), (197, 25.0)], [(1, 450), (12, 900)]),
    "U350": (140.0, 350, 240, 24, 48,
             [(180, 9.5), (250, 10.5), (300, 11.5), (350, 12.5)], [(1, 800), (48, 1600)]),
    "U400": (100.0, 400, 280, 1, 1,
             [(200, 5.3), (300, 5.9), (350, 6.5), (400, 7.0)], [(1, 1000), (4, 2000)]),
}

# bus -> list of unit types (32 units, 3405 MW)
RTS_UNITS = {
    1: ["U20", "U20", "U76", "U76"],
    2: ["U20", "U20", "U76", "U76"],
    7: ["U100", "U100", "U100"],
    13: ["U197", "U197", "U197"],
    15: ["U12", "U12", "U12", "U12", "U12", "U155"],
    16: ["U155"],
    18: ["U400"],
    21: ["U400"],
    22: ["U50", "U50", "U50", "U50", "U50", "U50"],
    23: ["U155", "U155", "U350"],
}

# wind fleet (assumption: the source data gives no siteing for the 24-bus case)
RTS_WIND = [(5, 150.0), (7, 100.0), (16, 120.0), (21, 130.0)]

DAILY_LOAD_SHAPE = [0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96,
                    0.96, 0.95, 0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00, 0.96,
                    0.91, 0.83, 0.73, 0.63]
DAILY_WIND_SHAPE = [1.00, 0.98, 0.96, 0.95, 0.93, 0.90, 0.85, 0.78, 0.70, 0.62,
                    0.55, 0.50, 0.48, 0.47, 0.50, 0.55, 0.60, 0.68, 0.75, 0.82,
                    0.88, 0.93, 0.96, 0.99]
MONTHLY_LOAD = [1.00, 0.95, 0.88, 0.80, 0.78, 0.82, 0.90, 0.88, 0.80, 0.79, 0.86, 0.96]
MONTHLY_WIND = [1.00, 0.95, 0.92, 0.85, 0.72, 0.60, 0.55, 0.58, 0.68, 0.80, 0.90, 0.97]
WIND_CF = 0.55  # mean output as a fraction of capacity at monthly peak


def gen_record(gid, bus, utype):
    pmin, pmax, ramp, up, down, curve, start = UNIT_TYPES[utype]
    return {
        "id": gid, "bus": bus,
        "p_min_MW": pmin, "p_max_MW": pmax,
        "ramp_up_MW_per_h": ramp, "ramp_down_MW_per_h": ramp,
        "min_up_h": up, "min_down_h": down,
        "cost_curve": [{"to_MW": t, "price_per_MWh": p} for t, p in curve],
        "startup_cost_fn": [{"hours_off_at_least": h, "cost": c} for h, c in start],
    }


def rts79_doc():
    gens = []
    for bus in sorted(RTS_UNITS):
        for k, utype in enumerate(RTS_UNITS[bus], start=1):
            gens.append(gen_record(f"{utype}-b{bus}-{k}", bus, utype))
    return {
        "name": "rts79",
        "comment": ("24-bus single-area reliability test system with updated generator "
                    "parameters baked in (block price curves, hot/cold start-up steps, "
                    "ramp and min up/down limits). Wind fleet placement is an assumption "
                    "documented here: 4 farms at buses 5, 7, 16, 21 totalling 500 MW."),
        "buses": [{"id": b, "peak_load_MW": float(mw), "load_profile_id": "default"}
                  for b, mw in sorted(RTS_LOADS.items())],
        "lines": [{"id": i, "from_bus": f, "to_bus": t, "reactance_pu": x, "flow_limit_MW": float(r)}
                  for i, f, t, x, r in RTS_LINES],
        "dispatchable_generators": gens,
        "wind_generators": [{"id": f"W-b{b}", "bus": b, "capacity_MW": cap} for b, cap in RTS_WIND],
        "reference_buses": [13],
        "prices": {"voll": 1000.0, "wind_curtail_price": 100.0},
    }


def rts96_doc():
    """Three replicated zones plus one extra bus on the A-C corridor.

    Interconnection mapping is an assumption (the source numbering of the
    tie lines is not published with this repo's data): ties 401..406 are
    107-203, 113-215, 123-217, 121-325, 325-323, 223-318; bus 325 is a
    zero-load switching station splitting the A-C corridor.
    """
    doc = {"name": "rts96",
           "comment": rts96_doc.__doc__.strip(),
           "buses": [], "lines": [], "dispatchable_generators": [],
           "wind_generators": [],
           "reference_buses": [113, 213, 313],
           "prices": {"voll": 1000.0, "wind_curtail_price": 100.0}}
    for z in (1, 2, 3):
        off = 100 * z
        for b, mw in sorted(RTS_LOADS.items()):
            doc["buses"].append({"id": off + b, "peak_load_MW": float(mw),
                                 "load_profile_id": "default"})
        for i, f, t, x, r in RTS_LINES:
            doc["lines"].append({"id": off + i, "from_bus": off + f, "to_bus": off + t,
                                 "reactance_pu": x, "flow_limit_MW": float(r)})
        for bus in sorted(RTS_UNITS):
            for k, utype in enumerate(RTS_UNITS[bus], start=1):
                doc["dispatchable_generators"].append(
                    gen_record(f"z{z}-{utype}-b{bus}-{k}", off + bus, utype))
        for b, cap in RTS_WIND:
            doc["wind_generators"].append({"id": f"z{z}-W-b{b}", "bus": off + b,
                                           "capacity_MW": cap})
    doc["buses"].append({"id": 325, "peak_load_MW": 0.0, "load_profile_id": "default"})
    ties = [(401, 107, 203, 0.0616, 175), (402, 113, 215, 0.0757, 500),
            (403, 123, 217, 0.0740, 500), (404, 121, 325, 0.0367, 500),
            (405, 325, 323, 0.0367, 500), (406, 223, 318, 0.0620, 500)]
    for i, f, t, x, r in ties:
        doc["lines"].append({"id": i, "from_bus": f, "to_bus": t,
                             "reactance_pu": x, "flow_limit_MW": float(r)})
    return doc


def toy5_doc():
    return {
        "name": "toy5",
        "comment": "5-bus ring-with-chord fixture sized for desk-scale exact solves.",
        "buses": [
            {"id": 1, "peak_load_MW": 0.0, "load_profile_id": "default"},
            {"id": 2, "peak_load_MW": 60.0, "load_profile_id": "default"},
            {"id": 3, "peak_load_MW": 50.0, "load_profile_id": "default"},
            {"id": 4, "peak_load_MW": 45.0, "load_profile_id": "default"},
            {"id": 5, "peak_load_MW": 0.0, "load_profile_id": "default"},
        ],
        "lines": [
            {"id": 1, "from_bus": 1, "to_bus": 2, "reactance_pu": 0.06, "flow_limit_MW": 100.0},
            {"id": 2, "from_bus": 2, "to_bus": 3, "reactance_pu": 0.08, "flow_limit_MW": 80.0},
            {"id": 3, "from_bus": 3, "to_bus": 4, "reactance_pu": 0.07, "flow_limit_MW": 80.0},
            {"id": 4, "from_bus": 4, "to_bus": 5, "reactance_pu": 0.06, "flow_limit_MW": 100.0},
            {"id": 5, "from_bus": 5, "to_bus": 1, "reactance_pu": 0.05, "flow_limit_MW": 120.0},
            {"id": 6, "from_bus": 2, "to_bus": 4, "reactance_pu": 0.10, "flow_limit_MW": 60.0},
        ],
        "dispatchable_generators": [
            {"id": "G1", "bus": 1, "p_min_MW": 20.0, "p_max_MW": 150.0,
             "ramp_up_MW_per_h": 70.0, "ramp_down_MW_per_h": 70.0,
             "min_up_h": 3, "min_down_h": 2,
             "cost_curve": [{"to_MW": 90.0, "price_per_MWh": 16.0},
                            {"to_MW": 150.0, "price_per_MWh": 24.0}],
             "startup_cost_fn": [{"hours_off_at_least": 1, "cost": 150.0},
                                 {"hours_off_at_least": 4, "cost": 300.0}]},
            {"id": "G2", "bus": 5, "p_min_MW": 0.0, "p_max_MW": 80.0,
             "ramp_up_MW_per_h": 80.0, "ramp_down_MW_per_h": 80.0,
             "min_up_h": 1, "min_down_h": 1,
             "cost_curve": [{"to_MW": 80.0, "price_per_MWh": 38.0}],
             "startup_cost_fn": [{"hours_off_at_least": 1, "cost": 0.0}]},
        ],
        "wind_generators": [{"id": "W1", "bus": 3, "capacity_MW": 60.0}],
        "reference_buses": [1],
        "prices": {"voll": 1000.0, "wind_curtail_price": 100.0},
    }


def profile_csv(path, rows):
    with open(path, "w") as fh:
        for rid, vals in rows:
            fh.write(",".join([str(rid)] + [f"{v:.6g}" for v in vals]) + "\n")


def write_profiles(tag, doc, hours):
    h24 = len(DAILY_LOAD_SHAPE)
    pick = [int(round(i * (h24 - 1) / max(1, hours - 1))) for i in range(hours)]
    lshape = [DAILY_LOAD_SHAPE[i] for i in pick]
    wshape = [DAILY_WIND_SHAPE[i] for i in pick]
    profile_csv(OUT / "profiles" / f"{tag}_daily_load.csv",
                [(b["id"], [b["peak_load_MW"] * s for s in lshape]) for b in doc["buses"]])
    profile_csv(OUT / "profiles" / f"{tag}_daily_wind.csv",
                [(w["id"], [w["capacity_MW"] * WIND_CF * s for s in wshape])
                 for w in doc["wind_generators"]])
    profile_csv(OUT / "profiles" / f"{tag}_monthly_load.csv", [("system", MONTHLY_LOAD)])
    profile_csv(OUT / "profiles" / f"{tag}_monthly_wind.csv", [("system", MONTHLY_WIND)])


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "profiles").mkdir(exist_ok=True)
    for name, doc in (("rts79", rts79_doc()), ("rts96", rts96_doc()), ("toy5", toy5_doc())):
        (OUT / f"{name}.case").write_text(json.dumps(doc, indent=1) + "\n")
    write_profiles("rts79", rts79_doc(), 24)
    write_profiles("rts96", rts96_doc(), 24)
    write_profiles("toy5", toy5_doc(), 24)
    write_profiles("toy5_h6", toy5_doc(), 6)

    mods79 = [
        {"kind": "remove_line", "args": {"line_id": 1}},
        {"kind": "move_load", "args": {"from_bus": 1, "to_bus": 3}},
        {"kind": "move_load", "args": {"from_bus": 2, "to_bus": 4}},
    ]
    (OUT / "rts79-bottleneck.mods").write_text(json.dumps(mods79, indent=1) + "\n")
    mods96 = []
    for z in (1, 2, 3):
        off = 100 * z
        mods96 += [
            {"kind": "remove_line", "args": {"line_id": off + 1}},
            {"kind": "move_load", "args": {"from_bus": off + 1, "to_bus": off + 3}},
            {"kind": "move_load", "args": {"from_bus": off + 2, "to_bus": off + 4}},
        ]
    (OUT / "rts96-bottleneck.mods").write_text(json.dumps(mods96, indent=1) + "\n")
    print(f"wrote cases, mods, and profiles under {OUT}")


if __name__ == "__main__":
    main()
