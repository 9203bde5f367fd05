"""Measure per-event dispatch cost as more enforcement modules are loaded.

Modules beyond the scenario's own models are drawn from the bundled set and
renamed, so each adds real guard checks. Writes a CSV next to the printout.

    python3 demos/overhead_scaling.py [out.csv]
"""

import sys

from enforcekit.sim import bench_overhead, load_corpus, models_by_name, write_csv


def main(out: str = "overhead.csv") -> None:
    models = models_by_name()
    scenario = next(s for s in load_corpus() if s.name == "bluechat")
    rows = bench_overhead(scenario, [models[n] for n in scenario.models],
                          sorted(models.values(), key=lambda m: m.name),
                          n_modules=(0, 1, 5, 20, 60), repetitions=5, runs_per_rep=100, seed=0)
    for r in rows:
        print(f"{r.n_modules:3} modules: {r.mean_us_per_event:7.2f} us/event ({r.overhead_pct:+.0f}%)")
    write_csv(rows, out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
