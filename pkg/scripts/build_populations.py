#!/usr/bin/env python3
"""Regenerate the checked-in synthetic populations.

17 users each (10 car owners), matching the case-study setup: the "pre"
population prioritizes latency, the "post" population prioritizes infection
risk. Posteriors come from actually running the 10-query active elicitation
protocol on styled synthetic users, so the shipped files exercise the same
code paths a live survey would.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fareopt.population import save_population
from fareopt.synthetic import synthesize_population

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "fareopt" / "data"
SEEDS = {"pre": 20210501, "post": 20210502}


def main():
    for style, seed in SEEDS.items():
        population = synthesize_population(
            n_users=17, n_car_owners=10, style=style, seed=seed, n_active=10
        )
        out = DATA_DIR / f"population_{style}.json"
        save_population(population, out)
        print(f"wrote {out} ({population.n_users} users, "
              f"{population.n_car_owners} car owners)")


if __name__ == "__main__":
    main()
